//! Multi-start BFGS over the `2p` QAOA angles.
//!
//! The minimiser is generic over [`Objective`]; the QAOA objective uses
//! central finite differences and counts every circuit evaluation so that
//! budgets can be matched against the reinforcement-learning runs.

use std::f64::consts::PI;

use rand::Rng;

use crate::problems::{CutValue, MaxCutProblem};
use crate::rng::{self, Stream};
use crate::simulator::{run_schedule_with, Angles, CostDiagonal};
use crate::{Error, Result};

/// A differentiable function for [`bfgs_minimize`]. `None` signals that the
/// evaluation budget is exhausted and the run must stop.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&mut self, x: &[f64]) -> Option<f64>;
    fn gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Option<()>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
    /// Objective value at the start point and after every accepted step.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    value: f64,
    grad: Vec<f64>,
}

enum Search {
    Found(Point),
    Failed,
    Budget,
}

/// Line search satisfying the strong Wolfe conditions: expand until a
/// bracket is found, then bisect inside it.
fn wolfe_search<O: Objective>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    d0: f64,
    dir: &[f64],
    opts: &BfgsOptions,
) -> Search {
    const MAX_TRIALS: usize = 60;
    let at = |alpha: f64| -> Vec<f64> { x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect() };
    let mut grad = vec![0.0; x.len()];
    // `lo` is always the best point so far that satisfies sufficient decrease.
    let mut lo = Point {
        alpha: 0.0,
        value: f0,
        grad: Vec::new(),
    };
    let mut hi: Option<f64> = None;
    let mut alpha = 1.0;
    for _ in 0..MAX_TRIALS {
        let trial = at(alpha);
        let Some(v) = obj.value(&trial) else {
            return Search::Budget;
        };
        if !v.is_finite() || v > f0 + opts.c1 * alpha * d0 || v >= lo.value {
            hi = Some(alpha);
        } else {
            if obj.gradient(&trial, &mut grad).is_none() {
                return Search::Budget;
            }
            let d = dot(&grad, dir);
            if d.abs() <= -opts.c2 * d0 {
                return Search::Found(Point {
                    alpha,
                    value: v,
                    grad,
                });
            }
            let flip = match hi {
                None => d >= 0.0,
                Some(h) => d * (h - lo.alpha) >= 0.0,
            };
            if flip {
                hi = Some(lo.alpha);
            }
            lo = Point {
                alpha,
                value: v,
                grad: grad.clone(),
            };
        }
        alpha = match hi {
            None => 2.0 * alpha,
            Some(h) => {
                if (h - lo.alpha).abs() <= 1e-14 * h.abs().max(lo.alpha.abs()) {
                    break;
                }
                0.5 * (lo.alpha + h)
            }
        };
    }
    if lo.alpha > 0.0 {
        Search::Found(lo)
    } else {
        Search::Failed
    }
}

/// BFGS with a dense inverse-Hessian approximation.
///
/// Every accepted step satisfies the Armijo condition, so the objective
/// never increases from one iterate to the next.
pub fn bfgs_minimize<O: Objective>(obj: &mut O, x0: &[f64], opts: &BfgsOptions) -> MinimizeResult {
    let n = obj.dim();
    assert_eq!(x0.len(), n, "start point dimension");
    let mut x = x0.to_vec();
    let mut result = MinimizeResult {
        x: x.clone(),
        value: f64::INFINITY,
        grad_norm: f64::INFINITY,
        iterations: 0,
        converged: false,
        budget_exhausted: false,
        history: Vec::new(),
    };
    let Some(mut f) = obj.value(&x) else {
        result.budget_exhausted = true;
        return result;
    };
    let mut g = vec![0.0; n];
    if obj.gradient(&x, &mut g).is_none() {
        result.value = f;
        result.budget_exhausted = true;
        result.history.push(f);
        return result;
    }
    result.value = f;
    result.history.push(f);

    let identity = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h, 1.0);
    let mut first_step = true;

    while result.iterations < opts.max_iters {
        let gnorm = norm(&g);
        result.grad_norm = gnorm;
        if gnorm < opts.grad_tol {
            result.converged = true;
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut d0 = dot(&g, &dir);
        if d0 >= 0.0 || !d0.is_finite() {
            identity(&mut h, 1.0);
            dir = g.iter().map(|v| -v).collect();
            d0 = -gnorm * gnorm;
        }
        let point = match wolfe_search(obj, &x, f, d0, &dir, opts) {
            Search::Found(p) => p,
            Search::Budget => {
                result.budget_exhausted = true;
                break;
            }
            Search::Failed => {
                if first_step {
                    break;
                }
                // Retry once along steepest descent with a fresh metric.
                identity(&mut h, 1.0);
                first_step = true;
                continue;
            }
        };
        let s: Vec<f64> = dir.iter().map(|d| point.alpha * d).collect();
        let y: Vec<f64> = point.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        debug_assert!(point.value <= f);
        f = point.value;
        g = point.grad;
        result.iterations += 1;
        result.history.push(f);

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_step {
                identity(&mut h, sy / dot(&y, &y));
            }
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        first_step = false;
    }
    result.x = x;
    result.value = f;
    result.grad_norm = norm(&g);
    result.converged |= result.grad_norm < opts.grad_tol;
    result
}

/// `-⟨C⟩` of the QAOA state for a flat angle vector `[γ₁, β₁, γ₂, β₂, …]`,
/// with central-difference gradients and an evaluation counter.
pub struct QaoaObjective {
    cost: CostDiagonal,
    p: usize,
    h: f64,
    evals: usize,
    max_evals: usize,
}

impl QaoaObjective {
    pub fn new(problem: &MaxCutProblem, p: usize, h: f64, max_evals: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
        }
        Ok(Self {
            cost: CostDiagonal::new(problem)?,
            p,
            h,
            evals: 0,
            max_evals,
        })
    }

    pub fn evaluations(&self) -> usize {
        self.evals
    }

    /// Unbudgeted evaluation; still counted.
    pub fn evaluate(&mut self, angles: &[f64]) -> Result<f64> {
        if angles.len() != 2 * self.p {
            return Err(Error::mismatch(2 * self.p, angles.len()));
        }
        self.evals += 1;
        let state = run_schedule_with(&self.cost, angles.chunks_exact(2).map(|c| (c[0], c[1])))?;
        Ok(-state.expect_cost(&self.cost)?)
    }
}

impl Objective for QaoaObjective {
    fn dim(&self) -> usize {
        2 * self.p
    }

    fn value(&mut self, x: &[f64]) -> Option<f64> {
        if self.evals >= self.max_evals {
            return None;
        }
        self.evaluate(x).ok()
    }

    fn gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Option<()> {
        if self.evals + 2 * x.len() > self.max_evals {
            return None;
        }
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + self.h;
            let up = self.evaluate(&probe).ok()?;
            probe[i] = x[i] - self.h;
            let down = self.evaluate(&probe).ok()?;
            probe[i] = x[i];
            grad[i] = (up - down) / (2.0 * self.h);
        }
        Some(())
    }
}

/// `-⟨C⟩` for a schedule in the canonical box.
pub fn objective(problem: &MaxCutProblem, schedule: &[Angles]) -> Result<f64> {
    let flat: Vec<f64> = schedule.iter().flat_map(|a| [a.gamma(), a.beta()]).collect();
    QaoaObjective::new(problem, schedule.len(), 1e-5, usize::MAX)?.evaluate(&flat)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsConfig {
    /// Total circuit evaluations across all restarts.
    pub max_evals: usize,
    pub h: f64,
    pub grad_tol: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            max_evals: 1_000_000,
            h: 1e-5,
            grad_tol: 1e-6,
            restarts: 20,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub p: usize,
    pub best_cost: f64,
    /// Optimum as found, `[γ₁, β₁, …]`, not wrapped.
    pub best_angles: Vec<f64>,
    /// The optimum folded into the canonical angle box; `None` when the
    /// graph mixes odd and even degrees and no exact fold exists.
    pub schedule: Option<Vec<Angles>>,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    pub restart_bests: Vec<f64>,
    /// `(evaluations so far, best ⟨C⟩ so far)` after every accepted step.
    pub trace: Vec<(usize, f64)>,
}

/// Best `⟨C⟩` over restarts of BFGS started uniformly in the angle box.
pub fn bfgs_optimize(problem: &MaxCutProblem, p: usize, config: &BfgsConfig) -> Result<BaselineResult> {
    if config.max_evals == 0 {
        return Err(Error::InvalidInput("max_evals must be at least 1".into()));
    }
    let mut obj = QaoaObjective::new(problem, p, config.h, config.max_evals)?;
    if p == 0 {
        let value = -obj.evaluate(&[])?;
        return Ok(BaselineResult {
            p,
            best_cost: value,
            best_angles: Vec::new(),
            schedule: Some(Vec::new()),
            evaluations: obj.evaluations(),
            budget_exhausted: false,
            restart_bests: vec![value],
            trace: vec![(1, value)],
        });
    }
    let opts = BfgsOptions {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        ..BfgsOptions::default()
    };
    let mut rng = rng::stream(config.seed, Stream::Restarts);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut restart_bests = Vec::new();
    let mut trace = Vec::new();
    let mut budget_exhausted = false;
    for _ in 0..config.restarts.max(1) {
        let x0: Vec<f64> = (0..p)
            .flat_map(|_| [rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI)])
            .collect();
        let evals_before = obj.evaluations();
        let run = bfgs_minimize(&mut obj, &x0, &opts);
        if run.history.is_empty() {
            budget_exhausted = true;
            break;
        }
        let value = -run.value;
        restart_bests.push(value);
        let prior = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
        // Spread this restart's history evenly over the evaluations it used.
        let used = obj.evaluations() - evals_before;
        let steps = run.history.len();
        for (k, v) in run.history.iter().enumerate() {
            let at = evals_before + used * (k + 1) / steps;
            let so_far = trace.last().map_or(f64::NEG_INFINITY, |t: &(usize, f64)| t.1);
            trace.push((at, so_far.max(prior).max(-v)));
        }
        if value > prior {
            best = Some((value, run.x));
        }
        if run.budget_exhausted {
            budget_exhausted = true;
            break;
        }
    }
    let (best_cost, best_angles) = best.ok_or_else(|| {
        Error::Budget(format!("evaluation budget {} too small for one BFGS start", config.max_evals))
    })?;
    Ok(BaselineResult {
        p,
        best_cost,
        schedule: canonical_schedule(problem, &best_angles),
        best_angles,
        evaluations: obj.evaluations(),
        budget_exhausted,
        restart_bests,
        trace,
    })
}

/// Folds unconstrained angles into `γ ∈ [0, π)`, `β ∈ [0, π)` without
/// changing `⟨C⟩`.
///
/// `β` has period π up to a global phase. `exp(-iπC)` equals `∏ Z_v^deg(v)`:
/// the identity when every degree is even, and `Z^⊗N` when every degree is
/// odd, in which case a shift of `γ_k` by π is absorbed by negating all
/// later `β`. Mixed-parity graphs have no such fold and yield `None`.
pub fn canonical_schedule(problem: &MaxCutProblem, angles: &[f64]) -> Option<Vec<Angles>> {
    let degrees = problem.degrees();
    let all_even = degrees.iter().all(|d| d % 2 == 0);
    let all_odd = degrees.iter().all(|d| d % 2 == 1);
    if !(all_even || all_odd) {
        return None;
    }
    let wrap = |v: f64, period: f64| {
        let r = v.rem_euclid(period);
        if r >= period {
            0.0
        } else {
            r
        }
    };
    let mut pairs: Vec<(f64, f64)> = angles.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    for k in 0..pairs.len() {
        let g = wrap(pairs[k].0, 2.0 * PI);
        if g >= PI {
            pairs[k].0 = g - PI;
            if all_odd {
                for pair in &mut pairs[k..] {
                    pair.1 = -pair.1;
                }
            }
        } else {
            pairs[k].0 = g;
        }
    }
    pairs
        .into_iter()
        .map(|(g, b)| Angles::new(wrap(g, PI), wrap(b, PI)).ok())
        .collect()
}

/// `(exact - best) / exact`, clamped below at 0 against round-off.
pub fn relative_error(best: f64, exact: CutValue) -> Result<f64> {
    if exact.get() == 0 {
        return Err(Error::InvalidInput(
            "relative error is undefined for a graph whose maximum cut is 0".into(),
        ));
    }
    let exact = exact.get() as f64;
    Ok(((exact - best) / exact).max(0.0))
}
