//! Dense statevector simulation of QAOA layers.
//!
//! Amplitudes are stored flat, indexed by the computational basis integer;
//! bit `i` of the index is the state of qubit `i` (0 = spin up, Z = +1).

use std::f64::consts::PI;

pub use num_complex::Complex64;

use crate::problems::MaxCutProblem;
use crate::{Error, Result};

/// Largest register the simulator allocates (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// One QAOA round: cost angle `gamma` in `[0, π)`, mixer angle `beta` in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angles {
    gamma: f64,
    beta: f64,
}

impl Angles {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(0.0..PI).contains(&gamma) {
            return Err(Error::InvalidInput(format!("gamma {gamma} outside [0, π)")));
        }
        if !(0.0..2.0 * PI).contains(&beta) {
            return Err(Error::InvalidInput(format!("beta {beta} outside [0, 2π)")));
        }
        Ok(Self { gamma, beta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Cut value of every basis state, i.e. the diagonal of the cost operator.
#[derive(Clone, Debug)]
pub struct CostDiagonal {
    n_qubits: usize,
    max_value: u32,
    values: Vec<u32>,
}

impl CostDiagonal {
    pub fn new(problem: &MaxCutProblem) -> Result<Self> {
        let n = problem.n_vertices();
        check_qubits(n)?;
        let mut values = vec![0u32; 1 << n];
        for &(a, b) in problem.edges() {
            for (z, v) in values.iter_mut().enumerate() {
                *v += (((z >> a) ^ (z >> b)) & 1) as u32;
            }
        }
        Ok(Self {
            n_qubits: n,
            max_value: problem.n_edges() as u32,
            values,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Budget(format!(
            "statevector simulation supports 1..={MAX_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// The uniform superposition `|s⟩`, the +1 eigenstate of every `X_i`.
    pub fn uniform(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self {
            n_qubits,
            amplitudes: vec![amp; dim],
        })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidInput(format!("basis index {index} >= {dim}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps caller-supplied amplitudes. The length must be `2^n`; the
    /// vector is normalised.
    pub fn from_amplitudes(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::mismatch(1 << n_qubits, amplitudes.len()));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("amplitudes must have finite nonzero norm".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn fidelity(&self, other: &Statevector) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::mismatch(self.n_qubits, other.n_qubits));
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm())
    }

    /// Multiplies amplitude `z` by `exp(-i γ C(z))`.
    pub fn apply_cost_layer(&mut self, cost: &CostDiagonal, gamma: f64) -> Result<()> {
        if cost.n_qubits != self.n_qubits {
            return Err(Error::mismatch(self.n_qubits, cost.n_qubits));
        }
        // C has integer spectrum 0..=m, so one phase table covers every state.
        let phases: Vec<Complex64> = (0..=cost.max_value)
            .map(|k| Complex64::from_polar(1.0, -gamma * k as f64))
            .collect();
        for (amp, &c) in self.amplitudes.iter_mut().zip(&cost.values) {
            *amp *= phases[c as usize];
        }
        Ok(())
    }

    /// Applies `exp(-i β X_j)` to every qubit.
    pub fn apply_mixer_layer(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        let low = self.n_qubits.min(BLOCK_BITS);
        // Qubits below BLOCK_BITS pair amplitudes inside one block, so they
        // are all applied while the block is in cache.
        for block in self.amplitudes.chunks_exact_mut(1 << low) {
            for q in 0..low {
                rotate_pairs(block, 1 << q, c, s);
            }
        }
        for q in low..self.n_qubits {
            rotate_pairs(&mut self.amplitudes, 1 << q, c, s);
        }
    }

    fn check_qubit(&self, i: usize) -> Result<()> {
        if i >= self.n_qubits {
            return Err(Error::InvalidInput(format!(
                "qubit {i} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// `⟨C⟩ = Σ_z |a_z|² C(z)`.
    pub fn expect_cost(&self, cost: &CostDiagonal) -> Result<f64> {
        if cost.n_qubits != self.n_qubits {
            return Err(Error::mismatch(self.n_qubits, cost.n_qubits));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&cost.values)
            .map(|(a, &c)| a.norm_sqr() * c as f64)
            .sum())
    }

    pub fn expect_z(&self, i: usize) -> Result<f64> {
        self.check_qubit(i)?;
        let stride = 1usize << i;
        let p1: f64 = self
            .amplitudes
            .chunks_exact(2 * stride)
            .map(|block| block[stride..].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum();
        Ok(1.0 - 2.0 * p1)
    }

    pub fn expect_x(&self, i: usize) -> Result<f64> {
        self.check_qubit(i)?;
        Ok(2.0 * pair_overlap(&self.amplitudes, 1 << i))
    }

    /// `⟨½(1 - Z_a Z_b)⟩`, the probability that the edge is cut.
    pub fn expect_edge(&self, problem: &MaxCutProblem, edge: (usize, usize)) -> Result<f64> {
        let (a, b) = (edge.0.min(edge.1), edge.0.max(edge.1));
        if !problem.edges().contains(&(a, b)) {
            return Err(Error::InvalidInput(format!("({a}, {b}) is not an edge of the problem")));
        }
        if problem.n_vertices() != self.n_qubits {
            return Err(Error::mismatch(self.n_qubits, problem.n_vertices()));
        }
        Ok(self.cut_probability(a, b))
    }

    fn cut_probability(&self, a: usize, b: usize) -> f64 {
        let mask = (1usize << a) | (1usize << b);
        let single = 1usize << a;
        let other = 1usize << b;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(z, _)| {
                let bits = z & mask;
                bits == single || bits == other
            })
            .map(|(_, amp)| amp.norm_sqr())
            .sum()
    }

    /// All local observables: `(⟨X_i⟩, ⟨Z_i⟩, ⟨C_e⟩)` with the edge block
    /// in the problem's edge order.
    pub fn local_observables(&self, problem: &MaxCutProblem) -> Result<LocalObservables> {
        if problem.n_vertices() != self.n_qubits {
            return Err(Error::mismatch(self.n_qubits, problem.n_vertices()));
        }
        let n = self.n_qubits;
        let low = n.min(BLOCK_BITS);
        let edges = problem.edges();
        let mut x = vec![0.0; n];
        let mut ones = vec![0.0; n];
        let mut both = vec![0.0; edges.len()];
        let mut probs = vec![0.0; 1 << low];
        let mut low_ones = vec![0.0; low];
        for (k, block) in self.amplitudes.chunks_exact(1 << low).enumerate() {
            // Bits at and above `low` are fixed within a block.
            let high = k << low;
            for (p, a) in probs.iter_mut().zip(block) {
                *p = a.norm_sqr();
            }
            let total: f64 = probs.iter().sum();
            for q in 0..low {
                x[q] += pair_overlap(block, 1 << q);
                low_ones[q] = marginal_one(&probs, q);
                ones[q] += low_ones[q];
            }
            for (q, one) in ones.iter_mut().enumerate().skip(low) {
                if high >> q & 1 == 1 {
                    *one += total;
                }
            }
            for (acc, &(a, b)) in both.iter_mut().zip(edges) {
                *acc += if b < low {
                    marginal_both(&probs, a, b)
                } else if high >> b & 1 == 0 {
                    0.0
                } else if a < low {
                    low_ones[a]
                } else if high >> a & 1 == 1 {
                    total
                } else {
                    0.0
                };
            }
        }
        for (q, xq) in x.iter_mut().enumerate().skip(low) {
            *xq = pair_overlap(&self.amplitudes, 1 << q);
        }
        for xq in &mut x {
            *xq *= 2.0;
        }
        let z = ones.iter().map(|p1| 1.0 - 2.0 * p1).collect();
        let edges = edges
            .iter()
            .zip(&both)
            .map(|(&(a, b), p11)| ones[a] + ones[b] - 2.0 * p11)
            .collect();
        Ok(LocalObservables { x, z, edges })
    }
}

/// log2 of the amplitudes handled per cache block (256 KiB of state).
const BLOCK_BITS: usize = 14;

/// `[[c, -i s], [-i s, c]]` on every amplitude pair `stride` apart.
fn rotate_pairs(amps: &mut [Complex64], stride: usize, c: f64, s: f64) {
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x0, x1) = (*a0, *a1);
            *a0 = Complex64::new(c * x0.re + s * x1.im, c * x0.im - s * x1.re);
            *a1 = Complex64::new(c * x1.re + s * x0.im, c * x1.im - s * x0.re);
        }
    }
}

/// `Σ Re(a_z* a_{z+stride})` over pairs differing in the bit `stride`.
fn pair_overlap(amps: &[Complex64], stride: usize) -> f64 {
    let mut acc = 0.0;
    for block in amps.chunks_exact(2 * stride) {
        let (lo, hi) = block.split_at(stride);
        for (a0, a1) in lo.iter().zip(hi) {
            acc += a0.re * a1.re + a0.im * a1.im;
        }
    }
    acc
}

fn marginal_one(probs: &[f64], i: usize) -> f64 {
    let stride = 1usize << i;
    probs
        .chunks_exact(2 * stride)
        .map(|block| block[stride..].iter().sum::<f64>())
        .sum()
}

/// `P(bit a = 1 and bit b = 1)` for `a < b`, summing contiguous runs.
fn marginal_both(probs: &[f64], a: usize, b: usize) -> f64 {
    let (lo, hi) = (1usize << a.min(b), 1usize << a.max(b));
    probs
        .chunks_exact(2 * hi)
        .map(|outer| {
            outer[hi..]
                .chunks_exact(2 * lo)
                .map(|inner| inner[lo..].iter().sum::<f64>())
                .sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalObservables {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub edges: Vec<f64>,
}

/// `U(B, β_p) U(C, γ_p) ⋯ U(B, β_1) U(C, γ_1) |s⟩`.
pub fn run_schedule(problem: &MaxCutProblem, schedule: &[Angles]) -> Result<Statevector> {
    let cost = CostDiagonal::new(problem)?;
    run_schedule_with(&cost, schedule.iter().map(|a| (a.gamma, a.beta)))
}

/// Same as [`run_schedule`] with a precomputed diagonal and unconstrained
/// angle pairs.
pub fn run_schedule_with(
    cost: &CostDiagonal,
    schedule: impl IntoIterator<Item = (f64, f64)>,
) -> Result<Statevector> {
    let mut state = Statevector::uniform(cost.n_qubits)?;
    for (gamma, beta) in schedule {
        state.apply_cost_layer(cost, gamma)?;
        state.apply_mixer_layer(beta);
    }
    Ok(state)
}
