//! MAXCUT instances: construction, generators, exact solution and the
//! edge-list text format.
//!
//! Assignments are encoded as integers whose bit `i` is the side of vertex
//! `i`. This matches the basis-state indexing used by the simulator.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Largest vertex count the exhaustive solver accepts.
pub const MAX_EXACT_VERTICES: usize = 28;

const PAIRING_RETRIES: usize = 1000;

/// Number of edges crossing a bipartition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CutValue(pub u32);

impl CutValue {
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for CutValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Unweighted simple graph whose cut function defines the cost Hamiltonian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxCutProblem {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl MaxCutProblem {
    /// Builds a problem, normalising each edge to `(min, max)`. Edge order is
    /// preserved; it fixes the order of edge observables.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidInput("graph must have at least one vertex".into()));
        }
        if n_vertices > 63 {
            return Err(Error::InvalidInput(format!(
                "{n_vertices} vertices exceed the 63-vertex assignment encoding"
            )));
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidInput(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            normalized.push(e);
        }
        Ok(Self {
            n_vertices,
            edges: normalized,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Cut value of the assignment whose bit `i` gives the side of vertex `i`.
    pub fn cut_value(&self, assignment: u64) -> CutValue {
        let crossing = self
            .edges
            .iter()
            .filter(|&&(a, b)| ((assignment >> a) ^ (assignment >> b)) & 1 == 1)
            .count();
        CutValue(crossing as u32)
    }

    /// Cut value of an explicit bitstring (`bits[i]` is vertex `i`).
    pub fn cut_value_of_bits(&self, bits: &[bool]) -> Result<CutValue> {
        if bits.len() != self.n_vertices {
            return Err(Error::mismatch(self.n_vertices, bits.len()));
        }
        let crossing = self.edges.iter().filter(|&&(a, b)| bits[a] != bits[b]).count();
        Ok(CutValue(crossing as u32))
    }

    /// Maximum cut and a witness assignment.
    ///
    /// Vertex 0 is pinned to side 0 and the remaining vertices are walked in
    /// Gray-code order, so each step flips one vertex and updates the cut
    /// incrementally.
    pub fn exact_maxcut(&self) -> Result<(CutValue, u64)> {
        let n = self.n_vertices;
        if n > MAX_EXACT_VERTICES {
            return Err(Error::Budget(format!(
                "exact MAXCUT enumerates 2^(N-1) cuts and is limited to N <= {MAX_EXACT_VERTICES}, got N = {n}"
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut assignment = 0u64;
        let mut cut: i64 = 0;
        let mut best = (0i64, 0u64);
        let free = n - 1;
        for step in 1u64..(1u64 << free) {
            let vertex = step.trailing_zeros() as usize + 1;
            let side = (assignment >> vertex) & 1;
            let mut delta = 0i64;
            for &u in &adjacency[vertex] {
                // Edge is currently cut iff sides differ; flipping toggles it.
                if (assignment >> u) & 1 != side {
                    delta -= 1;
                } else {
                    delta += 1;
                }
            }
            assignment ^= 1 << vertex;
            cut += delta;
            if cut > best.0 {
                best = (cut, assignment);
            }
        }
        Ok((CutValue(best.0 as u32), best.1))
    }

    /// Edge-list text: first line `N`, then one `i j` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n_vertices);
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    /// Parses the edge-list format. `origin` is only used in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut n_vertices: Option<usize> = None;
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match n_vertices {
                None => {
                    if fields.len() != 1 {
                        return Err(parse_err(line_no, "expected vertex count on first line".into()));
                    }
                    let n: usize = fields[0]
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid vertex count {:?}", fields[0])))?;
                    if n == 0 {
                        return Err(parse_err(line_no, "vertex count must be positive".into()));
                    }
                    n_vertices = Some(n);
                }
                Some(n) => {
                    if fields.len() != 2 {
                        return Err(parse_err(line_no, format!("expected \"i j\", found {content:?}")));
                    }
                    let mut ends = [0usize; 2];
                    for (slot, field) in ends.iter_mut().zip(&fields) {
                        *slot = field
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("invalid vertex index {field:?}")))?;
                        if *slot >= n {
                            return Err(parse_err(
                                line_no,
                                format!("vertex index {slot} out of range for N = {n}"),
                            ));
                        }
                    }
                    let [a, b] = ends;
                    if a == b {
                        return Err(parse_err(line_no, format!("self-loop on vertex {a}")));
                    }
                    if !seen.insert((a.min(b), a.max(b))) {
                        return Err(parse_err(line_no, format!("duplicate edge {a} {b}")));
                    }
                    edges.push((a, b));
                }
            }
        }
        let n = n_vertices.ok_or_else(|| parse_err(1, "missing vertex count".into()))?;
        Self::new(n, edges).map_err(|e| parse_err(0, e.to_string()))
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<MaxCutProblem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    MaxCutProblem::parse(&text, path)
}

pub fn save_problem(problem: &MaxCutProblem, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, problem.to_text())?;
    Ok(())
}

/// Uniformly paired random `k`-regular graph.
///
/// Uses the pairing (configuration) model and rejects pairings with loops or
/// repeated edges, giving up after a bounded number of attempts.
pub fn random_regular_graph(n: usize, k: usize, seed: u64) -> Result<MaxCutProblem> {
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "degree {k} must satisfy 0 < k < n = {n}"
        )));
    }
    if n * k % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "no {k}-regular graph on {n} vertices exists: n*k is odd"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Graph);
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    'attempt: for _ in 0..PAIRING_RETRIES {
        points.shuffle(&mut rng);
        let mut seen = HashSet::with_capacity(n * k / 2);
        let mut edges = Vec::with_capacity(n * k / 2);
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
            edges.push((a, b));
        }
        edges.sort_unstable();
        return MaxCutProblem::new(n, edges);
    }
    Err(Error::Generation(format!(
        "pairing model found no simple {k}-regular graph on {n} vertices after {PAIRING_RETRIES} attempts"
    )))
}

/// Random graph with `round(n * avg_degree / 2)` distinct edges drawn
/// uniformly, for sizes where `n * k` is odd and no regular graph exists.
pub fn random_graph_with_average_degree(n: usize, avg_degree: f64, seed: u64) -> Result<MaxCutProblem> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    let max_edges = n * (n - 1) / 2;
    if !(avg_degree.is_finite() && avg_degree > 0.0) {
        return Err(Error::InvalidInput(format!("average degree {avg_degree} must be positive")));
    }
    let m = (n as f64 * avg_degree / 2.0).round() as usize;
    if m > max_edges {
        return Err(Error::InvalidInput(format!(
            "average degree {avg_degree} needs {m} edges but only {max_edges} exist on {n} vertices"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Graph);
    let mut seen = HashSet::with_capacity(m);
    while seen.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            seen.insert((a.min(b), a.max(b)));
        }
    }
    let mut edges: Vec<_> = seen.into_iter().collect();
    edges.sort_unstable();
    MaxCutProblem::new(n, edges)
}
