//! Empirical random walks on the CFG and the vertex metrics they induce.
//!
//! Observed traces are reduced to edge-traversal counts. Laplace smoothing on
//! the structural edges keeps the chain irreducible even before anything has
//! been observed, so hitting quantities below are always well defined.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::toylang::{Cfg, Trace};

/// Default smoothing mass added to every structural edge.
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Default per-step survival probability of the killed walk.
pub const DEFAULT_BETA: f64 = 0.5;
/// Hitting probabilities below this are clamped before taking logs.
pub const HIT_PROB_FLOOR: f64 = 1e-300;

/// Edge-traversal counts over a fixed vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCounts {
    n: usize,
    data: Vec<u64>,
}

impl EdgeCounts {
    pub fn new(n: usize) -> EdgeCounts {
        EdgeCounts {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: u32, v: u32) -> u64 {
        self.data[u as usize * self.n + v as usize]
    }

    pub fn add(&mut self, u: u32, v: u32) {
        self.data[u as usize * self.n + v as usize] += 1;
    }

    /// Accumulates every consecutive vertex pair of `trace`.
    pub fn add_trace(&mut self, trace: &Trace) {
        for w in trace.0.windows(2) {
            self.add(w[0], w[1]);
        }
    }
}

/// Row-stochastic transition matrix of the smoothed empirical walk.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: DMatrix<f64>,
    epsilon: f64,
}

impl MarkovChain {
    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    pub fn transition(&self, u: usize, v: usize) -> f64 {
        self.p[(u, v)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Wraps an explicit row-stochastic matrix.
    pub fn from_matrix(p: DMatrix<f64>) -> Result<MarkovChain> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::Parameter("transition matrix must be square".into()));
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| p[(i, j)]).sum();
            if (row - 1.0).abs() > 1e-9 || (0..n).any(|j| p[(i, j)] < 0.0) {
                return Err(Error::Parameter(format!(
                    "row {i} is not a probability distribution"
                )));
            }
        }
        Ok(MarkovChain { p, epsilon: 0.0 })
    }
}

/// Estimates the empirical walk `P(u, v) ∝ count(u, v) + ε·A(u, v)` where `A`
/// is the structural adjacency matrix. Counts off the structural edges are a
/// structural error, as is a vertex with no outgoing edge.
pub fn estimate_chain(
    counts: &EdgeCounts,
    adjacency: &DMatrix<f64>,
    epsilon: f64,
) -> Result<MarkovChain> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n || counts.len() != n {
        return Err(Error::Parameter(
            "counts and adjacency must agree on the vertex set".into(),
        ));
    }
    if epsilon <= 0.0 {
        return Err(Error::Parameter(format!(
            "smoothing epsilon must be positive, got {epsilon}"
        )));
    }
    let mut p = DMatrix::zeros(n, n);
    for u in 0..n {
        let mut row_sum = 0.0;
        for v in 0..n {
            let c = counts.get(u as u32, v as u32);
            if c > 0 && adjacency[(u, v)] == 0.0 {
                return Err(Error::Structural(format!(
                    "observed {c} traversals of ({u}, {v}), which is not an edge"
                )));
            }
            let w = c as f64 + epsilon * adjacency[(u, v)];
            p[(u, v)] = w;
            row_sum += w;
        }
        if row_sum <= 0.0 {
            return Err(Error::Structural(format!(
                "vertex {u} has no outgoing edge"
            )));
        }
        for v in 0..n {
            p[(u, v)] /= row_sum;
        }
    }
    Ok(MarkovChain { p, epsilon })
}

/// Which metric a [`MetricMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    HittingProb,
    Commute,
    Resistance,
}

/// A symmetric, zero-diagonal matrix of vertex distances.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    pub kind: MetricKind,
    pub dist: DMatrix<f64>,
    /// Survival parameter for the hitting-probability kind.
    pub beta: Option<f64>,
    /// True when an underflowing hitting probability was clamped.
    pub clamped: bool,
}

impl MetricMatrix {
    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.nrows() == 0
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.dist[(x as usize, y as usize)]
    }

    /// Checks symmetry, zero diagonal, nonnegativity, and the triangle
    /// inequality up to `tol`.
    pub fn validate_metric_axioms(&self, tol: f64) -> Result<()> {
        let n = self.len();
        let d = &self.dist;
        for x in 0..n {
            if d[(x, x)] != 0.0 {
                return Err(Error::Numerical(format!("nonzero diagonal at {x}")));
            }
            for y in 0..n {
                if d[(x, y)] < 0.0 {
                    return Err(Error::Numerical(format!("negative distance ({x}, {y})")));
                }
                if (d[(x, y)] - d[(y, x)]).abs() > tol {
                    return Err(Error::Numerical(format!("asymmetry at ({x}, {y})")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if d[(x, z)] > d[(x, y)] + d[(y, z)] + tol {
                        return Err(Error::Numerical(format!(
                            "triangle violation at ({x}, {y}, {z})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Probability that a walk from `x`, surviving each step with probability
/// `beta`, ever reaches `y`. Row `x`, column `y`; the diagonal is one.
pub fn hitting_probabilities(chain: &MarkovChain, beta: f64) -> Result<DMatrix<f64>> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::Parameter(format!(
            "beta must lie strictly between 0 and 1, got {beta}"
        )));
    }
    let n = chain.len();
    let p = chain.matrix();
    let mut h = DMatrix::zeros(n, n);
    for y in 0..n {
        h[(y, y)] = 1.0;
        if n == 1 {
            continue;
        }
        // indices of the other states, in order
        let others: Vec<usize> = (0..n).filter(|&x| x != y).collect();
        let m = n - 1;
        let mut a = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (i, &x) in others.iter().enumerate() {
            for (j, &z) in others.iter().enumerate() {
                a[(i, j)] = (if i == j { 1.0 } else { 0.0 }) - beta * p[(x, z)];
            }
            rhs[i] = beta * p[(x, y)];
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("hitting-probability solve failed".into()))?;
        for (i, &x) in others.iter().enumerate() {
            h[(x, y)] = sol[i];
        }
    }
    Ok(h)
}

/// Hitting-probability metric `D(x, y) = -log h(x, y) - log h(y, x)`.
pub fn hitting_prob_metric(chain: &MarkovChain, beta: f64) -> Result<MetricMatrix> {
    let h = hitting_probabilities(chain, beta)?;
    let n = chain.len();
    let mut dist = DMatrix::zeros(n, n);
    let mut clamped = false;
    for x in 0..n {
        for y in 0..x {
            let mut log_sum = 0.0;
            for &v in &[h[(x, y)], h[(y, x)]] {
                if v < HIT_PROB_FLOOR {
                    clamped = true;
                    log_sum += HIT_PROB_FLOOR.ln();
                } else {
                    log_sum += v.ln();
                }
            }
            let d = (-log_sum).max(0.0);
            dist[(x, y)] = d;
            dist[(y, x)] = d;
        }
    }
    if clamped {
        let max_finite = dist.iter().fold(0.0f64, |acc, &v| acc.max(v));
        log::warn!(
            "hitting probabilities underflowed and were clamped; max finite distance {max_finite}"
        );
    }
    Ok(MetricMatrix {
        kind: MetricKind::HittingProb,
        dist,
        beta: Some(beta),
        clamped,
    })
}

/// Stationary distribution of an irreducible chain.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<DVector<f64>> {
    let n = chain.len();
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    // (I - Pᵀ) π = 0 with the last equation replaced by Σ π = 1
    let mut a = DMatrix::identity(n, n) - chain.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("stationary solve failed".into()))?;
    if pi.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical(
            "stationary distribution has a nonpositive entry".into(),
        ));
    }
    Ok(&pi / pi.sum())
}

/// Commute-time metric `C(x, y) = E_x[T_y] + E_y[T_x]` from the fundamental
/// matrix of the chain.
pub fn commute_time_metric(chain: &MarkovChain) -> Result<MetricMatrix> {
    let n = chain.len();
    let pi = stationary_distribution(chain)?;
    let ones = DVector::from_element(n, 1.0);
    let fundamental = (DMatrix::identity(n, n) - chain.matrix() + &ones * pi.transpose())
        .try_inverse()
        .ok_or_else(|| Error::Numerical("fundamental matrix is singular".into()))?;
    let mut dist = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..x {
            let to = (fundamental[(y, y)] - fundamental[(x, y)]) / pi[y];
            let back = (fundamental[(x, x)] - fundamental[(y, x)]) / pi[x];
            let c = (to + back).max(0.0);
            dist[(x, y)] = c;
            dist[(y, x)] = c;
        }
    }
    Ok(MetricMatrix {
        kind: MetricKind::Commute,
        dist,
        beta: None,
        clamped: false,
    })
}

/// Effective-resistance metric for a weighted digraph, via the projected
/// Lyapunov equation `ΠLΠ Σ + Σ (ΠLΠ)ᵀ = Π` solved on the subspace
/// orthogonal to the all-ones vector. For symmetric weights this reduces to
/// the classical effective resistance.
pub fn resistance_metric(weights: &DMatrix<f64>) -> Result<MetricMatrix> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(Error::Parameter("weight matrix must be square".into()));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Parameter(
            "edge weights must be finite and nonnegative".into(),
        ));
    }
    if n == 1 {
        return Ok(MetricMatrix {
            kind: MetricKind::Resistance,
            dist: DMatrix::zeros(1, 1),
            beta: None,
            clamped: false,
        });
    }
    if !strongly_connected(weights) {
        return Err(Error::Structural(
            "resistance needs a strongly connected weight digraph".into(),
        ));
    }
    // out-degree Laplacian
    let mut lap = -weights.clone();
    for i in 0..n {
        lap[(i, i)] += weights.row(i).sum();
    }
    let v = linalg::ones_complement_basis(n);
    let b = v.transpose() * &lap * &v;
    let s = linalg::solve_lyapunov(&b, &DMatrix::identity(n - 1, n - 1))?;
    let sigma = &v * s * v.transpose();
    let mut dist = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..x {
            let r = 2.0 * (sigma[(x, x)] + sigma[(y, y)] - 2.0 * sigma[(x, y)]);
            let r = r.max(0.0);
            dist[(x, y)] = r;
            dist[(y, x)] = r;
        }
    }
    Ok(MetricMatrix {
        kind: MetricKind::Resistance,
        dist,
        beta: None,
        clamped: false,
    })
}

fn strongly_connected(weights: &DMatrix<f64>) -> bool {
    let n = weights.nrows();
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward {
                    weights[(u, v)]
                } else {
                    weights[(v, u)]
                };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    };
    reach(true) == n && reach(false) == n
}

/// Breadth-first hop distance from the entry to every vertex.
pub fn entry_hop_distances(cfg: &Cfg) -> Vec<u32> {
    let n = cfg.len();
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[cfg.entry() as usize] = 0;
    queue.push_back(cfg.entry());
    while let Some(u) = queue.pop_front() {
        for &v in cfg.successors(u) {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    debug_assert!(dist.iter().all(|&d| d != u32::MAX));
    dist
}
