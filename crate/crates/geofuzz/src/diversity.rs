//! Magnitude and diversity computations on finite dissimilarity spaces.
//!
//! A symmetric distance matrix `D` is turned into a similarity matrix
//! `Z = exp(-t D)` entrywise. The weighting `w` solving `Z w = 1` yields the
//! magnitude `M = sum(w)`, a scale-dependent effective number of points.
//! On top of that sit order-q diversity of a distribution, greedy landmark
//! selection, and the cell keys that discretize a space by ranked landmark
//! proximity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted solves must satisfy `max_i |(Zw - 1)_i|` below this bound.
pub const WEIGHTING_RESIDUAL_TOL: f64 = 1e-8;
/// Ridge factor relative to `trace(Z)/n` used on a failed solve.
const RIDGE_FACTOR: f64 = 1e-10;
/// Number of nearest landmarks in a default cell key.
pub const DEFAULT_CELL_RESOLUTION: usize = 2;

/// Entrywise similarity `Z(i,j) = exp(-t D(i,j))` at a fixed scale.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub z: DMatrix<f64>,
    pub t: f64,
}

impl SimilarityMatrix {
    /// Builds `Z = exp(-t D)` after validating that `D` is a square,
    /// symmetric, nonnegative matrix with zero diagonal. Infinite entries
    /// are allowed and map to zero similarity.
    pub fn from_distances(d: &DMatrix<f64>, t: f64) -> Result<Self> {
        validate_distance_matrix(d)?;
        if !(t > 0.0) {
            return Err(Error::Parameter(format!(
                "similarity scale must be positive, got {t}"
            )));
        }
        let z = d.map(|v| (-t * v).exp());
        Ok(Self { z, t })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }
}

/// A weighting for a similarity matrix, together with its magnitude.
#[derive(Debug, Clone)]
pub struct Weighting {
    /// Solution of `Z w = 1`. Entries may be negative.
    pub w: DVector<f64>,
    /// Sum of the weights.
    pub magnitude: f64,
}

/// Ordered landmark selection over a candidate corpus.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    /// Selected candidate indices, in selection order.
    pub indices: Vec<usize>,
    /// Pairwise distances of the full candidate corpus.
    pub dist: DMatrix<f64>,
}

/// How `select_landmarks` scores the next candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandmarkStrategy {
    /// Add the candidate maximizing the magnitude of the augmented subset.
    MagnitudeGreedy,
    /// Add the candidate maximizing the minimum distance to the selection.
    MaxMin,
}

/// Numbers of the nearest landmarks, nearest first. Landmarks are numbered
/// from 1 in selection order. Orders lexicographically, so it can key
/// ordered maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey(pub Vec<u32>);

fn validate_distance_matrix(d: &DMatrix<f64>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::Parameter(format!(
            "distance matrix must be square, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(Error::Parameter(format!(
                "distance matrix diagonal must be zero, got {} at {i}",
                d[(i, i)]
            )));
        }
        for j in 0..n {
            let v = d[(i, j)];
            if !(v >= 0.0) {
                return Err(Error::Parameter(format!(
                    "distance matrix entries must be nonnegative, got {v} at ({i},{j})"
                )));
            }
            let w = d[(j, i)];
            let diff = (v - w).abs();
            if diff.is_nan() && v.is_infinite() && w.is_infinite() {
                continue;
            }
            if diff > 1e-9 * (1.0 + v.abs().min(w.abs())) {
                return Err(Error::Parameter(format!(
                    "distance matrix must be symmetric, {v} vs {w} at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Solves `z_solve w = 1` and accepts the solution only if it also satisfies
/// the original system `z_check w = 1` within tolerance.
fn solve_unit_rhs(z_solve: &DMatrix<f64>, z_check: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = z_solve.nrows();
    let ones = DVector::from_element(n, 1.0);
    let w = z_solve.clone().lu().solve(&ones)?;
    if !w.iter().all(|v| v.is_finite()) {
        return None;
    }
    let residual = (z_check * &w - &ones).abs().max();
    (residual < WEIGHTING_RESIDUAL_TOL).then_some(w)
}

/// Solves `Z w = 1` for `Z = exp(-t D)` and returns the weighting and its
/// magnitude. A failed solve is retried once with a small ridge added to the
/// diagonal; if that also fails the call errors and the caller decides on a
/// fallback.
pub fn magnitude_weighting(d: &DMatrix<f64>, t: f64) -> Result<Weighting> {
    let sim = SimilarityMatrix::from_distances(d, t)?;
    weighting_of_similarity(&sim.z)
}

fn weighting_of_similarity(z: &DMatrix<f64>) -> Result<Weighting> {
    let n = z.nrows();
    if n == 0 {
        return Err(Error::Parameter("empty similarity matrix".into()));
    }
    if let Some(w) = solve_unit_rhs(z, z) {
        let magnitude = w.sum();
        return Ok(Weighting { w, magnitude });
    }
    let lambda = RIDGE_FACTOR * z.trace() / n as f64;
    let ridged = z + DMatrix::from_diagonal_element(n, n, lambda);
    match solve_unit_rhs(&ridged, z) {
        Some(w) => {
            let magnitude = w.sum();
            Ok(Weighting { w, magnitude })
        }
        None => Err(Error::Numerical(format!(
            "similarity matrix of size {n} is unrecoverably singular"
        ))),
    }
}

/// Diversity of order `q` of the distribution `p` on a similarity space.
///
/// For `q = 1` this is the exponential of the similarity-aware Shannon
/// entropy; the general branch is the power mean formula.
pub fn diversity_order_q(sim: &SimilarityMatrix, p: &DVector<f64>, q: f64) -> Result<f64> {
    let n = sim.len();
    if p.len() != n {
        return Err(Error::Parameter(format!(
            "distribution length {} does not match similarity size {n}",
            p.len()
        )));
    }
    if !(q >= 0.0) {
        return Err(Error::Parameter(format!(
            "diversity order must be nonnegative, got {q}"
        )));
    }
    if p.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Parameter("distribution has negative entries".into()));
    }
    let total: f64 = p.sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!(
            "distribution sums to {total}, expected 1"
        )));
    }
    let zp = &sim.z * p;
    for i in 0..n {
        if p[i] > 0.0 && zp[i] <= 0.0 {
            return Err(Error::Numerical(format!(
                "similarity-weighted mass vanished at supported index {i}"
            )));
        }
    }
    if q == 1.0 {
        let mut acc = 0.0;
        for i in 0..n {
            if p[i] > 0.0 {
                acc += p[i] * zp[i].ln();
            }
        }
        Ok((-acc).exp())
    } else {
        let mut acc = 0.0;
        for i in 0..n {
            if p[i] > 0.0 {
                acc += p[i] * zp[i].powf(q - 1.0);
            }
        }
        Ok(acc.powf(1.0 / (1.0 - q)))
    }
}

/// Default similarity scale for a distance matrix: the reciprocal of the
/// median positive finite entry. Falls back to 1 when every pair coincides.
pub fn default_scale(d: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d[(i, j)];
            if v > 0.0 && v.is_finite() {
                entries.push(v);
            }
        }
    }
    if entries.is_empty() {
        log::warn!("no positive finite distances; using unit similarity scale");
        return 1.0;
    }
    entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = entries.len() / 2;
    let median = if entries.len() % 2 == 1 {
        entries[mid]
    } else {
        0.5 * (entries[mid - 1] + entries[mid])
    };
    1.0 / median
}

fn magnitude_of_subset(d: &DMatrix<f64>, subset: &[usize], t: f64) -> Result<f64> {
    let m = subset.len();
    let mut sub = DMatrix::zeros(m, m);
    for (a, &i) in subset.iter().enumerate() {
        for (b, &j) in subset.iter().enumerate() {
            sub[(a, b)] = d[(i, j)];
        }
    }
    Ok(magnitude_weighting(&sub, t)?.magnitude)
}

/// Selects up to `k` landmarks from a candidate corpus.
///
/// Selection starts from a farthest pair (ties to the smallest index pair)
/// and then repeatedly adds the candidate that maximizes the chosen score,
/// with ties to the smallest index. Candidates at distance zero from an
/// earlier one count as the same point, so the result has
/// `min(k, distinct candidates)` entries.
pub fn select_landmarks(
    d: &DMatrix<f64>,
    k: usize,
    t: f64,
    strategy: LandmarkStrategy,
) -> Result<LandmarkSet> {
    validate_distance_matrix(d)?;
    let n = d.nrows();
    if n == 0 {
        return Err(Error::Parameter("no candidates to select from".into()));
    }
    if k < 2 {
        return Err(Error::Parameter(format!(
            "at least 2 landmarks must be requested, got {k}"
        )));
    }
    // One representative per zero-distance class, smallest index first.
    let mut reps: Vec<usize> = Vec::new();
    'candidates: for i in 0..n {
        for &r in &reps {
            if d[(i, r)] == 0.0 {
                continue 'candidates;
            }
        }
        reps.push(i);
    }
    if reps.len() == 1 {
        log::warn!("all candidates coincide; selecting a single landmark");
        return Ok(LandmarkSet {
            indices: reps,
            dist: d.clone(),
        });
    }

    let mut best = f64::NEG_INFINITY;
    let mut pair = (reps[0], reps[1]);
    for (a, &i) in reps.iter().enumerate() {
        for &j in reps[a + 1..].iter() {
            if d[(i, j)] > best {
                best = d[(i, j)];
                pair = (i, j);
            }
        }
    }
    let mut selected = vec![pair.0, pair.1];
    let target = k.min(reps.len());
    while selected.len() < target {
        let mut best_score = f64::NEG_INFINITY;
        let mut best_idx = None;
        for &c in &reps {
            if selected.contains(&c) {
                continue;
            }
            let score = match strategy {
                LandmarkStrategy::MagnitudeGreedy => {
                    let mut augmented = selected.clone();
                    augmented.push(c);
                    magnitude_of_subset(d, &augmented, t).unwrap_or(f64::NEG_INFINITY)
                }
                LandmarkStrategy::MaxMin => selected
                    .iter()
                    .map(|&s| d[(c, s)])
                    .fold(f64::INFINITY, f64::min),
            };
            if score > best_score {
                best_score = score;
                best_idx = Some(c);
            }
        }
        match best_idx {
            Some(c) => selected.push(c),
            None => {
                return Err(Error::Numerical(
                    "no remaining candidate could be scored".into(),
                ))
            }
        }
    }
    Ok(LandmarkSet {
        indices: selected,
        dist: d.clone(),
    })
}

/// Key of the cell a point falls into: the indices of its `m` nearest
/// landmarks in ascending order of distance, ties to the smaller index.
pub fn cell_key(d_to_landmarks: &[f64], m: usize) -> Result<CellKey> {
    if d_to_landmarks.is_empty() {
        return Err(Error::Parameter("no landmarks to rank against".into()));
    }
    if m == 0 || m > d_to_landmarks.len() {
        return Err(Error::Parameter(format!(
            "cell resolution {m} out of range for {} landmarks",
            d_to_landmarks.len()
        )));
    }
    if d_to_landmarks.iter().any(|v| v.is_nan()) {
        return Err(Error::Parameter("landmark distance is NaN".into()));
    }
    let mut order: Vec<usize> = (0..d_to_landmarks.len()).collect();
    order.sort_by(|&a, &b| {
        d_to_landmarks[a]
            .partial_cmp(&d_to_landmarks[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(CellKey(order[..m].iter().map(|&i| i as u32 + 1).collect()))
}
