//! Lifts of a vertex metric to dissimilarities between whole execution
//! paths.
//!
//! Two lifts are provided. The Hausdorff lift compares the vertex sets two
//! paths touch; it is cheap, ignores ordering, and inherits the triangle
//! inequality from the vertex metric. The edit lift aligns the vertex
//! sequences with substitution cost taken from the vertex metric and a flat
//! insertion/deletion cost, which is sensitive to ordering and repetition.
//! Long loop repetitions are compressed before the edit lift so the
//! alignment table stays small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::MetricMatrix;
use crate::toylang::Trace;

/// Repetition cap applied when compressing cyclic runs in a sequence.
pub const CYCLE_REPEAT_CAP: usize = 3;
/// Longest cycle period considered during compression.
pub const MAX_CYCLE_PERIOD: usize = 32;

/// Which lift turns the vertex metric into a path dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftKind {
    Hausdorff,
    Edit,
}

/// Configuration of the path dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDissimilarityConfig {
    pub kind: LiftKind,
    /// Insertion/deletion cost for the edit lift. `None` selects half the
    /// largest finite entry of the current vertex metric.
    pub indel: Option<f64>,
}

impl Default for PathDissimilarityConfig {
    fn default() -> Self {
        Self {
            kind: LiftKind::Hausdorff,
            indel: None,
        }
    }
}

/// Half the largest finite entry of the vertex metric, the default
/// insertion/deletion cost. Keeps single substitutions competitive with
/// delete-plus-insert pairs.
pub fn default_indel_cost(metric: &MetricMatrix) -> f64 {
    let mut max = 0.0f64;
    for v in metric.dist.iter() {
        if v.is_finite() && *v > max {
            max = *v;
        }
    }
    0.5 * max
}

fn check_vertex(metric: &MetricMatrix, v: u32) -> Result<()> {
    if (v as usize) < metric.len() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "vertex {v} outside metric of size {}",
            metric.len()
        )))
    }
}

/// Hausdorff distance between the vertex sets of two paths.
pub fn hausdorff_lift(metric: &MetricMatrix, a: &Trace, b: &Trace) -> Result<f64> {
    hausdorff_lift_sets(metric, &a.vertex_set(), &b.vertex_set())
}

/// Hausdorff distance between two precomputed vertex sets.
pub fn hausdorff_lift_sets(metric: &MetricMatrix, sa: &[u32], sb: &[u32]) -> Result<f64> {
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::Input("empty trace has no vertex set".into()));
    }
    for &v in sa.iter().chain(sb.iter()) {
        check_vertex(metric, v)?;
    }
    let one_sided = |from: &[u32], to: &[u32]| -> f64 {
        from.iter()
            .map(|&x| {
                to.iter()
                    .map(|&y| metric.get(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(one_sided(sa, sb).max(one_sided(sb, sa)))
}

/// Alignment distance between two vertex sequences: substitution costs come
/// from the vertex metric and every insertion or deletion costs `c`.
pub fn edit_lift(metric: &MetricMatrix, a: &[u32], b: &[u32], c: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("empty trace cannot be aligned".into()));
    }
    if !(c >= 0.0) {
        return Err(Error::Parameter(format!(
            "insertion/deletion cost must be nonnegative, got {c}"
        )));
    }
    for &v in a.iter().chain(b.iter()) {
        check_vertex(metric, v)?;
    }
    let m = a.len();
    let n = b.len();
    let mut dp = vec![0.0f64; (m + 1) * (n + 1)];
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    for i in 0..=m {
        dp[idx(i, 0)] = i as f64 * c;
    }
    for j in 0..=n {
        dp[idx(0, j)] = j as f64 * c;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = dp[idx(i - 1, j - 1)] + metric.get(a[i - 1], b[j - 1]);
            let del = dp[idx(i - 1, j)] + c;
            let ins = dp[idx(i, j - 1)] + c;
            dp[idx(i, j)] = sub.min(del.min(ins));
        }
    }
    Ok(dp[idx(m, n)])
}

/// Truncates periodic runs in a sequence to at most `max_repeats` copies of
/// the repeating block. Shorter periods win when runs overlap, and runs
/// within the cap pass through unchanged. Compression repeats until nothing
/// changes: truncating an inner loop can expose an outer repetition (a loop
/// of loops), and every pass strictly shortens the sequence, so the fixpoint
/// is reached quickly and the result is idempotent.
pub fn compress_cycles(seq: &[u32], max_repeats: usize, max_period: usize) -> Vec<u32> {
    if max_repeats == 0 {
        return seq.to_vec();
    }
    let mut current = seq.to_vec();
    loop {
        let compressed = compress_cycles_once(&current, max_repeats, max_period);
        if compressed.len() == current.len() {
            return compressed;
        }
        current = compressed;
    }
}

fn compress_cycles_once(seq: &[u32], max_repeats: usize, max_period: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        let mut advanced = false;
        let longest = max_period.min((seq.len() - i) / 2);
        for p in 1..=longest {
            let mut reps = 1;
            while i + (reps + 1) * p <= seq.len()
                && seq[i..i + p] == seq[i + reps * p..i + (reps + 1) * p]
            {
                reps += 1;
            }
            if reps > max_repeats {
                for _ in 0..max_repeats {
                    out.extend_from_slice(&seq[i..i + p]);
                }
                i += reps * p;
                advanced = true;
                break;
            }
        }
        if !advanced {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

/// Dissimilarity between two traces under the configured lift. The edit
/// lift sees cycle-compressed sequences so nested loop bodies cannot blow
/// up the alignment table.
pub fn trace_dissimilarity(
    metric: &MetricMatrix,
    config: &PathDissimilarityConfig,
    a: &Trace,
    b: &Trace,
) -> Result<f64> {
    match config.kind {
        LiftKind::Hausdorff => hausdorff_lift(metric, a, b),
        LiftKind::Edit => {
            let c = config.indel.unwrap_or_else(|| default_indel_cost(metric));
            let ca = compress_cycles(&a.0, CYCLE_REPEAT_CAP, MAX_CYCLE_PERIOD);
            let cb = compress_cycles(&b.0, CYCLE_REPEAT_CAP, MAX_CYCLE_PERIOD);
            edit_lift(metric, &ca, &cb, c)
        }
    }
}
