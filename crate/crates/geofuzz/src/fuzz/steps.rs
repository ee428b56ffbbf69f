//! The individual operations of one fuzzing batch.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{
    landmark_distances, lift_distance, CampaignState, Elite, Schedule, ESCAPE_RATE_HI,
    ESCAPE_RATE_LO,
};
use crate::diversity::{cell_key, default_scale, magnitude_weighting, CellKey, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::objectives::path_objective;
use crate::toylang::{atomic_mutate, input_distance, InputVec, Trace};

/// Probability of picking each elite cell for the next batch: a convex mix
/// of the archive's magnitude weighting (diversity) and the min-max
/// normalized objective values. Returned in cell order.
pub fn go_distribution(state: &mut CampaignState) -> Result<Vec<(CellKey, f64)>> {
    let n = state.archive.elites.len();
    if n == 0 {
        return Err(Error::State("archive is empty".into()));
    }
    let cells: Vec<CellKey> = state.archive.elites.keys().cloned().collect();
    if n == 1 {
        return Ok(vec![(cells[0].clone(), 1.0)]);
    }

    let mut d = DMatrix::zeros(n, n);
    {
        let elites: Vec<&Elite> = state.archive.elites.values().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = lift_distance(
                    &state.geometry,
                    &state.config.lift,
                    &mut state.dist_cache,
                    &elites[i].trace,
                    &elites[j].trace,
                )?;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
    }
    let t = state.config.scale.unwrap_or_else(|| default_scale(&d));

    let uniform = vec![1.0 / n as f64; n];
    let w_hat = match magnitude_weighting(&d, t) {
        Ok(weighting) => {
            let clamped: Vec<f64> = weighting.w.iter().map(|&v| v.max(0.0)).collect();
            let sum: f64 = clamped.iter().sum();
            if sum > 0.0 {
                clamped.iter().map(|v| v / sum).collect()
            } else {
                uniform.clone()
            }
        }
        Err(e) => {
            log::warn!("magnitude weighting failed, selecting uniformly: {e}");
            uniform.clone()
        }
    };

    let phis: Vec<f64> = state.archive.elites.values().map(|e| e.phi).collect();
    let lo = phis.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = phis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let q_hat = if hi - lo > 0.0 {
        let raw: Vec<f64> = phis.iter().map(|&p| (p - lo) / (hi - lo)).collect();
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|v| v / sum).collect()
    } else {
        uniform
    };

    let alpha = state.config.alpha;
    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(i, cell)| (cell, alpha * w_hat[i] + (1.0 - alpha) * q_hat[i]))
        .collect())
}

/// Samples an elite cell from the go distribution.
pub fn go_select(state: &mut CampaignState) -> Result<CellKey> {
    let dist = go_distribution(state)?;
    let draw: f64 = state.rng.random();
    let mut acc = 0.0;
    for (cell, p) in &dist {
        acc += p;
        if draw < acc {
            return Ok(cell.clone());
        }
    }
    Ok(dist.last().expect("distribution is nonempty").0.clone())
}

/// Shannon cross entropy `-sum_i p_i ln q_i` over the support of `p`. Both
/// entropy-based schedules reduce to this with different `q`, which is what
/// makes them comparable term by term.
pub fn cross_entropy_energy(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            acc -= pi * qi.ln();
        }
    }
    acc
}

/// Similarity matrix over species representatives under the current
/// geometry, or the identity when the diagnostic switch is set.
fn species_similarity(state: &mut CampaignState) -> Result<DMatrix<f64>> {
    let s = state.species.len();
    if state.config.simtropic_identity {
        return Ok(DMatrix::identity(s, s));
    }
    let reps = state.species.representatives().to_vec();
    let mut d = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in (i + 1)..s {
            let v = lift_distance(
                &state.geometry,
                &state.config.lift,
                &mut state.dist_cache,
                &reps[i],
                &reps[j],
            )?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let t = state.config.scale.unwrap_or_else(|| default_scale(&d));
    Ok(SimilarityMatrix::from_distances(&d, t)?.z)
}

/// Energies of every elite with offspring history, keyed by cell. The
/// species histogram is smoothed by adding one to every species observed
/// globally, so new species still count.
fn schedule_energies(state: &mut CampaignState) -> Result<BTreeMap<CellKey, f64>> {
    let s_total = state.species.len();
    if s_total == 0 {
        return Ok(BTreeMap::new());
    }
    let z = match state.config.schedule {
        Schedule::Simtropic => Some(species_similarity(state)?),
        _ => None,
    };
    let mut energies = BTreeMap::new();
    let hist: Vec<(CellKey, Vec<f64>)> = state
        .archive
        .elites
        .iter()
        .filter(|(_, e)| !e.species_counts.is_empty())
        .map(|(cell, e)| {
            let total: u64 = e.species_counts.values().sum();
            let denom = total as f64 + s_total as f64;
            let p: Vec<f64> = (0..s_total as u32)
                .map(|id| (e.species_counts.get(&id).copied().unwrap_or(0) as f64 + 1.0) / denom)
                .collect();
            (cell.clone(), p)
        })
        .collect();
    for (cell, p) in hist {
        let q: Vec<f64> = match &z {
            None => p.clone(),
            Some(z) => {
                let zp = z * DVector::from_column_slice(&p);
                if zp.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Numerical(
                        "species similarity maps the histogram outside the positive cone".into(),
                    ));
                }
                zp.iter().cloned().collect()
            }
        };
        energies.insert(cell, cross_entropy_energy(&p, &q));
    }
    Ok(energies)
}

/// Number of mutants for the next batch of the given elite.
pub fn power_schedule(state: &mut CampaignState, parent_cell: &CellKey) -> Result<u32> {
    let m_max = state.config.power_bound;
    match state.config.schedule {
        Schedule::Default => Ok(state.rng.random_range(1..=m_max)),
        Schedule::Entropic | Schedule::Simtropic => {
            let has_history = !state
                .archive
                .elites
                .get(parent_cell)
                .ok_or_else(|| Error::State("schedule asked about an unknown cell".into()))?
                .species_counts
                .is_empty();
            if !has_history {
                return Ok(m_max);
            }
            let energies = schedule_energies(state)?;
            let h = *energies
                .get(parent_cell)
                .ok_or_else(|| Error::State("elite with history lost its energy".into()))?;
            let h_max = energies.values().cloned().fold(f64::NEG_INFINITY, f64::max);
            if h_max <= 0.0 {
                return Ok(1);
            }
            let scaled = (m_max as f64 * h / h_max).round() as i64;
            Ok(scaled.clamp(1, m_max as i64) as u32)
        }
    }
}

/// Generates `count` mutants, each `bandwidth` sequential atomic mutations
/// away from the input (fewer substitutions may survive, since later
/// mutations can overwrite earlier ones).
pub fn mutate_batch<R: Rng>(
    rng: &mut R,
    input: &InputVec,
    bandwidth: u32,
    count: u32,
    alphabet: u32,
) -> Vec<InputVec> {
    (0..count)
        .map(|_| {
            let mut mutant = input.clone();
            for _ in 0..bandwidth {
                mutant = atomic_mutate(rng, &mutant, alphabet);
            }
            mutant
        })
        .collect()
}

/// Flags for each score pair whether no other pair dominates it (dominates
/// means at least as good in both coordinates and strictly better in one).
/// Mutually equal points do not dominate each other, so all are kept.
pub fn pareto_nondominated(scores: &[(f64, f64)]) -> Vec<bool> {
    let dominates = |a: (f64, f64), b: (f64, f64)| {
        a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
    };
    (0..scores.len())
        .map(|i| {
            !scores
                .iter()
                .enumerate()
                .any(|(j, &s)| j != i && dominates(s, scores[i]))
        })
        .collect()
}

/// Keeps the mutants on the Pareto front of (distance to the nearest elite,
/// distance to the nearest other mutant), both Hamming. Batches of at most
/// one mutant pass through unchanged.
pub fn pareto_filter(mutants: Vec<InputVec>, elites: &[InputVec]) -> Result<Vec<InputVec>> {
    if mutants.len() <= 1 {
        return Ok(mutants);
    }
    let mut scores = Vec::with_capacity(mutants.len());
    for (i, m) in mutants.iter().enumerate() {
        let mut s1 = f64::INFINITY;
        for e in elites {
            s1 = s1.min(input_distance(m, e)? as f64);
        }
        let mut s2 = f64::INFINITY;
        for (j, other) in mutants.iter().enumerate() {
            if j != i {
                s2 = s2.min(input_distance(m, other)? as f64);
            }
        }
        scores.push((s1, s2));
    }
    let keep = pareto_nondominated(&scores);
    Ok(mutants
        .into_iter()
        .zip(keep)
        .filter_map(|(m, k)| k.then_some(m))
        .collect())
}

/// Next mutation bandwidth given the batch's escape rate: halve when nearly
/// everything escapes the parent's cell, widen by one when almost nothing
/// does. With adaptation off the bandwidth is pinned to 1.
pub fn next_bandwidth(current: u32, escapes: u32, batch: u32, bound: u32, adapt: bool) -> u32 {
    if !adapt {
        return 1;
    }
    if batch == 0 {
        return current.clamp(1, bound);
    }
    let rate = escapes as f64 / batch as f64;
    let next = if rate > ESCAPE_RATE_HI {
        (current / 2).max(1)
    } else if rate < ESCAPE_RATE_LO {
        (current + 1).min(bound)
    } else {
        current
    };
    next.clamp(1, bound)
}

/// Folds executed offspring into the state, in order: counts and coverage,
/// cell assignment, species bookkeeping on the parent, and archive
/// insertion (a cell's incumbent is replaced only by a strictly better
/// objective value and keeps the cell's bandwidth). Returns how many
/// offspring escaped the parent's cell.
pub fn assimilate(
    state: &mut CampaignState,
    parent_cell: &CellKey,
    parent_id: u64,
    parent_bandwidth: u32,
    offspring: Vec<(InputVec, Trace)>,
) -> Result<u32> {
    let mut escapes = 0u32;
    for (input, trace) in offspring {
        state.evaluations += 1;
        state.edge_counts.add_trace(&trace);
        for w in trace.0.windows(2) {
            state.archive.covered.insert((w[0], w[1]));
        }
        let prepared = state.prepare_trace(trace);
        let dists = landmark_distances(
            &state.geometry,
            &state.config.lift,
            &mut state.dist_cache,
            &prepared,
        )?;
        let cell = cell_key(&dists, state.config.cell_resolution)?;
        let phi = path_objective(&prepared.trace.0, &state.geometry.potentials);
        let species_id = state.species.register(&cell, &prepared);
        if cell != *parent_cell {
            escapes += 1;
        }
        if let Some(parent) = state.archive.elites.get_mut(parent_cell) {
            if parent.id == parent_id {
                *parent.species_counts.entry(species_id).or_insert(0) += 1;
            }
        }
        let candidate = Elite {
            id: prepared.id,
            input,
            trace: prepared,
            phi,
            cell: cell.clone(),
            bandwidth: parent_bandwidth,
            species_counts: BTreeMap::new(),
            last_batch: None,
        };
        match state.archive.elites.entry(cell) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(candidate);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if candidate.phi > o.get().phi {
                    let incumbent_bandwidth = o.get().bandwidth;
                    let mut replacement = candidate;
                    replacement.bandwidth = incumbent_bandwidth;
                    o.insert(replacement);
                }
            }
        }
        state.coverage_curve.push(state.archive.covered_count());
    }
    Ok(escapes)
}
