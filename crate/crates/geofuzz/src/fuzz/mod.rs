//! The go-explore fuzzing loop.
//!
//! A campaign keeps an archive with at most one elite input per cell of a
//! discretized path space. Each batch samples an elite from the go
//! distribution, draws a power from the schedule, mutates the elite that
//! many times within its mutation bandwidth, executes the mutants, and
//! assimilates the offspring into the archive. The geometry behind all of
//! this (the empirical chain, the vertex metric, the objective potentials,
//! and the landmark discretization) is refreshed on a fixed evaluation
//! cadence because the observed edge counts keep changing it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::diversity::CellKey;
use crate::error::{Error, Result};
use crate::markov::{
    entry_hop_distances, estimate_chain, hitting_prob_metric, EdgeCounts, MarkovChain,
    MetricMatrix, DEFAULT_BETA, DEFAULT_EPSILON,
};
use crate::objectives::{
    drawing_depth_layers, path_objective, vertex_potential, ObjectiveGeometry, ObjectiveKind,
};
use crate::path_space::{
    compress_cycles, default_indel_cost, edit_lift, hausdorff_lift_sets, LiftKind,
    PathDissimilarityConfig, CYCLE_REPEAT_CAP, MAX_CYCLE_PERIOD,
};
use crate::toylang::{InputVec, ToyProgram, Trace};

mod steps;
pub use steps::{
    assimilate, cross_entropy_energy, go_distribution, go_select, mutate_batch, next_bandwidth,
    pareto_filter, pareto_nondominated, power_schedule,
};

/// Default evaluation budget of a campaign.
pub const DEFAULT_BUDGET: u64 = 1000;
/// Default bound on the power schedule.
pub const DEFAULT_POWER_BOUND: u32 = 16;
/// Default geometry refresh cadence in evaluations.
pub const DEFAULT_REFRESH_EVERY: u64 = 50;
/// Default mix between diversity weight and objective rank in go selection.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Escape-rate thresholds of the bandwidth controller.
pub const ESCAPE_RATE_LO: f64 = 0.1;
pub const ESCAPE_RATE_HI: f64 = 0.9;

/// Power schedule choices. `Default` draws uniformly from `[1, m_max]`;
/// `Entropic` scales the bound by the elite's species entropy; `Simtropic`
/// replaces that entropy with a similarity-sensitive diversity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Default,
    Entropic,
    Simtropic,
}

/// Everything a campaign needs beyond the program and the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Total number of program evaluations to spend.
    pub budget: u64,
    /// Upper bound on the per-batch mutant count.
    pub power_bound: u32,
    pub schedule: Schedule,
    pub objective: ObjectiveKind,
    /// Mix in the go distribution: `alpha` on diversity weights, the rest on
    /// min-max-normalized objective values.
    pub alpha: f64,
    pub bandwidth_adapt: bool,
    pub pareto_filter: bool,
    /// Refresh the geometry after every this many evaluations.
    pub refresh_every: u64,
    /// Number of nearest landmarks forming a cell key.
    pub cell_resolution: usize,
    /// Largest allowed mutation bandwidth; defaults to the input length.
    pub bandwidth_max: Option<u32>,
    /// Survival parameter of the hitting-probability metric.
    pub beta: f64,
    /// Smoothing mass for unobserved structural edges.
    pub epsilon: f64,
    /// Similarity scale; defaults to the reciprocal median distance.
    pub scale: Option<f64>,
    pub lift: PathDissimilarityConfig,
    pub seed: u64,
    /// Diagnostic switch: force the species similarity to the identity so
    /// `Simtropic` must reproduce `Entropic` exactly.
    pub simtropic_identity: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            power_bound: DEFAULT_POWER_BOUND,
            schedule: Schedule::Entropic,
            objective: ObjectiveKind::HitProbFromEntry,
            alpha: DEFAULT_ALPHA,
            bandwidth_adapt: true,
            pareto_filter: false,
            refresh_every: DEFAULT_REFRESH_EVERY,
            cell_resolution: 2,
            bandwidth_max: None,
            beta: DEFAULT_BETA,
            epsilon: DEFAULT_EPSILON,
            scale: None,
            lift: PathDissimilarityConfig::default(),
            seed: 0,
            simtropic_identity: false,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.power_bound < 1 {
            return Err(Error::Parameter("power bound must be at least 1".into()));
        }
        if self.refresh_every < 1 {
            return Err(Error::Parameter("refresh cadence must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!(
                "go mix must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.cell_resolution < 1 {
            return Err(Error::Parameter("cell resolution must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Parameter(format!(
                "survival parameter must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "smoothing mass must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(s) = self.scale {
            if !(s > 0.0) {
                return Err(Error::Parameter(format!(
                    "similarity scale must be positive, got {s}"
                )));
            }
        }
        if let Some(b) = self.bandwidth_max {
            if b < 1 {
                return Err(Error::Parameter("bandwidth bound must be at least 1".into()));
            }
        }
        if let Some(c) = self.lift.indel {
            if !(c >= 0.0) {
                return Err(Error::Parameter(format!(
                    "insertion/deletion cost must be nonnegative, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// A precomputed initial corpus: inputs, their traces, and which of them
/// serve as landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub inputs: Vec<InputVec>,
    pub traces: Vec<Trace>,
    pub landmark_indices: Vec<usize>,
}

impl Corpus {
    pub fn validate(&self, program: &ToyProgram) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Parameter("corpus has no inputs".into()));
        }
        if self.inputs.len() != self.traces.len() {
            return Err(Error::Parameter(format!(
                "corpus has {} inputs but {} traces",
                self.inputs.len(),
                self.traces.len()
            )));
        }
        if self.landmark_indices.is_empty() {
            return Err(Error::Parameter("corpus names no landmarks".into()));
        }
        for &i in &self.landmark_indices {
            if i >= self.inputs.len() {
                return Err(Error::Parameter(format!(
                    "landmark index {i} outside corpus of {}",
                    self.inputs.len()
                )));
            }
        }
        for (i, input) in self.inputs.iter().enumerate() {
            if input.0.len() != program.input_len {
                return Err(Error::Input(format!(
                    "corpus input {i} has length {}, program reads {}",
                    input.0.len(),
                    program.input_len
                )));
            }
            if input.0.iter().any(|&v| v < 1 || v > program.alphabet) {
                return Err(Error::Input(format!(
                    "corpus input {i} leaves the alphabet 1..={}",
                    program.alphabet
                )));
            }
        }
        for (i, trace) in self.traces.iter().enumerate() {
            program.cfg.validate_trace(trace).map_err(|e| {
                Error::Input(format!("corpus trace {i} does not fit the program: {e}"))
            })?;
        }
        Ok(())
    }
}

/// A trace with its derived views precomputed: the sorted vertex set for the
/// Hausdorff lift and the cycle-compressed sequence for the edit lift. The
/// id is unique per prepared trace and keys the distance cache.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrace {
    pub id: u64,
    pub trace: Trace,
    pub vset: Vec<u32>,
    pub compressed: Vec<u32>,
}

impl PreparedTrace {
    fn new(id: u64, trace: Trace) -> Self {
        let vset = trace.vertex_set();
        let compressed = compress_cycles(&trace.0, CYCLE_REPEAT_CAP, MAX_CYCLE_PERIOD);
        Self {
            id,
            trace,
            vset,
            compressed,
        }
    }
}

/// One elite input, the best seen so far in its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub id: u64,
    pub input: InputVec,
    pub trace: PreparedTrace,
    /// Objective value of the trace under the current potentials.
    pub phi: f64,
    pub cell: CellKey,
    /// Number of atomic mutations applied per mutant.
    pub bandwidth: u32,
    /// Offspring species histogram, keyed by global species id.
    pub species_counts: BTreeMap<u32, u64>,
    /// (batch size, escapes) of the elite's most recent batch.
    pub last_batch: Option<(u32, u32)>,
}

/// The archive of elites plus the edge coverage bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub elites: BTreeMap<CellKey, Elite>,
    pub covered: BTreeSet<(u32, u32)>,
    /// Total structural edge count, including the exit-to-entry edge.
    pub structural_edges: u32,
}

impl Archive {
    pub fn covered_count(&self) -> u32 {
        self.covered.len() as u32
    }

    /// Edges that executions can actually traverse: every structural edge
    /// except the synthetic exit-to-entry edge.
    pub fn coverage_denominator(&self) -> u32 {
        self.structural_edges.saturating_sub(1)
    }
}

/// Registry of every species (offspring cell) ever observed, with a
/// representative trace per species. Ids are never reassigned, so the
/// histogram axis stays stable across geometry refreshes.
#[derive(Debug, Clone, Default)]
pub struct SpeciesRegistry {
    ids: BTreeMap<CellKey, u32>,
    reps: Vec<PreparedTrace>,
}

impl SpeciesRegistry {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    fn register(&mut self, cell: &CellKey, rep: &PreparedTrace) -> u32 {
        if let Some(&id) = self.ids.get(cell) {
            return id;
        }
        let id = self.reps.len() as u32;
        self.ids.insert(cell.clone(), id);
        self.reps.push(rep.clone());
        id
    }

    pub(crate) fn representatives(&self) -> &[PreparedTrace] {
        &self.reps
    }
}

/// Immutable snapshot of everything derived from the accumulated edge
/// counts: the chain, the vertex metric, the objective potentials, and the
/// landmark traces that discretize path space.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySnapshot {
    pub chain: MarkovChain,
    pub metric: MetricMatrix,
    pub potentials: Vec<f64>,
    pub entry_hops: Vec<u32>,
    pub depth_layers: Vec<u32>,
    pub landmarks: Vec<PreparedTrace>,
    /// Effective insertion/deletion cost under this metric.
    pub indel_cost: f64,
    pub version: u64,
}

/// One line of the per-batch log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRecord {
    pub index: u32,
    pub parent_cell: CellKey,
    pub parent_id: u64,
    pub power: u32,
    /// Mutants surviving the Pareto filter.
    pub kept: u32,
    /// Mutants actually executed after budget truncation.
    pub executed: u32,
    pub escapes: u32,
    pub bandwidth_after: u32,
    pub evaluations: u64,
    pub covered: u32,
}

/// Mutable state of a running campaign.
#[derive(Debug, Clone)]
pub struct CampaignState {
    pub config: CampaignConfig,
    pub archive: Archive,
    pub edge_counts: EdgeCounts,
    pub evaluations: u64,
    pub geometry: GeometrySnapshot,
    /// Covered-edge count after each evaluation.
    pub coverage_curve: Vec<u32>,
    pub batch_log: Vec<BatchRecord>,
    pub species: SpeciesRegistry,
    pub(crate) rng: ChaCha20Rng,
    pub(crate) bandwidth_max: u32,
    next_trace_id: u64,
    dist_cache: HashMap<(u64, u64), f64>,
}

impl CampaignState {
    fn prepare_trace(&mut self, trace: Trace) -> PreparedTrace {
        let id = self.next_trace_id;
        self.next_trace_id += 1;
        PreparedTrace::new(id, trace)
    }
}

/// Result of a finished campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub coverage_curve: Vec<u32>,
    pub archive: Archive,
    pub evaluations: u64,
    pub batch_log: Vec<BatchRecord>,
}

/// Path dissimilarity between two prepared traces under the snapshot's
/// metric, memoized by trace id pair.
pub(crate) fn lift_distance(
    geometry: &GeometrySnapshot,
    lift: &PathDissimilarityConfig,
    cache: &mut HashMap<(u64, u64), f64>,
    a: &PreparedTrace,
    b: &PreparedTrace,
) -> Result<f64> {
    if a.id == b.id {
        return Ok(0.0);
    }
    let key = (a.id.min(b.id), a.id.max(b.id));
    if let Some(&v) = cache.get(&key) {
        return Ok(v);
    }
    let v = match lift.kind {
        LiftKind::Hausdorff => hausdorff_lift_sets(&geometry.metric, &a.vset, &b.vset)?,
        LiftKind::Edit => edit_lift(
            &geometry.metric,
            &a.compressed,
            &b.compressed,
            geometry.indel_cost,
        )?,
    };
    cache.insert(key, v);
    Ok(v)
}

/// Distances from a trace to every landmark.
pub(crate) fn landmark_distances(
    geometry: &GeometrySnapshot,
    lift: &PathDissimilarityConfig,
    cache: &mut HashMap<(u64, u64), f64>,
    trace: &PreparedTrace,
) -> Result<Vec<f64>> {
    geometry
        .landmarks
        .iter()
        .map(|lm| lift_distance(geometry, lift, cache, trace, lm))
        .collect()
}

fn compute_geometry(
    program: &ToyProgram,
    counts: &EdgeCounts,
    config: &CampaignConfig,
    landmarks: Vec<PreparedTrace>,
    version: u64,
) -> Result<GeometrySnapshot> {
    let chain = estimate_chain(counts, &program.cfg.adjacency_matrix(), config.epsilon)?;
    let metric = hitting_prob_metric(&chain, config.beta)?;
    debug_assert!(
        metric.validate_metric_axioms(1e-7).is_ok(),
        "vertex metric lost its axioms"
    );
    let entry_hops = entry_hop_distances(&program.cfg);
    let depth_layers = drawing_depth_layers(&program.cfg);
    let inputs = ObjectiveGeometry {
        metric: Some(&metric),
        entry_hops: Some(&entry_hops),
        depth_layers: Some(&depth_layers),
    };
    let potentials = vertex_potential(
        config.objective,
        program.cfg.len(),
        program.cfg.entry(),
        &inputs,
    )?;
    let indel_cost = config
        .lift
        .indel
        .unwrap_or_else(|| default_indel_cost(&metric));
    Ok(GeometrySnapshot {
        chain,
        metric,
        potentials,
        entry_hops,
        depth_layers,
        landmarks,
        indel_cost,
        version,
    })
}

/// Seeds a campaign from a precomputed corpus without spending any budget:
/// edge counts and coverage come from the corpus traces, the geometry is
/// computed once, and each cell keeps its best corpus trace (first wins on
/// ties).
pub fn init_campaign(
    config: &CampaignConfig,
    program: &ToyProgram,
    corpus: &Corpus,
) -> Result<CampaignState> {
    config.validate()?;
    corpus.validate(program)?;
    if config.cell_resolution > corpus.landmark_indices.len() {
        return Err(Error::Parameter(format!(
            "cell resolution {} exceeds the {} landmarks",
            config.cell_resolution,
            corpus.landmark_indices.len()
        )));
    }

    let mut next_trace_id = 0u64;
    let prepared: Vec<PreparedTrace> = corpus
        .traces
        .iter()
        .map(|t| {
            let p = PreparedTrace::new(next_trace_id, t.clone());
            next_trace_id += 1;
            p
        })
        .collect();
    let landmarks: Vec<PreparedTrace> = corpus
        .landmark_indices
        .iter()
        .map(|&i| prepared[i].clone())
        .collect();

    let mut edge_counts = EdgeCounts::new(program.cfg.len());
    let mut covered = BTreeSet::new();
    for trace in &corpus.traces {
        edge_counts.add_trace(trace);
        for w in trace.0.windows(2) {
            covered.insert((w[0], w[1]));
        }
    }

    let geometry = compute_geometry(program, &edge_counts, config, landmarks, 0)?;
    let bandwidth_max = config
        .bandwidth_max
        .unwrap_or_else(|| (program.input_len as u32).max(1));

    let mut state = CampaignState {
        config: config.clone(),
        archive: Archive {
            elites: BTreeMap::new(),
            covered,
            structural_edges: program.cfg.edge_count() as u32,
        },
        edge_counts,
        evaluations: 0,
        geometry,
        coverage_curve: Vec::new(),
        batch_log: Vec::new(),
        species: SpeciesRegistry::default(),
        rng: ChaCha20Rng::seed_from_u64(config.seed),
        bandwidth_max,
        next_trace_id,
        dist_cache: HashMap::new(),
    };

    for (input, trace) in corpus.inputs.iter().zip(prepared) {
        let dists = landmark_distances(
            &state.geometry,
            &state.config.lift,
            &mut state.dist_cache,
            &trace,
        )?;
        let cell = crate::diversity::cell_key(&dists, state.config.cell_resolution)?;
        let phi = path_objective(&trace.trace.0, &state.geometry.potentials);
        let candidate = Elite {
            id: trace.id,
            input: input.clone(),
            trace,
            phi,
            cell: cell.clone(),
            bandwidth: 1,
            species_counts: BTreeMap::new(),
            last_batch: None,
        };
        match state.archive.elites.entry(cell) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(candidate);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if candidate.phi > o.get().phi {
                    o.insert(candidate);
                }
            }
        }
    }
    Ok(state)
}

/// Rebuilds the cell map after re-keying. Elites are ranked by objective
/// value (ties to the older id) and the best one claims each contested
/// cell; the rest are dropped, since a trace maps to exactly one cell.
fn rebuild_archive(mut elites: Vec<Elite>) -> BTreeMap<CellKey, Elite> {
    elites.sort_by(|a, b| {
        b.phi
            .partial_cmp(&a.phi)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    let mut map = BTreeMap::new();
    for e in elites {
        map.entry(e.cell.clone()).or_insert(e);
    }
    map
}

/// Recomputes the geometry from the accumulated edge counts and re-keys the
/// archive under it. A numerical failure keeps the previous geometry and
/// logs a warning; with no new executions since the last refresh this is a
/// no-op on the archive.
pub fn refresh_geometry(state: &mut CampaignState, program: &ToyProgram) -> Result<()> {
    let landmarks = state.geometry.landmarks.clone();
    let version = state.geometry.version + 1;
    let geometry =
        match compute_geometry(program, &state.edge_counts, &state.config, landmarks, version) {
            Ok(g) => g,
            Err(Error::Numerical(msg)) => {
                log::warn!("geometry refresh failed numerically, keeping previous: {msg}");
                return Ok(());
            }
            Err(e) => return Err(e),
        };
    state.geometry = geometry;
    state.dist_cache.clear();

    let mut elites: Vec<Elite> = std::mem::take(&mut state.archive.elites)
        .into_values()
        .collect();
    for e in &mut elites {
        e.phi = path_objective(&e.trace.trace.0, &state.geometry.potentials);
        let dists = landmark_distances(
            &state.geometry,
            &state.config.lift,
            &mut state.dist_cache,
            &e.trace,
        )?;
        e.cell = crate::diversity::cell_key(&dists, state.config.cell_resolution)?;
    }
    state.archive.elites = rebuild_archive(elites);
    Ok(())
}

/// Runs a whole campaign: seeds from the corpus, then loops batches until
/// the budget is spent exactly. Deterministic given the config seed.
pub fn run_campaign(
    config: &CampaignConfig,
    program: &ToyProgram,
    corpus: &Corpus,
) -> Result<CampaignResult> {
    let mut state = init_campaign(config, program, corpus)?;
    let mut next_refresh = config.refresh_every;
    let mut batch_index = 0u32;
    while state.evaluations < config.budget {
        let parent_cell = go_select(&mut state)?;
        let (parent_id, parent_input, parent_bandwidth) = {
            let p = state
                .archive
                .elites
                .get(&parent_cell)
                .ok_or_else(|| Error::State("selected cell vanished".into()))?;
            (p.id, p.input.clone(), p.bandwidth)
        };
        let power = power_schedule(&mut state, &parent_cell)?;
        let mutants = mutate_batch(
            &mut state.rng,
            &parent_input,
            parent_bandwidth,
            power,
            program.alphabet,
        );
        let mut kept = if state.config.pareto_filter {
            let elite_inputs: Vec<InputVec> = state
                .archive
                .elites
                .values()
                .map(|e| e.input.clone())
                .collect();
            pareto_filter(mutants, &elite_inputs)?
        } else {
            mutants
        };
        let kept_count = kept.len() as u32;
        let remaining = (config.budget - state.evaluations) as usize;
        kept.truncate(remaining);

        let mut offspring = Vec::with_capacity(kept.len());
        for mutant in kept {
            let trace = program.execute(&mutant)?;
            offspring.push((mutant, trace));
        }
        let executed = offspring.len() as u32;
        let escapes = assimilate(&mut state, &parent_cell, parent_id, parent_bandwidth, offspring)?;

        let bandwidth_after = match state.archive.elites.get_mut(&parent_cell) {
            Some(occupant) => {
                let next = next_bandwidth(
                    occupant.bandwidth,
                    escapes,
                    executed,
                    state.bandwidth_max,
                    state.config.bandwidth_adapt,
                );
                occupant.bandwidth = next;
                occupant.last_batch = Some((executed, escapes));
                next
            }
            None => parent_bandwidth,
        };

        state.batch_log.push(BatchRecord {
            index: batch_index,
            parent_cell: parent_cell.clone(),
            parent_id,
            power,
            kept: kept_count,
            executed,
            escapes,
            bandwidth_after,
            evaluations: state.evaluations,
            covered: state.archive.covered_count(),
        });
        batch_index += 1;

        if state.evaluations >= next_refresh && state.evaluations < config.budget {
            refresh_geometry(&mut state, program)?;
            next_refresh = (state.evaluations / config.refresh_every + 1) * config.refresh_every;
        }
    }
    Ok(CampaignResult {
        coverage_curve: state.coverage_curve,
        archive: state.archive,
        evaluations: state.evaluations,
        batch_log: state.batch_log,
    })
}
