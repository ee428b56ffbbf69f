//! Experiment grids: campaigns over programs, configurations, and
//! objectives, with CSV emission and report aggregation.
//!
//! A grid file names programs on disk, flag bundles, objectives, and a
//! campaign count per combination. Every campaign gets its own seed derived
//! from the base seed, bootstraps its own corpus, and runs independently,
//! so workers can execute them in any order while the collector writes rows
//! in grid-index order. Timestamps live only in a sidecar metadata file;
//! the results CSV is byte-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diversity::{default_scale, select_landmarks, LandmarkStrategy};
use crate::error::{Error, Result};
use crate::fuzz::{run_campaign, CampaignConfig, Corpus, Schedule};
use crate::markov::{estimate_chain, hitting_prob_metric, EdgeCounts};
use crate::objectives::ObjectiveKind;
use crate::path_space::trace_dissimilarity;
use crate::toylang::{load_program, random_input, InputVec, ToyProgram, Trace};

/// Exact header of the results CSV.
pub const RESULTS_HEADER: &str =
    "program_id,config_id,objective,campaign,evaluation,covered_edges,total_edges";
/// Default number of random inputs executed when bootstrapping a corpus.
pub const DEFAULT_CANDIDATES: usize = 41;
/// Default number of landmarks selected from the candidates.
pub const DEFAULT_LANDMARKS: usize = 15;
/// Default evaluation stride between CSV rows.
pub const DEFAULT_STRIDE: u64 = 10;
/// Salt separating the corpus bootstrap stream from the campaign stream.
const BOOTSTRAP_SALT: u64 = 0x626f_6f74_7374_7270;

fn default_candidates() -> usize {
    DEFAULT_CANDIDATES
}
fn default_landmarks() -> usize {
    DEFAULT_LANDMARKS
}
fn default_stride() -> u64 {
    DEFAULT_STRIDE
}
fn default_budget() -> u64 {
    crate::fuzz::DEFAULT_BUDGET
}
fn default_parallel() -> usize {
    1
}

/// A named bundle of campaign flags. Unset fields keep the campaign
/// defaults, so grid files only spell out what a configuration changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigBundle {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_adapt: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto_filter: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_bound: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl ConfigBundle {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            schedule: None,
            bandwidth_adapt: None,
            pareto_filter: None,
            alpha: None,
            power_bound: None,
            refresh_every: None,
            cell_resolution: None,
            bandwidth_max: None,
            beta: None,
            epsilon: None,
            scale: None,
        }
    }

    /// Materializes a full campaign config for one grid cell.
    pub fn apply(&self, objective: ObjectiveKind, budget: u64, seed: u64) -> CampaignConfig {
        let mut c = CampaignConfig {
            budget,
            objective,
            seed,
            ..CampaignConfig::default()
        };
        if let Some(v) = self.schedule {
            c.schedule = v;
        }
        if let Some(v) = self.bandwidth_adapt {
            c.bandwidth_adapt = v;
        }
        if let Some(v) = self.pareto_filter {
            c.pareto_filter = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.power_bound {
            c.power_bound = v;
        }
        if let Some(v) = self.refresh_every {
            c.refresh_every = v;
        }
        if let Some(v) = self.cell_resolution {
            c.cell_resolution = v;
        }
        if let Some(v) = self.bandwidth_max {
            c.bandwidth_max = Some(v);
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.scale {
            c.scale = Some(v);
        }
        c
    }
}

/// The grid document: programs x configs x objectives x campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub programs: Vec<PathBuf>,
    pub configs: Vec<ConfigBundle>,
    pub objectives: Vec<ObjectiveKind>,
    pub campaigns: u32,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_landmarks")]
    pub landmarks: usize,
    #[serde(default = "default_stride")]
    pub stride: u64,
}

fn csv_safe(label: &str) -> bool {
    !label.is_empty() && !label.contains(',') && !label.contains('\n') && !label.contains('\r')
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.programs.is_empty() {
            return Err(Error::Parameter("grid lists no programs".into()));
        }
        if self.configs.is_empty() {
            return Err(Error::Parameter("grid lists no configurations".into()));
        }
        if self.objectives.is_empty() {
            return Err(Error::Parameter("grid lists no objectives".into()));
        }
        if self.campaigns < 1 {
            return Err(Error::Parameter("grid needs at least one campaign".into()));
        }
        if self.budget < 1 {
            return Err(Error::Parameter("grid budget must be at least 1".into()));
        }
        if self.parallel < 1 {
            return Err(Error::Parameter("worker width must be at least 1".into()));
        }
        if self.stride < 1 {
            return Err(Error::Parameter("row stride must be at least 1".into()));
        }
        if self.candidates < 2 || self.landmarks < 2 {
            return Err(Error::Parameter(
                "bootstrap needs at least 2 candidates and 2 landmarks".into(),
            ));
        }
        let mut names = BTreeSet::new();
        for c in &self.configs {
            if !csv_safe(&c.name) {
                return Err(Error::Parameter(format!(
                    "configuration name {:?} is empty or not CSV-safe",
                    c.name
                )));
            }
            if !names.insert(&c.name) {
                return Err(Error::Parameter(format!(
                    "configuration name {:?} appears twice",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Total campaigns the grid will execute.
    pub fn total_campaigns(&self) -> u64 {
        self.programs.len() as u64
            * self.configs.len() as u64
            * self.objectives.len() as u64
            * self.campaigns as u64
    }
}

/// 64-bit FNV-1a, the stable hash behind per-campaign seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one campaign: base seed plus a stable hash of the cell labels.
pub fn campaign_seed(
    base: u64,
    program_id: &str,
    config_id: &str,
    objective: ObjectiveKind,
    campaign: u32,
) -> u64 {
    let key = format!(
        "{program_id}\u{1f}{config_id}\u{1f}{}\u{1f}{campaign}",
        objective.cli_name()
    );
    base.wrapping_add(fnv1a64(key.as_bytes()))
}

/// Runs random inputs through the program, estimates the geometry from
/// those very traces, and picks landmark traces by greedy magnitude
/// maximization. Spends no campaign budget.
pub fn bootstrap_corpus(
    program: &ToyProgram,
    candidates: usize,
    landmarks: usize,
    config: &CampaignConfig,
    seed: u64,
) -> Result<Corpus> {
    if candidates < 2 {
        return Err(Error::Parameter(format!(
            "bootstrap needs at least 2 candidates, got {candidates}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let inputs: Vec<InputVec> = (0..candidates)
        .map(|_| random_input(&mut rng, program.input_len, program.alphabet))
        .collect();
    let traces: Vec<Trace> = inputs
        .iter()
        .map(|i| program.execute(i))
        .collect::<Result<_>>()?;

    let mut counts = EdgeCounts::new(program.cfg.len());
    for t in &traces {
        counts.add_trace(t);
    }
    let chain = estimate_chain(&counts, &program.cfg.adjacency_matrix(), config.epsilon)?;
    let metric = hitting_prob_metric(&chain, config.beta)?;

    let n = traces.len();
    let mut d = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = trace_dissimilarity(&metric, &config.lift, &traces[i], &traces[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let t = config.scale.unwrap_or_else(|| default_scale(&d));
    let selected = select_landmarks(&d, landmarks, t, LandmarkStrategy::MagnitudeGreedy)?;
    Ok(Corpus {
        inputs,
        traces,
        landmark_indices: selected.indices,
    })
}

/// One CSV row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub program_id: String,
    pub config_id: String,
    pub objective: ObjectiveKind,
    pub campaign: u32,
    pub evaluation: u64,
    pub covered_edges: u32,
    pub total_edges: u32,
}

/// A campaign that failed; quarantined in the sidecar, never in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignFailure {
    pub program_id: String,
    pub config_id: String,
    pub objective: ObjectiveKind,
    pub campaign: u32,
    pub error: String,
}

/// Everything a grid run produces besides the files.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CampaignFailure>,
    pub campaigns_run: u64,
    pub workers: usize,
}

/// Sidecar metadata written next to the results CSV. This is the only
/// place timestamps appear, keeping the CSV itself reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMeta {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub workers: usize,
    pub campaigns_run: u64,
    pub failures: Vec<CampaignFailure>,
    pub grid: GridSpec,
}

/// Worker width: the environment variable wins over the grid field.
pub fn parallel_width(env_value: Option<&str>, fallback: usize) -> usize {
    match env_value.and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(w) if w >= 1 => w,
        _ => fallback.max(1),
    }
}

/// Evaluation indices at which rows are emitted: every `stride`
/// evaluations plus the final one.
fn stride_evaluations(budget: u64, stride: u64) -> Vec<u64> {
    let mut evals: Vec<u64> = (1..=budget / stride).map(|k| k * stride).collect();
    if budget > 0 && evals.last() != Some(&budget) {
        evals.push(budget);
    }
    evals
}

fn run_cell(
    program_id: &str,
    program: &ToyProgram,
    bundle: &ConfigBundle,
    objective: ObjectiveKind,
    campaign: u32,
    grid: &GridSpec,
) -> std::result::Result<Vec<ResultRow>, CampaignFailure> {
    let fail = |e: Error| CampaignFailure {
        program_id: program_id.to_string(),
        config_id: bundle.name.clone(),
        objective,
        campaign,
        error: e.to_string(),
    };
    let seed = campaign_seed(grid.seed, program_id, &bundle.name, objective, campaign);
    let config = bundle.apply(objective, grid.budget, seed);
    let corpus = bootstrap_corpus(
        program,
        grid.candidates,
        grid.landmarks,
        &config,
        seed ^ BOOTSTRAP_SALT,
    )
    .map_err(&fail)?;
    let result = run_campaign(&config, program, &corpus).map_err(&fail)?;
    let total = result.archive.structural_edges;
    let rows = stride_evaluations(grid.budget, grid.stride)
        .into_iter()
        .map(|e| ResultRow {
            program_id: program_id.to_string(),
            config_id: bundle.name.clone(),
            objective,
            campaign,
            evaluation: e,
            covered_edges: result.coverage_curve[(e - 1) as usize],
            total_edges: total,
        })
        .collect();
    Ok(rows)
}

/// Identifier of a program file in the CSV: its file stem.
pub fn program_id_of(path: &Path) -> Result<String> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.to_string())
        .ok_or_else(|| Error::Parameter(format!("cannot name program from path {path:?}")))?;
    if !csv_safe(&id) {
        return Err(Error::Parameter(format!(
            "program id {id:?} is not CSV-safe"
        )));
    }
    Ok(id)
}

/// Executes every cell of the grid. Relative program paths resolve against
/// `base_dir`. Failed campaigns are quarantined; missing program files
/// abort before any campaign starts.
pub fn run_grid(grid: &GridSpec, base_dir: Option<&Path>) -> Result<GridOutcome> {
    grid.validate()?;
    let mut programs = Vec::with_capacity(grid.programs.len());
    for p in &grid.programs {
        let path = match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        };
        let program = load_program(&path)?;
        programs.push((program_id_of(&path)?, program));
    }
    {
        let mut seen = BTreeSet::new();
        for (id, _) in &programs {
            if !seen.insert(id) {
                return Err(Error::Parameter(format!(
                    "program id {id:?} appears twice in the grid"
                )));
            }
        }
    }

    struct Item<'a> {
        program_id: &'a str,
        program: &'a ToyProgram,
        bundle: &'a ConfigBundle,
        objective: ObjectiveKind,
        campaign: u32,
    }
    let mut items = Vec::with_capacity(grid.total_campaigns() as usize);
    for (program_id, program) in &programs {
        for bundle in &grid.configs {
            for &objective in &grid.objectives {
                for campaign in 0..grid.campaigns {
                    items.push(Item {
                        program_id,
                        program,
                        bundle,
                        objective,
                        campaign,
                    });
                }
            }
        }
    }

    let workers = parallel_width(
        std::env::var("GEOFUZZ_PARALLEL").ok().as_deref(),
        grid.parallel,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::State(format!("cannot build worker pool: {e}")))?;
    let cell_results: Vec<std::result::Result<Vec<ResultRow>, CampaignFailure>> =
        pool.install(|| {
            items
                .par_iter()
                .map(|item| {
                    run_cell(
                        item.program_id,
                        item.program,
                        item.bundle,
                        item.objective,
                        item.campaign,
                        grid,
                    )
                })
                .collect()
        });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for cell in cell_results {
        match cell {
            Ok(mut r) => rows.append(&mut r),
            Err(f) => {
                log::warn!(
                    "campaign failed: {} / {} / {} / {}: {}",
                    f.program_id,
                    f.config_id,
                    f.objective,
                    f.campaign,
                    f.error
                );
                failures.push(f);
            }
        }
    }
    Ok(GridOutcome {
        rows,
        failures,
        campaigns_run: items.len() as u64,
        workers,
    })
}

/// Renders result rows as CSV text with the exact contract header.
pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.program_id,
            r.config_id,
            r.objective.cli_name(),
            r.campaign,
            r.evaluation,
            r.covered_edges,
            r.total_edges
        ));
    }
    out
}

/// Parses a results CSV produced by `results_to_csv`.
pub fn results_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("results CSV is empty".into()))?;
    if header != RESULTS_HEADER {
        return Err(Error::Format(format!(
            "unexpected results header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected 7",
                i + 2,
                fields.len()
            )));
        }
        let objective = ObjectiveKind::from_cli_name(fields[2]).ok_or_else(|| {
            Error::Format(format!("row {}: unknown objective {:?}", i + 2, fields[2]))
        })?;
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::Format(format!("row {}: bad {what} {s:?}", i + 2)))
        };
        let evaluation: u64 = fields[4]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad evaluation {:?}", i + 2, fields[4])))?;
        rows.push(ResultRow {
            program_id: fields[0].to_string(),
            config_id: fields[1].to_string(),
            objective,
            campaign: parse_u32(fields[3], "campaign")?,
            evaluation,
            covered_edges: parse_u32(fields[5], "covered_edges")?,
            total_edges: parse_u32(fields[6], "total_edges")?,
        });
    }
    Ok(rows)
}

/// One aggregated point of a coverage curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub config_id: String,
    pub objective: ObjectiveKind,
    pub evaluation: u64,
    pub mean_coverage: f64,
    pub std_coverage: f64,
    pub campaigns: usize,
}

/// Final-budget aggregate per configuration and objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config_id: String,
    pub objective: ObjectiveKind,
    pub mean_final_coverage: f64,
    pub std_final_coverage: f64,
    pub campaigns: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalized coverage of one row: covered edges over the traversable
/// total, which excludes the synthetic exit-to-entry edge.
fn normalized(row: &ResultRow) -> Result<f64> {
    let denom = row.total_edges.saturating_sub(1);
    if denom == 0 {
        return Err(Error::Data(format!(
            "program {} reports no traversable edges",
            row.program_id
        )));
    }
    let v = row.covered_edges as f64 / denom as f64;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Data(format!(
            "program {} covers {} of {} traversable edges",
            row.program_id, row.covered_edges, denom
        )));
    }
    Ok(v)
}

/// Aggregates result rows into coverage curves (mean and population std
/// over all campaigns and programs at each evaluation) and a final-budget
/// summary per configuration and objective.
pub fn report(rows: &[ResultRow]) -> Result<(Vec<CurveRow>, Vec<SummaryRow>)> {
    if rows.is_empty() {
        return Err(Error::Data("results table is empty".into()));
    }
    let mut totals: BTreeMap<&str, u32> = BTreeMap::new();
    for row in rows {
        match totals.get(row.program_id.as_str()) {
            None => {
                totals.insert(&row.program_id, row.total_edges);
            }
            Some(&t) if t != row.total_edges => {
                return Err(Error::Data(format!(
                    "program {} reports edge totals {t} and {}",
                    row.program_id, row.total_edges
                )));
            }
            _ => {}
        }
    }

    let mut curve_groups: BTreeMap<(String, ObjectiveKind, u64), Vec<f64>> = BTreeMap::new();
    // Final evaluation per campaign, keyed up to the campaign identity.
    let mut finals: BTreeMap<(String, ObjectiveKind, String, u32), (u64, f64)> = BTreeMap::new();
    for row in rows {
        let v = normalized(row)?;
        curve_groups
            .entry((row.config_id.clone(), row.objective, row.evaluation))
            .or_default()
            .push(v);
        let key = (
            row.config_id.clone(),
            row.objective,
            row.program_id.clone(),
            row.campaign,
        );
        let entry = finals.entry(key).or_insert((row.evaluation, v));
        if row.evaluation >= entry.0 {
            *entry = (row.evaluation, v);
        }
    }

    let curves = curve_groups
        .into_iter()
        .map(|((config_id, objective, evaluation), values)| {
            let (mean, std) = mean_std(&values);
            CurveRow {
                config_id,
                objective,
                evaluation,
                mean_coverage: mean,
                std_coverage: std,
                campaigns: values.len(),
            }
        })
        .collect();

    let mut summary_groups: BTreeMap<(String, ObjectiveKind), Vec<f64>> = BTreeMap::new();
    for ((config_id, objective, _, _), (_, v)) in finals {
        summary_groups
            .entry((config_id, objective))
            .or_default()
            .push(v);
    }
    let summary = summary_groups
        .into_iter()
        .map(|((config_id, objective), values)| {
            let (mean, std) = mean_std(&values);
            SummaryRow {
                config_id,
                objective,
                mean_final_coverage: mean,
                std_final_coverage: std,
                campaigns: values.len(),
            }
        })
        .collect();
    Ok((curves, summary))
}

pub fn curves_to_csv(curves: &[CurveRow]) -> String {
    let mut out = String::from("config_id,objective,evaluation,mean_coverage,std_coverage,campaigns\n");
    for c in curves {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{}\n",
            c.config_id,
            c.objective.cli_name(),
            c.evaluation,
            c.mean_coverage,
            c.std_coverage,
            c.campaigns
        ));
    }
    out
}

pub fn summary_to_csv(summary: &[SummaryRow]) -> String {
    let mut out =
        String::from("config_id,objective,mean_final_coverage,std_final_coverage,campaigns\n");
    for s in summary {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            s.config_id,
            s.objective.cli_name(),
            s.mean_final_coverage,
            s.std_final_coverage,
            s.campaigns
        ));
    }
    out
}

/// Writes the results CSV and its sidecar metadata file (the CSV path plus
/// a `.meta.json` suffix).
pub fn write_grid_outputs(
    out_path: &Path,
    grid: &GridSpec,
    outcome: &GridOutcome,
    started_unix_ms: u128,
) -> Result<()> {
    let csv = results_to_csv(&outcome.rows);
    std::fs::write(out_path, csv).map_err(|e| Error::io(out_path, e))?;
    let meta = GridMeta {
        started_unix_ms,
        finished_unix_ms: now_unix_ms(),
        workers: outcome.workers,
        campaigns_run: outcome.campaigns_run,
        failures: outcome.failures.clone(),
        grid: grid.clone(),
    };
    let mut meta_name = out_path.as_os_str().to_os_string();
    meta_name.push(".meta.json");
    let meta_path = PathBuf::from(meta_name);
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzz::init_campaign;
    use crate::toylang::{generate_program, save_program, GenParams, Stmt};

    fn small_program(seed: u64) -> ToyProgram {
        generate_program(&GenParams {
            alphabet: 4,
            max_statements: 5,
            max_depth: 2,
            seed,
            ..GenParams::default()
        })
        .unwrap()
    }

    fn write_programs(dir: &Path, seeds: &[u64]) -> Vec<PathBuf> {
        seeds
            .iter()
            .map(|&s| {
                let path = dir.join(format!("prog_{s}.json"));
                save_program(&small_program(s), &path).unwrap();
                path
            })
            .collect()
    }

    fn tiny_grid(programs: Vec<PathBuf>) -> GridSpec {
        GridSpec {
            programs,
            configs: vec![ConfigBundle::named("recommended"), {
                let mut c = ConfigBundle::named("no-adapt");
                c.bandwidth_adapt = Some(false);
                c
            }],
            objectives: vec![ObjectiveKind::HitProbFromEntry],
            campaigns: 3,
            budget: 30,
            seed: 42,
            parallel: 2,
            candidates: 10,
            landmarks: 4,
            stride: 10,
        }
    }

    #[test]
    fn grid_product_count_and_row_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let grid = tiny_grid(write_programs(dir.path(), &[1, 2]));
        let outcome = run_grid(&grid, None).unwrap();
        assert_eq!(outcome.campaigns_run, 12);
        assert!(outcome.failures.is_empty());
        let strides = stride_evaluations(grid.budget, grid.stride).len();
        assert_eq!(outcome.rows.len(), 12 * strides);
        let cells: BTreeSet<_> = outcome
            .rows
            .iter()
            .map(|r| (&r.program_id, &r.config_id, r.objective, r.campaign))
            .collect();
        assert_eq!(cells.len(), 12);
        for row in &outcome.rows {
            assert!(row.covered_edges <= row.total_edges - 1);
        }
    }

    #[test]
    fn paper_scale_grid_is_constructed_but_not_run() {
        let grid = GridSpec {
            programs: (0..10).map(|i| PathBuf::from(format!("p{i}.json"))).collect(),
            configs: (0..12)
                .map(|i| ConfigBundle::named(&format!("c{i}")))
                .collect(),
            objectives: ObjectiveKind::ALL.to_vec(),
            campaigns: 40,
            budget: 1000,
            seed: 0,
            parallel: 8,
            candidates: DEFAULT_CANDIDATES,
            landmarks: DEFAULT_LANDMARKS,
            stride: DEFAULT_STRIDE,
        };
        grid.validate().unwrap();
        assert_eq!(grid.total_campaigns(), 33_600);
        assert_eq!(grid.total_campaigns() * grid.budget, 33_600_000);
    }

    #[test]
    fn grid_validation_rejects_degenerate_grids() {
        let mut grid = tiny_grid(vec![PathBuf::from("p.json")]);
        grid.objectives.clear();
        assert!(grid.validate().is_err());

        let mut grid = tiny_grid(vec![PathBuf::from("p.json")]);
        grid.configs.push(ConfigBundle::named("recommended"));
        assert!(grid.validate().is_err(), "duplicate config names rejected");

        let mut grid = tiny_grid(vec![PathBuf::from("p.json")]);
        grid.configs[0].name = "with,comma".into();
        assert!(grid.validate().is_err());

        let mut grid = tiny_grid(vec![PathBuf::from("p.json")]);
        grid.campaigns = 0;
        assert!(grid.validate().is_err());
    }

    #[test]
    fn stride_rows_cover_the_budget_tail() {
        assert_eq!(stride_evaluations(25, 10), vec![10, 20, 25]);
        assert_eq!(stride_evaluations(30, 10), vec![10, 20, 30]);
        assert_eq!(stride_evaluations(7, 10), vec![7]);
        let full = stride_evaluations(500, 10);
        assert_eq!(full.len(), 50);
        assert_eq!(*full.last().unwrap(), 500);
    }

    #[test]
    fn grid_reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut grid = tiny_grid(write_programs(dir.path(), &[5]));
        grid.campaigns = 2;
        let a = results_to_csv(&run_grid(&grid, None).unwrap().rows);
        grid.parallel = 1;
        let b = results_to_csv(&run_grid(&grid, None).unwrap().rows);
        assert_eq!(a, b, "worker width must not change the bytes");
        assert!(a.starts_with(RESULTS_HEADER));
    }

    #[test]
    fn seeds_are_stable_and_distinct_across_cells() {
        let s = campaign_seed(7, "p1", "c1", ObjectiveKind::Constant, 0);
        assert_eq!(s, campaign_seed(7, "p1", "c1", ObjectiveKind::Constant, 0));
        let variants = [
            campaign_seed(7, "p2", "c1", ObjectiveKind::Constant, 0),
            campaign_seed(7, "p1", "c2", ObjectiveKind::Constant, 0),
            campaign_seed(7, "p1", "c1", ObjectiveKind::HopFromEntry, 0),
            campaign_seed(7, "p1", "c1", ObjectiveKind::Constant, 1),
        ];
        assert!(variants.iter().all(|&v| v != s));
    }

    #[test]
    fn parallel_width_prefers_valid_environment_values() {
        assert_eq!(parallel_width(None, 4), 4);
        assert_eq!(parallel_width(Some("3"), 4), 3);
        assert_eq!(parallel_width(Some(" 6 "), 4), 6);
        assert_eq!(parallel_width(Some("junk"), 4), 4);
        assert_eq!(parallel_width(Some("0"), 4), 4);
        assert_eq!(parallel_width(None, 0), 1);
    }

    #[test]
    fn bootstrap_produces_a_usable_corpus() {
        let program = small_program(9);
        let config = CampaignConfig::default();
        let corpus = bootstrap_corpus(&program, 15, 5, &config, 123).unwrap();
        corpus.validate(&program).unwrap();
        assert_eq!(corpus.inputs.len(), 15);
        assert!(corpus.landmark_indices.len() <= 5);
        let distinct: BTreeSet<_> = corpus.landmark_indices.iter().collect();
        assert_eq!(distinct.len(), corpus.landmark_indices.len());
        if corpus.landmark_indices.len() >= config.cell_resolution {
            init_campaign(&config, &program, &corpus).unwrap();
        }
        let again = bootstrap_corpus(&program, 15, 5, &config, 123).unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn missing_program_files_abort_with_the_path() {
        let grid = tiny_grid(vec![PathBuf::from("/nonexistent/prog.json")]);
        let err = run_grid(&grid, None).unwrap_err();
        assert!(err.to_string().contains("prog.json"), "{err}");
    }

    #[test]
    fn failed_campaigns_are_quarantined_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = write_programs(dir.path(), &[3]);
        // A predicate-free program makes every trace identical, so landmark
        // selection collapses to one landmark and campaigns cannot key
        // cells at resolution 2.
        let degenerate =
            crate::toylang::ToyProgram::from_statements(vec![Stmt::assign()], 4).unwrap();
        let degenerate_path = dir.path().join("flat.json");
        save_program(&degenerate, &degenerate_path).unwrap();
        paths.push(degenerate_path);

        let mut grid = tiny_grid(paths);
        grid.campaigns = 1;
        let outcome = run_grid(&grid, None).unwrap();
        assert_eq!(outcome.campaigns_run, 4);
        assert_eq!(outcome.failures.len(), 2, "both flat-program cells fail");
        assert!(outcome.failures.iter().all(|f| f.program_id == "flat"));
        let ok_cells: BTreeSet<_> = outcome.rows.iter().map(|r| &r.program_id).collect();
        assert!(!ok_cells.contains(&"flat".to_string()));
        assert_eq!(outcome.rows.len(), 2 * stride_evaluations(30, 10).len());
    }

    #[test]
    fn results_csv_round_trips() {
        let rows = vec![
            ResultRow {
                program_id: "p1".into(),
                config_id: "c1".into(),
                objective: ObjectiveKind::HitProbFromEntry,
                campaign: 0,
                evaluation: 10,
                covered_edges: 5,
                total_edges: 11,
            },
            ResultRow {
                program_id: "p1".into(),
                config_id: "c1".into(),
                objective: ObjectiveKind::Constant,
                campaign: 1,
                evaluation: 20,
                covered_edges: 10,
                total_edges: 11,
            },
        ];
        let csv = results_to_csv(&rows);
        assert!(csv.starts_with(
            "program_id,config_id,objective,campaign,evaluation,covered_edges,total_edges\n"
        ));
        let parsed = results_from_csv(&csv).unwrap();
        assert_eq!(parsed, rows);
        assert!(results_from_csv("bogus_header\n1,2,3").is_err());
    }

    #[test]
    fn report_aggregates_means_and_population_std() {
        let row = |campaign: u32, evaluation: u64, covered: u32| ResultRow {
            program_id: "p1".into(),
            config_id: "c1".into(),
            objective: ObjectiveKind::Constant,
            campaign,
            evaluation,
            covered_edges: covered,
            total_edges: 11,
        };
        let rows = vec![row(0, 10, 5), row(1, 10, 7), row(0, 20, 10), row(1, 20, 10)];
        let (curves, summary) = report(&rows).unwrap();
        assert_eq!(curves.len(), 2);
        assert!((curves[0].mean_coverage - 0.6).abs() < 1e-12);
        assert!((curves[0].std_coverage - 0.1).abs() < 1e-12);
        assert!((curves[1].mean_coverage - 1.0).abs() < 1e-12);
        assert_eq!(summary.len(), 1);
        assert!((summary[0].mean_final_coverage - 1.0).abs() < 1e-12);
        assert_eq!(summary[0].campaigns, 2);

        let (solo_curves, solo_summary) = report(&[row(0, 10, 5)]).unwrap();
        assert_eq!(solo_curves[0].std_coverage, 0.0);
        assert_eq!(solo_summary[0].std_final_coverage, 0.0);

        let mut bad = vec![row(0, 10, 5)];
        bad.push(ResultRow {
            total_edges: 12,
            ..row(1, 10, 5)
        });
        assert!(matches!(report(&bad), Err(Error::Data(_))));

        let over = vec![row(0, 10, 11)];
        assert!(matches!(report(&over), Err(Error::Data(_))));
    }

    #[test]
    fn grid_json_round_trips_with_defaults() {
        let text = r#"{
            "programs": ["a.json"],
            "configs": [{"name": "recommended"}, {"name": "k", "bandwidth_adapt": false}],
            "objectives": ["hitprob", "constant"],
            "campaigns": 10
        }"#;
        let grid: GridSpec = serde_json::from_str(text).unwrap();
        assert_eq!(grid.budget, crate::fuzz::DEFAULT_BUDGET);
        assert_eq!(grid.candidates, DEFAULT_CANDIDATES);
        assert_eq!(grid.landmarks, DEFAULT_LANDMARKS);
        assert_eq!(grid.stride, DEFAULT_STRIDE);
        assert_eq!(grid.parallel, 1);
        assert_eq!(grid.configs[1].bandwidth_adapt, Some(false));
        assert_eq!(
            grid.objectives,
            vec![ObjectiveKind::HitProbFromEntry, ObjectiveKind::Constant]
        );
        let round: GridSpec =
            serde_json::from_str(&serde_json::to_string(&grid).unwrap()).unwrap();
        assert_eq!(round, grid);
        assert!(serde_json::from_str::<GridSpec>(r#"{"bogus": true}"#).is_err());
    }
}
