//! Command-line front end: program generation, geometry inspection, corpus
//! bootstrapping, single campaigns, experiment grids, and report
//! aggregation.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use geofuzz::diversity::DEFAULT_CELL_RESOLUTION;
use geofuzz::error::{Error, Result};
use geofuzz::fuzz::{
    run_campaign, CampaignConfig, Corpus, Schedule, DEFAULT_ALPHA, DEFAULT_BUDGET,
    DEFAULT_POWER_BOUND, DEFAULT_REFRESH_EVERY,
};
use geofuzz::harness::{
    bootstrap_corpus, curves_to_csv, now_unix_ms, report, results_from_csv, run_grid,
    summary_to_csv, write_grid_outputs, GridSpec, DEFAULT_CANDIDATES, DEFAULT_LANDMARKS,
};
use geofuzz::markov::{
    commute_time_metric, estimate_chain, hitting_prob_metric, resistance_metric, EdgeCounts,
    MetricMatrix, DEFAULT_BETA, DEFAULT_EPSILON,
};
use geofuzz::objectives::ObjectiveKind;
use geofuzz::toylang::{generate_program, listing, load_program, save_program, GenParams, Trace};

/// Boolean flags that read as `on`/`off` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn as_bool(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Parser)]
#[command(
    name = "geofuzz",
    version,
    about = "Greybox fuzzer that curates inputs by geometric diversity of their execution paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random toy programs and their source listings.
    Gen {
        /// How many programs to generate.
        #[arg(long = "n-programs")]
        n_programs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Alphabet size for inputs and counters.
        #[arg(long, default_value_t = 8)]
        alphabet: u32,
        /// Statement budget per program.
        #[arg(long = "max-statements", default_value_t = 20)]
        max_statements: usize,
        /// Maximum statement nesting depth.
        #[arg(long = "max-depth", default_value_t = 4)]
        max_depth: usize,
        /// Grammar probability of drawing an if statement.
        #[arg(long = "prob-if", default_value_t = 0.4)]
        prob_if: f64,
        /// Grammar probability of drawing a while statement.
        #[arg(long = "prob-while", default_value_t = 0.2)]
        prob_while: f64,
        /// Grammar probability of drawing an assignment.
        #[arg(long = "prob-assign", default_value_t = 0.4)]
        prob_assign: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the vertex metrics of a program's empirical chain as CSV.
    Metrics {
        #[arg(long)]
        program: PathBuf,
        /// Optional traces (JSON array of vertex arrays, or a corpus file);
        /// without them the chain smooths a zero count table.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute random inputs and select landmark traces for a corpus.
    Bootstrap {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        #[arg(long, default_value_t = DEFAULT_LANDMARKS)]
        landmarks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one fuzzing campaign.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, value_enum, default_value_t = Schedule::Entropic)]
        schedule: Schedule,
        #[arg(long, value_enum, default_value_t = ObjectiveKind::HitProbFromEntry)]
        objective: ObjectiveKind,
        #[arg(long = "bandwidth-adapt", value_enum, default_value_t = Toggle::On)]
        bandwidth_adapt: Toggle,
        #[arg(long = "pareto", value_enum, default_value_t = Toggle::Off)]
        pareto: Toggle,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long = "power-bound", default_value_t = DEFAULT_POWER_BOUND)]
        power_bound: u32,
        /// Geometry refresh cadence in evaluations.
        #[arg(long = "refresh", default_value_t = DEFAULT_REFRESH_EVERY)]
        refresh: u64,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a whole experiment grid and write the results CSV.
    Experiment {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker width; overrides the grid file (GEOFUZZ_PARALLEL
        /// overrides both).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Aggregate a results CSV into coverage curves and a final summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_traces(path: &Path) -> Result<Vec<Trace>> {
    let text = read_to_string(path)?;
    if let Ok(traces) = serde_json::from_str::<Vec<Trace>>(&text) {
        return Ok(traces);
    }
    let corpus: Corpus = serde_json::from_str(&text).map_err(|_| {
        Error::Format(format!(
            "{} holds neither a trace array nor a corpus document",
            path.display()
        ))
    })?;
    Ok(corpus.traces)
}

fn metric_csv_rows(out: &mut String, kind: &str, metric: &MetricMatrix) {
    let n = metric.len();
    for x in 0..n as u32 {
        for y in 0..n as u32 {
            out.push_str(&format!("{kind},{x},{y},{}\n", metric.get(x, y)));
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            n_programs,
            seed,
            alphabet,
            max_statements,
            max_depth,
            prob_if,
            prob_while,
            prob_assign,
            out,
        } => {
            if n_programs < 1 {
                return Err(Error::Parameter("generate at least one program".into()));
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for i in 0..n_programs {
                let params = GenParams {
                    alphabet,
                    max_statements,
                    max_depth,
                    prob_if,
                    prob_while,
                    prob_assign,
                    seed: seed.wrapping_add(i as u64),
                    ..GenParams::default()
                };
                let program = generate_program(&params)?;
                let base = out.join(format!("prog_{i:03}"));
                let json_path = base.with_extension("json");
                save_program(&program, &json_path)?;
                write_string(&base.with_extension("txt"), &listing(&program))?;
                println!(
                    "{} vertices={} inputs={} alphabet={}",
                    json_path.display(),
                    program.cfg.len(),
                    program.input_len,
                    program.alphabet
                );
            }
            Ok(())
        }
        Command::Metrics {
            program,
            traces,
            beta,
            epsilon,
            out,
        } => {
            let program = load_program(&program)?;
            let loaded = traces.as_deref().map(load_traces).transpose()?;
            let mut counts = EdgeCounts::new(program.cfg.len());
            if let Some(traces) = &loaded {
                for t in traces {
                    program.cfg.validate_trace(t)?;
                    counts.add_trace(t);
                }
            }
            let adjacency = program.cfg.adjacency_matrix();
            let chain = estimate_chain(&counts, &adjacency, epsilon)?;
            let hitprob = hitting_prob_metric(&chain, beta)?;
            let commute = commute_time_metric(&chain)?;
            // Resistance works on edge weights, not transition rows: with
            // traces the smoothed counts serve as weights, otherwise the
            // bare structure does.
            let n = program.cfg.len();
            let weights = if loaded.is_some() {
                let mut w = adjacency.clone() * epsilon;
                for u in 0..n as u32 {
                    for v in 0..n as u32 {
                        if adjacency[(u as usize, v as usize)] > 0.0 {
                            w[(u as usize, v as usize)] += counts.get(u, v) as f64;
                        }
                    }
                }
                w
            } else {
                adjacency
            };
            let resistance = resistance_metric(&weights)?;

            let mut csv = String::from("kind,source_vertex,target_vertex,distance\n");
            metric_csv_rows(&mut csv, "hitprob", &hitprob);
            metric_csv_rows(&mut csv, "commute", &commute);
            metric_csv_rows(&mut csv, "resistance", &resistance);
            write_string(&out, &csv)?;
            println!(
                "{}: 3 metrics over {} vertices ({} rows)",
                out.display(),
                n,
                3 * n * n
            );
            Ok(())
        }
        Command::Bootstrap {
            program,
            candidates,
            landmarks,
            seed,
            beta,
            epsilon,
            out,
        } => {
            let program = load_program(&program)?;
            let config = CampaignConfig {
                beta,
                epsilon,
                seed,
                ..CampaignConfig::default()
            };
            let corpus = bootstrap_corpus(&program, candidates, landmarks, &config, seed)?;
            write_string(&out, &serde_json::to_string_pretty(&corpus)?)?;
            println!(
                "{}: {} inputs, {} landmarks",
                out.display(),
                corpus.inputs.len(),
                corpus.landmark_indices.len()
            );
            Ok(())
        }
        Command::Run {
            program,
            corpus,
            budget,
            schedule,
            objective,
            bandwidth_adapt,
            pareto,
            alpha,
            power_bound,
            refresh,
            beta,
            epsilon,
            seed,
            out,
        } => {
            let program = load_program(&program)?;
            let corpus: Corpus = serde_json::from_str(&read_to_string(&corpus)?)?;
            let config = CampaignConfig {
                budget,
                power_bound,
                schedule,
                objective,
                alpha,
                bandwidth_adapt: bandwidth_adapt.as_bool(),
                pareto_filter: pareto.as_bool(),
                refresh_every: refresh,
                cell_resolution: DEFAULT_CELL_RESOLUTION,
                beta,
                epsilon,
                seed,
                ..CampaignConfig::default()
            };
            let result = run_campaign(&config, &program, &corpus)?;
            let archive: Vec<_> = result
                .archive
                .elites
                .values()
                .map(|e| {
                    json!({
                        "cell": e.cell.0,
                        "input": e.input.0,
                        "phi": e.phi,
                        "trace": e.trace.trace.0,
                        "bandwidth": e.bandwidth,
                    })
                })
                .collect();
            let document = json!({
                "config": config,
                "coverage_curve": result.coverage_curve,
                "archive": archive,
                "totals": {
                    "evaluations": result.evaluations,
                    "covered_edges": result.archive.covered_count(),
                    "total_edges": result.archive.structural_edges,
                    "traversable_edges": result.archive.coverage_denominator(),
                    "elites": result.archive.elites.len(),
                },
            });
            write_string(&out, &serde_json::to_string_pretty(&document)?)?;
            println!(
                "{}: covered {}/{} edges in {} evaluations, {} elites",
                out.display(),
                result.archive.covered_count(),
                result.archive.coverage_denominator(),
                result.evaluations,
                result.archive.elites.len()
            );
            Ok(())
        }
        Command::Experiment {
            grid,
            out,
            parallel,
        } => {
            let started = now_unix_ms();
            let mut spec: GridSpec = serde_json::from_str(&read_to_string(&grid)?)?;
            if let Some(p) = parallel {
                spec.parallel = p;
            }
            let base_dir = grid.parent().filter(|p| !p.as_os_str().is_empty());
            let outcome = run_grid(&spec, base_dir)?;
            write_grid_outputs(&out, &spec, &outcome, started)?;
            println!(
                "{}: {} campaigns, {} rows, {} failures (workers={})",
                out.display(),
                outcome.campaigns_run,
                outcome.rows.len(),
                outcome.failures.len(),
                outcome.workers
            );
            Ok(())
        }
        Command::Report {
            input,
            curves,
            summary,
        } => {
            let rows = results_from_csv(&read_to_string(&input)?)?;
            let (curve_rows, summary_rows) = report(&rows)?;
            write_string(&curves, &curves_to_csv(&curve_rows))?;
            write_string(&summary, &summary_to_csv(&summary_rows))?;
            println!(
                "{}: {} curve points; {}: {} summary lines",
                curves.display(),
                curve_rows.len(),
                summary.display(),
                summary_rows.len()
            );
            Ok(())
        }
    }
}
