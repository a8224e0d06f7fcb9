//! Experiment orchestration: single runs that write their reports to disk,
//! and parallel sweeps aggregated in input order.

mod config;
mod heatmap;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::attacks::{run_attack, AttackReport};
use crate::error::{Error, Result};
use crate::kernel::{stream, Rng};
use crate::workloads::{generate_trace, nofill_split_report, parse_trace, replay, Metrics, ReplayOptions, SplitReport};

pub use config::{parse_config, ExperimentConfig, Scenario, TraceSource, DEFAULT_TRACE_LEN};
pub use heatmap::{csv_meta, gray_level, render_heatmap, render_matrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes of the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    /// A defense that should stop the attack let the secret through.
    LeakGuard = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Io { .. } => ExitStatus::Io,
            Error::Experiment { source, .. } => Self::for_error(source),
            _ => ExitStatus::Usage,
        }
    }
}

/// In-memory outcome of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Metrics,
    pub report: Option<AttackReport>,
}

impl ExperimentResult {
    /// Correct recovery under a defense meant to stop this attack.
    pub fn leak_guard_tripped(&self, cfg: &ExperimentConfig) -> bool {
        self.report
            .as_ref()
            .is_some_and(|r| r.verdict.correct && r.attack.defended_by(cfg.defense().kind))
    }

    pub fn status(&self, cfg: &ExperimentConfig) -> ExitStatus {
        if self.leak_guard_tripped(cfg) {
            ExitStatus::LeakGuard
        } else {
            ExitStatus::Success
        }
    }
}

/// Runs the experiment without touching the file system, except for
/// reading a trace file.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (metrics, report) = match &cfg.scenario {
        Scenario::Attack { attack, params } => {
            let r = run_attack(*attack, &cfg.hierarchy, params)?;
            (r.metrics, Some(r))
        }
        Scenario::Trace { source, squash_delay } => {
            let trace = match source {
                TraceSource::File(path) => {
                    parse_trace(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?
                }
                TraceSource::Model { model, len } => {
                    generate_trace(model, *len, Rng::for_stream(cfg.seed, stream::WORKLOAD))?
                }
            };
            let opts = ReplayOptions { squash_delay: *squash_delay, seed: cfg.seed };
            (replay(&trace, &cfg.hierarchy, &opts)?, None)
        }
    };
    Ok(ExperimentResult { config_hash: cfg.hash(), seed: cfg.seed, metrics, report })
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    scenario: &'static str,
    defense: String,
    miss_rate_l1: f64,
    miss_rate_l2: f64,
    nofill_split: SplitReport,
    metrics: &'a Metrics,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct VerdictFile<'a> {
    attack: &'static str,
    defense: &'a str,
    guessed: Option<u64>,
    correct: bool,
    truth: u64,
    separation: f64,
    seed: u64,
    config_hash: &'a str,
    version: &'static str,
}

/// Files written by [`run`] plus the exit status it implies.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub files: Vec<PathBuf>,
    pub result: ExperimentResult,
}

fn write(path: PathBuf, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs the experiment and writes `metrics.json`, plus `matrix.csv`,
/// `verdict.json` and `heatmap.svg` for attacks, into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let result = execute(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let hash = result.config_hash.as_str();

    let mut canonical = cfg.clone();
    canonical.output_dir = PathBuf::new();
    let m = &result.metrics;
    let metrics = MetricsFile {
        version: VERSION,
        config_hash: hash,
        seed: cfg.seed,
        scenario: cfg.scenario_name(),
        defense: cfg.defense().label(),
        miss_rate_l1: m.miss_rate_l1(),
        miss_rate_l2: m.miss_rate_l2(),
        nofill_split: nofill_split_report(m),
        metrics: m,
        config: canonical,
    };
    write(dir.join("metrics.json"), &to_json(&metrics), &mut files)?;

    if let Some(r) = &result.report {
        let meta = [
            ("version", VERSION.to_string()),
            ("config_hash", hash.to_string()),
            ("seed", cfg.seed.to_string()),
            ("attack", r.attack.name().to_string()),
            ("defense", r.defense.clone()),
        ];
        let csv = r.matrix.to_csv(&meta);
        write(dir.join("matrix.csv"), &csv, &mut files)?;
        let verdict = VerdictFile {
            attack: r.attack.name(),
            defense: &r.defense,
            guessed: r.verdict.guessed,
            correct: r.verdict.correct,
            truth: r.verdict.truth,
            separation: r.verdict.separation,
            seed: cfg.seed,
            config_hash: hash,
            version: VERSION,
        };
        write(dir.join("verdict.json"), &to_json(&verdict), &mut files)?;
        write(dir.join("heatmap.svg"), &render_heatmap(&csv)?, &mut files)?;
    }
    Ok(RunOutcome { status: result.status(cfg), files, result })
}

/// Renders the matrix CSV at `csv` into an SVG file at `svg`.
pub fn render_file(csv: &Path, svg: &Path) -> Result<()> {
    let text = fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    fs::write(svg, render_heatmap(&text)?).map_err(|e| Error::io(svg, e))
}

/// Runs every config on up to `parallelism` threads. Results come back in
/// input order; the first failing config (by position) aborts the sweep.
pub fn sweep_results(configs: &[ExperimentConfig], parallelism: usize) -> Result<Vec<ExperimentResult>> {
    if configs.is_empty() {
        return Err(Error::Scenario("sweep needs at least one config".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Sim(format!("thread pool: {e}")))?;
    let results: Vec<Result<ExperimentResult>> = pool.install(|| configs.par_iter().map(execute).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Experiment { index, label: configs[index].label(), source: Box::new(e) })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "index,scenario,defense,R,E,W,nofill_clear,seed,miss_rate_l1,miss_rate_l2,\
l1_never_cleared,l1_cleared_by_shb_fetch,l1_cleared_by_nonspec_access,\
l2_never_cleared,l2_cleared_by_shb_fetch,l2_cleared_by_nonspec_access,\
shb_emissions,guessed,correct,separation,config_hash";

/// Aggregated sweep table, one row per config in input order.
pub fn sweep_csv(configs: &[ExperimentConfig], results: &[ExperimentResult]) -> String {
    let mut out = format!("# version={VERSION}\n{SWEEP_HEADER}\n");
    for (i, (cfg, r)) in configs.iter().zip(results).enumerate() {
        let d = cfg.defense();
        let (rate, entries, window) = match d.kind {
            k if k.uses_shb() => (d.rate_cycles.to_string(), d.shb_entries.to_string(), d.window_lines.to_string()),
            crate::hierarchy::DefenseKind::RandomFill => (String::new(), String::new(), d.window_lines.to_string()),
            _ => (String::new(), String::new(), String::new()),
        };
        let m = &r.metrics;
        let split = nofill_split_report(m);
        let (guessed, correct, separation) = match &r.report {
            Some(rep) => (
                rep.verdict.guessed.map(|g| g.to_string()).unwrap_or_else(|| "none".into()),
                rep.verdict.correct.to_string(),
                format!("{:.3}", rep.verdict.separation),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{i},{},{},{rate},{entries},{window},{},{},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{guessed},{correct},{separation},{}",
            cfg.scenario_name(),
            d.label(),
            d.nofill_clear,
            cfg.seed,
            m.miss_rate_l1(),
            m.miss_rate_l2(),
            split.l1.never_cleared,
            split.l1.cleared_by_shb_fetch,
            split.l1.cleared_by_nonspec_access,
            split.l2.never_cleared,
            split.l2.cleared_by_shb_fetch,
            split.l2.cleared_by_nonspec_access,
            m.shb.emissions,
            r.config_hash,
        );
    }
    out
}

/// Runs the sweep and returns its CSV table.
pub fn sweep(configs: &[ExperimentConfig], parallelism: usize) -> Result<String> {
    let results = sweep_results(configs, parallelism)?;
    Ok(sweep_csv(configs, &results))
}

/// Parses a sweep file: either a JSON array of experiment objects, or
/// `{"base": {...}, "grid": {"key": [v1, v2], ...}}`, which expands to the
/// cartesian product of the grid over the base. Grid keys vary slowest in
/// alphabetical order.
pub fn parse_sweep(text: &str) -> Result<Vec<ExperimentConfig>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let objects: Vec<Value> = match value {
        Value::Array(items) => items,
        Value::Object(mut obj) => {
            if let Some(k) = obj.keys().find(|k| *k != "base" && *k != "grid") {
                return Err(Error::config(k.as_str(), "unknown key in sweep file"));
            }
            let Some(Value::Object(base)) = obj.remove("base") else {
                return Err(Error::config("base", "expected an object"));
            };
            let grid = match obj.remove("grid") {
                None => Map::new(),
                Some(Value::Object(g)) => g,
                Some(_) => return Err(Error::config("grid", "expected an object of arrays")),
            };
            let mut out = vec![base];
            for (k, vals) in grid {
                let Value::Array(vals) = vals else {
                    return Err(Error::config(format!("grid.{k}"), "expected an array"));
                };
                let mut next = Vec::with_capacity(out.len() * vals.len());
                for b in &out {
                    for v in &vals {
                        let mut o = b.clone();
                        o.insert(k.clone(), v.clone());
                        next.push(o);
                    }
                }
                out = next;
            }
            out.into_iter().map(Value::Object).collect()
        }
        _ => return Err(Error::config("<root>", "expected an array or an object")),
    };
    if objects.is_empty() {
        return Err(Error::config("<root>", "sweep has no experiments"));
    }
    objects
        .iter()
        .enumerate()
        .map(|(index, v)| {
            parse_config(&v.to_string()).map_err(|e| Error::Experiment {
                index,
                label: "parse".into(),
                source: Box::new(e),
            })
        })
        .collect()
}
