use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rascache::harness::{self, ExitStatus, ExperimentConfig, Scenario};
use rascache::Error;

/// Cache-hierarchy simulator with the RaS defense: attacks, trace replay,
/// sweeps and heatmaps.
#[derive(Debug, Parser)]
#[command(name = "rascache", version)]
struct Cli {
    /// Experiment JSON (run-attack, run-trace) or sweep JSON (sweep).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of every experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run-attack, run-trace, sweep) or SVG path (render).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one attack experiment.
    RunAttack,
    /// Replay one trace experiment.
    RunTrace,
    /// Run every experiment of a sweep file and write sweep.csv.
    Sweep,
    /// Render a matrix CSV as an SVG heatmap.
    Render {
        /// Matrix CSV written by run-attack.
        csv: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })
}

fn config_path(cli: &Cli) -> Result<&PathBuf, Error> {
    cli.config.as_ref().ok_or_else(|| Error::Config { key: "--config".into(), msg: "required".into() })
}

fn adjust(cli: &Cli, mut cfg: ExperimentConfig) -> ExperimentConfig {
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg = cfg.with_output_dir(out);
    }
    cfg
}

fn run_single(cli: &Cli, want_attack: bool) -> Result<ExitStatus, Error> {
    let cfg = adjust(cli, harness::parse_config(&read(config_path(cli)?)?)?);
    if matches!(cfg.scenario, Scenario::Attack { .. }) != want_attack {
        return Err(Error::Config {
            key: "scenario".into(),
            msg: format!("`{}` does not match this subcommand", cfg.scenario_name()),
        });
    }
    let out = harness::run(&cfg)?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    if let Some(r) = &out.result.report {
        let guessed = r.verdict.guessed.map_or("none".to_string(), |g| g.to_string());
        println!(
            "{} on {}: guessed={guessed} correct={} separation={:.3}",
            r.attack.name(),
            r.defense,
            r.verdict.correct,
            r.verdict.separation
        );
    } else {
        let m = &out.result.metrics;
        println!("miss_rate_l1={:.6} miss_rate_l2={:.6}", m.miss_rate_l1(), m.miss_rate_l2());
    }
    if out.status == ExitStatus::LeakGuard {
        eprintln!("leak guard: secret recovered under a defense that should stop it");
    }
    Ok(out.status)
}

fn run_sweep(cli: &Cli) -> Result<ExitStatus, Error> {
    let mut configs = harness::parse_sweep(&read(config_path(cli)?)?)?;
    if let Some(seed) = cli.seed {
        configs = configs.into_iter().map(|c| c.with_seed(seed)).collect();
    }
    let csv = harness::sweep(&configs, cli.parallel)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("sweep.csv");
    fs::write(&path, csv).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("wrote {} ({} rows)", path.display(), configs.len());
    Ok(ExitStatus::Success)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::Usage.code() as u8 } else { 0 });
        }
    };
    let result = match &cli.cmd {
        Cmd::RunAttack => run_single(&cli, true),
        Cmd::RunTrace => run_single(&cli, false),
        Cmd::Sweep => run_sweep(&cli),
        Cmd::Render { csv } => {
            let svg = cli.out.clone().unwrap_or_else(|| csv.with_extension("svg"));
            harness::render_file(csv, &svg).map(|()| {
                println!("wrote {}", svg.display());
                ExitStatus::Success
            })
        }
    };
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::for_error(&e).code() as u8)
        }
    }
}
