//! Sweeps the SHB window size for both RaS modes on the default locality
//! model and prints the aggregated CSV.
//!
//! `cargo run --release --example window_sweep -- [threads]`

use rascache::harness::{sweep, ExperimentConfig};
use rascache::workloads::LocalityModel;
use rascache::DefenseMode;

fn main() -> rascache::Result<()> {
    let threads = std::env::args().nth(1).map_or(4, |s| s.parse().expect("thread count"));
    let mut configs = Vec::new();
    for w in [1, 4, 16] {
        configs.push(ExperimentConfig::trace_model(DefenseMode::ras_spec(3, 1, w), LocalityModel::default(), 20_000, 1));
    }
    for w in [4, 16, 64] {
        configs.push(ExperimentConfig::trace_model(DefenseMode::ras_plus(3, 4, w), LocalityModel::default(), 20_000, 1));
    }
    print!("{}", sweep(&configs, threads)?);
    Ok(())
}
