//! Generates a locality trace, writes it in the text format, reads it back
//! and replays it under each defense.
//!
//! `cargo run --release --example trace_replay -- [records] [trace-file]`

use rascache::kernel::stream;
use rascache::workloads::{
    format_trace, generate_trace, nofill_split_report, parse_trace, replay, LocalityModel, ReplayOptions,
};
use rascache::{DefenseMode, HierarchyConfig, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(20_000), |s| s.parse())?;
    let path = args.next().map_or_else(|| std::env::temp_dir().join("rascache-trace.txt"), Into::into);

    let trace = generate_trace(&LocalityModel::default(), n, Rng::for_stream(1, stream::WORKLOAD))?;
    std::fs::write(&path, format_trace(&trace))?;
    let trace = parse_trace(&std::fs::read_to_string(&path)?)?;
    println!("{} records in {}", trace.len(), path.display());

    println!("{:<22} {:>8} {:>8} {:>12} {:>12}", "defense", "L1 miss", "L2 miss", "L1 shb-clr%", "L2 shb-clr%");
    for defense in [
        DefenseMode::baseline(),
        DefenseMode::sa_random(),
        DefenseMode::ras_spec_default(),
        DefenseMode::ras_plus_default(),
        DefenseMode::random_fill(4),
    ] {
        let m = replay(&trace, &HierarchyConfig::new(defense), &ReplayOptions::default())?;
        let split = nofill_split_report(&m);
        println!(
            "{:<22} {:>8.4} {:>8.4} {:>12.1} {:>12.1}",
            defense.label(),
            m.miss_rate_l1(),
            m.miss_rate_l2(),
            split.l1.cleared_by_shb_fetch,
            split.l2.cleared_by_shb_fetch
        );
    }
    Ok(())
}
