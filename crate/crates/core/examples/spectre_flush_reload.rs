//! Spectre v1 over a flush-reload channel, run against the unprotected
//! cache and both RaS modes.
//!
//! `cargo run --release --example spectre_flush_reload -- [secret]`

use rascache::attacks::{run_attack, AttackKind, AttackParams};
use rascache::{DefenseMode, HierarchyConfig};

fn main() -> rascache::Result<()> {
    let secret = std::env::args().nth(1).map_or(30, |s| s.parse::<u8>().expect("secret must be a byte"));
    let params = AttackParams { secret, ..Default::default() };
    for defense in [DefenseMode::baseline(), DefenseMode::ras_spec_default(), DefenseMode::ras_plus_default()] {
        let r = run_attack(AttackKind::SpectreFr, &HierarchyConfig::new(defense), &params)?;
        let reload = &r.matrix.cells[0];
        let fastest = reload.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "{:<18} guessed={:<5} correct={:<5} separation={:>7.2}  reload[secret]={:>6.1}  fastest={:>6.1}",
            r.defense,
            r.verdict.guessed.map_or("none".into(), |g| g.to_string()),
            r.verdict.correct,
            r.verdict.separation,
            reload[usize::from(secret)],
            fastest,
        );
    }
    Ok(())
}
