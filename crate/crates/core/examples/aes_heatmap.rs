//! Runs the AES prime-probe attack through the experiment harness, which
//! writes the timing matrix, verdict and a grayscale heatmap. On the
//! unprotected cache the heatmap shows the light diagonal of sets the first
//! round touches; under RaS+ it does not.
//!
//! `cargo run --release --example aes_heatmap -- [out-dir]`

use std::path::PathBuf;

use rascache::attacks::{AttackKind, AttackParams};
use rascache::harness::{run, ExperimentConfig};
use rascache::DefenseMode;

fn main() -> rascache::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/aes-heatmap"), PathBuf::from);
    let params = AttackParams { trials: 16, ..Default::default() };
    for defense in [DefenseMode::baseline(), DefenseMode::ras_plus_default()] {
        let dir = out.join(defense.label());
        let cfg = ExperimentConfig::attack(AttackKind::AesPp, defense, params.clone()).with_output_dir(&dir);
        let outcome = run(&cfg)?;
        let v = outcome.result.report.expect("attack scenario").verdict;
        println!("{:<18} guessed={:?} correct={}", defense.label(), v.guessed, v.correct);
        for f in outcome.files {
            println!("  {}", f.display());
        }
    }
    Ok(())
}
