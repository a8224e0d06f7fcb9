//! Spectre v1 over an L1 prime-probe channel. The probe of a set the victim
//! touched takes longer than the no-victim profile of the same set.

use rascache::attacks::{run_attack, AttackKind, AttackParams};
use rascache::{DefenseMode, HierarchyConfig};

fn main() -> rascache::Result<()> {
    let params = AttackParams { secret: 30, ..Default::default() };
    for defense in [DefenseMode::baseline(), DefenseMode::ras_spec_default(), DefenseMode::ras_plus_default()] {
        let r = run_attack(AttackKind::SpectrePp, &HierarchyConfig::new(defense), &params)?;
        let (with_victim, profile) = (&r.matrix.cells[0], &r.matrix.cells[1]);
        let mut diff: Vec<(usize, f64)> = with_victim.iter().zip(profile).map(|(a, b)| a - b).enumerate().collect();
        diff.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<String> = diff.iter().take(3).map(|(s, d)| format!("set {s}: +{d:.1}")).collect();
        println!(
            "{:<18} guessed={:<5} separation={:>6.2}  top: {}",
            r.defense,
            r.verdict.guessed.map_or("none".into(), |g| g.to_string()),
            r.verdict.separation,
            top.join(", ")
        );
    }
    Ok(())
}
