//! The four first-round AES T-table attacks against the unprotected cache
//! and RaS+ with a full-set-coverage window.

use rascache::attacks::{run_attack, AttackKind, AttackParams};
use rascache::{DefenseMode, HierarchyConfig};

fn main() -> rascache::Result<()> {
    let mut key = [0u8; 16];
    key[3] = 0x65;
    key[7] = 0x5e;
    key[0] = 0x0f;
    key[4] = 0xe6;
    let attacks = [
        (AttackKind::AesPp, AttackParams { key, target_byte: 1, trials: 16, ..Default::default() }),
        (AttackKind::AesFr, AttackParams { key, target_byte: 1, trials: 16, ..Default::default() }),
        (AttackKind::AesEvictTime, AttackParams { key, trials: 16, ..Default::default() }),
        (AttackKind::AesCollision, AttackParams { key, trials: 8, ..Default::default() }),
    ];
    for defense in [DefenseMode::baseline(), DefenseMode::ras_plus_default()] {
        let cfg = HierarchyConfig::new(defense);
        for (kind, params) in &attacks {
            let r = run_attack(*kind, &cfg, params)?;
            println!(
                "{:<18} {:<15} truth={:#x} guessed={:<5} correct={:<5} separation={:.2}",
                r.defense,
                kind.name(),
                r.verdict.truth,
                r.verdict.guessed.map_or("none".into(), |g| format!("{g:#x}")),
                r.verdict.correct,
                r.verdict.separation
            );
        }
    }
    Ok(())
}
