//! Spectre v1 with a flush-reload or prime-probe covert channel.
//!
//! Branch mistraining is implicit: the secret-dependent load is issued as a
//! transient load and squashed one cycle after a full memory round trip.

use super::{recover, setup, AttackOutput, AttackParams, Direction, RecoveryVerdict, TimingMatrix};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyConfig;

pub const SHARED_BASE: u64 = 0x10_0000;
pub const ATTACKER_BASE: u64 = 0x20_0000;
pub const SENDER_BASE: u64 = 0x40_0000;
/// Secret-independent target used by the dummy victim.
pub const DUMMY_TARGET: u64 = 0x70_0000;

fn squash_delay(cfg: &HierarchyConfig) -> u64 {
    cfg.memory_path() + 1
}

/// Flush the shared array, let the victim touch `shared[secret * step]`
/// transiently, then reload every candidate in a shuffled order.
pub fn run_spectre_fr(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    if p.step == 0 {
        return Err(Error::Scenario("step must be positive".into()));
    }
    let (mut sim, mut rng) = setup(cfg, p)?;
    let line = cfg.l1.line_bytes;
    let lines = (256 * p.step).div_ceil(line);
    let mut sums = vec![0.0; 256];
    let mut order: Vec<u64> = (0..256).collect();
    for _ in 0..p.trials {
        for l in 0..lines {
            sim.flush(SHARED_BASE + l * line)?;
        }
        let target = if p.dummy_victim { DUMMY_TARGET } else { SHARED_BASE + u64::from(p.secret) * p.step };
        sim.transient_load(target, squash_delay(cfg))?;
        rng.shuffle(&mut order);
        for &i in &order {
            sums[i as usize] += sim.load(SHARED_BASE + i * p.step)? as f64;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / p.trials as f64).collect();
    let r = recover(&means, Direction::Min, p.threshold_z)?;
    Ok(AttackOutput::new(
        TimingMatrix::new("row", "candidate", vec![means]),
        RecoveryVerdict::judge(r, u64::from(p.secret)),
        &sim,
    ))
}

/// Address of the attacker's line for (`set`, `way`).
fn attacker_line(cfg: &HierarchyConfig, set: u64, way: u64) -> u64 {
    ATTACKER_BASE + way * cfg.l1.way_size_bytes() + set * cfg.l1.line_bytes
}

/// Prime every L1 set, let the victim touch `sender[secret * line]`
/// transiently, probe every set. The same trial without a victim gives the
/// noise profile that is subtracted before recovery.
pub fn run_spectre_pp(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    let (mut sim, _) = setup(cfg, p)?;
    let sets = cfg.l1.num_sets as u64;
    let ways = cfg.l1.ways as u64;
    let mut with_victim = vec![0.0; sets as usize];
    let mut profile = vec![0.0; sets as usize];
    for _ in 0..p.trials {
        for victim_pass in [true, false] {
            for w in 0..ways {
                for s in 0..sets {
                    sim.load(attacker_line(cfg, s, w))?;
                }
            }
            if victim_pass && !p.dummy_victim {
                sim.transient_load(SENDER_BASE + u64::from(p.secret) * cfg.l1.line_bytes, squash_delay(cfg))?;
            } else {
                sim.wait(squash_delay(cfg))?;
            }
            for s in 0..sets {
                for w in 0..ways {
                    let t = sim.load(attacker_line(cfg, s, w))? as f64;
                    if victim_pass {
                        with_victim[s as usize] += t;
                    } else {
                        profile[s as usize] += t;
                    }
                }
            }
        }
    }
    let n = p.trials as f64;
    let with_victim: Vec<f64> = with_victim.iter().map(|v| v / n).collect();
    let profile: Vec<f64> = profile.iter().map(|v| v / n).collect();
    let diff: Vec<f64> = with_victim.iter().zip(&profile).map(|(a, b)| a - b).collect();
    let r = recover(&diff, Direction::Max, p.threshold_z)?;
    Ok(AttackOutput::new(
        TimingMatrix::new("pass", "set", vec![with_victim, profile]),
        RecoveryVerdict::judge(r, u64::from(p.secret) % sets),
        &sim,
    ))
}
