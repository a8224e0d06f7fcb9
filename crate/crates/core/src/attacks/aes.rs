//! Cache attacks on the first round of table-based AES-128.
//!
//! Only the 16 first-round lookups are modeled. Byte `i` reads table
//! `T[i % 4]` at index `D[i] ^ K[i]`; the four 1 KiB tables sit back to back
//! in one 4 KiB region, so each table covers 16 lines.

use serde::{Deserialize, Serialize};

use super::{recover, setup, AttackOutput, AttackParams, Direction, Recovery, RecoveryVerdict, TimingMatrix};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyConfig;
use crate::kernel::Rng;
use crate::speculative::Simulator;

pub const TABLE_BASE: u64 = 0x80_0000;
pub const EVICT_BASE: u64 = 0x90_0000;
/// Attacker's prime-probe array.
pub const PRIME_BASE: u64 = 0x20_0000;

const TABLE_BYTES: u64 = 1024;
const ENTRY_BYTES: u64 = 4;
const REGION_BYTES: u64 = 4 * TABLE_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AesModel {
    pub key: [u8; 16],
    pub table_base: u64,
    pub entry_bytes: u64,
}

impl AesModel {
    pub fn new(key: [u8; 16]) -> Self {
        Self { key, table_base: TABLE_BASE, entry_bytes: ENTRY_BYTES }
    }

    pub fn table_bases(&self) -> [u64; 4] {
        std::array::from_fn(|t| self.table_base + t as u64 * TABLE_BYTES)
    }

    pub fn region_lines(&self, line_bytes: u64) -> impl Iterator<Item = u64> {
        let base = self.table_base;
        (0..REGION_BYTES / line_bytes).map(move |l| base + l * line_bytes)
    }
}

/// The 16 first-round lookup addresses, in byte order.
pub fn first_round_addresses(model: &AesModel, input: &[u8; 16]) -> [u64; 16] {
    let bases = model.table_bases();
    std::array::from_fn(|i| bases[i % 4] + u64::from(input[i] ^ model.key[i]) * model.entry_bytes)
}

fn random_input(rng: &mut Rng) -> [u8; 16] {
    let mut d = [0u8; 16];
    d[..8].copy_from_slice(&rng.next_u64().to_le_bytes());
    d[8..].copy_from_slice(&rng.next_u64().to_le_bytes());
    d
}

fn victim_addresses(model: &AesModel, input: &[u8; 16], dummy: bool) -> [u64; 16] {
    if dummy {
        first_round_addresses(model, &model.key)
    } else {
        first_round_addresses(model, input)
    }
}

fn check_target(b: usize) -> Result<usize> {
    if b >= 16 {
        return Err(Error::Scenario(format!("target byte {b} out of range 0..16")));
    }
    Ok(b)
}

/// Candidate-nibble scores from a 256-row matrix: the score of `k` is the
/// mean over inputs `d` of the column holding line `(d >> 4) ^ k` of
/// `table`.
fn nibble_scores(cells: &[Vec<f64>], col_of_line: impl Fn(u64) -> usize) -> Vec<f64> {
    (0..16u64)
        .map(|k| {
            let total: f64 = cells.iter().enumerate().map(|(d, row)| row[col_of_line((d as u64 >> 4) ^ k)]).sum();
            total / cells.len() as f64
        })
        .collect()
}

/// Mean of each 16-value block of a 256-entry series.
fn group_by_high_nibble(series: &[f64]) -> Vec<f64> {
    series.chunks(16).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn prime_line(cfg: &HierarchyConfig, set: u64, way: u64) -> u64 {
    PRIME_BASE + way * cfg.l1.way_size_bytes() + set * cfg.l1.line_bytes
}

/// Prime all L1 sets, encrypt, probe all sets. Rows are the swept input
/// byte, columns the L1 sets.
pub fn run_aes_pp(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    let b = check_target(p.target_byte)?;
    let (mut sim, mut rng) = setup(cfg, p)?;
    let model = AesModel::new(p.key);
    let sets = cfg.l1.num_sets as u64;
    let ways = cfg.l1.ways as u64;
    let mut cells = vec![vec![0.0; sets as usize]; 256];
    for (d, row) in cells.iter_mut().enumerate() {
        for _ in 0..p.trials {
            let mut input = random_input(&mut rng);
            input[b] = d as u8;
            for w in 0..ways {
                for s in 0..sets {
                    sim.load(prime_line(cfg, s, w))?;
                }
            }
            sim.load_all(&victim_addresses(&model, &input, p.dummy_victim))?;
            for s in 0..sets {
                for w in 0..ways {
                    row[s as usize] += sim.load(prime_line(cfg, s, w))? as f64;
                }
            }
        }
        row.iter_mut().for_each(|v| *v /= p.trials as f64);
    }
    let table = model.table_bases()[b % 4];
    let scores = nibble_scores(&cells, |line| cfg.l1.set_index(table + line * cfg.l1.line_bytes) as usize);
    let r = recover(&scores, Direction::Max, p.threshold_z)?;
    Ok(AttackOutput::new(TimingMatrix::new("input", "set", cells), RecoveryVerdict::judge(r, u64::from(p.key[b] >> 4)), &sim))
}

/// Flush the table region, encrypt, reload every line of the region. Rows
/// are the swept input byte, columns the 64 lines of the region.
pub fn run_aes_fr(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    let b = check_target(p.target_byte)?;
    let (mut sim, mut rng) = setup(cfg, p)?;
    let model = AesModel::new(p.key);
    let lb = cfg.l1.line_bytes;
    let lines: Vec<u64> = model.region_lines(lb).collect();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    let mut cells = vec![vec![0.0; lines.len()]; 256];
    for (d, row) in cells.iter_mut().enumerate() {
        for _ in 0..p.trials {
            let mut input = random_input(&mut rng);
            input[b] = d as u8;
            for &l in &lines {
                sim.flush(l)?;
            }
            sim.load_all(&victim_addresses(&model, &input, p.dummy_victim))?;
            rng.shuffle(&mut order);
            for &i in &order {
                row[i] += sim.load(lines[i])? as f64;
            }
        }
        row.iter_mut().for_each(|v| *v /= p.trials as f64);
    }
    let first = ((model.table_bases()[b % 4] - model.table_base) / lb) as usize;
    let scores = nibble_scores(&cells, |line| first + line as usize);
    let r = recover(&scores, Direction::Min, p.threshold_z)?;
    Ok(AttackOutput::new(TimingMatrix::new("input", "line", cells), RecoveryVerdict::judge(r, u64::from(p.key[b] >> 4)), &sim))
}

/// Mean encryption time for each value of `input[byte]`, with the victim's
/// set `evict_set` evicted before every encryption.
fn evict_time_sweep(
    sim: &mut Simulator,
    rng: &mut Rng,
    cfg: &HierarchyConfig,
    p: &AttackParams,
    model: &AesModel,
    byte: usize,
    evict_set: u64,
) -> Result<Vec<f64>> {
    let lb = cfg.l1.line_bytes;
    let mut series = vec![0.0; 256];
    for (d, slot) in series.iter_mut().enumerate() {
        for _ in 0..p.trials {
            let mut input = random_input(rng);
            input[byte] = d as u8;
            for l in model.region_lines(lb) {
                sim.load(l)?;
            }
            for w in 0..cfg.l1.ways as u64 {
                sim.load(EVICT_BASE + w * cfg.l1.way_size_bytes() + evict_set * lb)?;
            }
            *slot += sim.load_all(&victim_addresses(model, &input, p.dummy_victim))? as f64;
        }
        *slot /= p.trials as f64;
    }
    Ok(series)
}

/// Evicts the set holding the last line of `T4`, then times encryptions
/// while sweeping `D4` and then `D8` (both read `T4`). The slow high nibble
/// of each sweep is `0xF ^ (K >> 4)`, so their xor gives `(K4 ^ K8) >> 4`.
pub fn run_aes_evict_time(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    let (mut sim, mut rng) = setup(cfg, p)?;
    let model = AesModel::new(p.key);
    let lb = cfg.l1.line_bytes;
    let evict_set = cfg.l1.set_index(model.table_bases()[3] + TABLE_BYTES - lb) as u64;
    let (b1, b2) = (3, 7);
    let s1 = evict_time_sweep(&mut sim, &mut rng, cfg, p, &model, b1, evict_set)?;
    let s2 = evict_time_sweep(&mut sim, &mut rng, cfg, p, &model, b2, evict_set)?;
    let r1 = recover(&group_by_high_nibble(&s1), Direction::Max, p.threshold_z)?;
    let r2 = recover(&group_by_high_nibble(&s2), Direction::Max, p.threshold_z)?;
    let r = Recovery {
        guessed: r1.guessed.zip(r2.guessed).map(|(a, b)| a ^ b),
        separation: r1.separation.min(r2.separation),
    };
    let truth = u64::from((p.key[b1] ^ p.key[b2]) >> 4);
    Ok(AttackOutput::new(TimingMatrix::new("sweep", "input", vec![s1, s2]), RecoveryVerdict::judge(r, truth), &sim))
}

/// Flushes the tables and times encryptions with `D1 ^ D5` fixed per
/// column. A collision between the two `T1` lookups saves one miss, so the
/// fastest high nibble of `D1 ^ D5` is that of `K1 ^ K5`.
pub fn run_aes_collision(cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackOutput> {
    let mut cfg = *cfg;
    cfg.l1.mshr_entries = p.collision_l1_mshrs.max(1);
    let (mut sim, mut rng) = setup(&cfg, p)?;
    let model = AesModel::new(p.key);
    let lines: Vec<u64> = model.region_lines(cfg.l1.line_bytes).collect();
    let mut series = vec![0.0; 256];
    for (x, slot) in series.iter_mut().enumerate() {
        for _ in 0..p.trials {
            let mut input = random_input(&mut rng);
            input[4] = input[0] ^ x as u8;
            for &l in &lines {
                sim.flush(l)?;
            }
            *slot += sim.load_all(&victim_addresses(&model, &input, p.dummy_victim))? as f64;
        }
        *slot /= p.trials as f64;
    }
    let r = recover(&group_by_high_nibble(&series), Direction::Min, p.threshold_z)?;
    let truth = u64::from((p.key[0] ^ p.key[4]) >> 4);
    Ok(AttackOutput::new(TimingMatrix::new("row", "xor", vec![series]), RecoveryVerdict::judge(r, truth), &sim))
}
