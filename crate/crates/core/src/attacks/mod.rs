//! Attacker/victim scenarios and the statistical secret-recovery analyzer.
//!
//! Every attack drives a single [`Simulator`] through phase-interleaved
//! attacker and victim steps on one core, then reduces its measurements to a
//! [`TimingMatrix`] and a [`RecoveryVerdict`].

mod aes;
mod spectre;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{DefenseKind, HierarchyConfig};
use crate::kernel::{stream, Rng};
use crate::speculative::Simulator;
use crate::workloads::Metrics;

pub use aes::{first_round_addresses, run_aes_collision, run_aes_evict_time, run_aes_fr, run_aes_pp, AesModel};
pub use spectre::{run_spectre_fr, run_spectre_pp};

/// Default z-score a candidate must reach before it counts as recovered.
pub const DEFAULT_THRESHOLD_Z: f64 = 4.0;

/// Smallest spread assumed for the other candidates. Latencies are whole
/// cycles, so a spread below one cycle is quantization, not signal-free
/// silence.
pub const MIN_SPREAD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingMatrix {
    pub row_label: String,
    pub col_label: String,
    pub cells: Vec<Vec<f64>>,
}

impl TimingMatrix {
    pub fn new(row_label: &str, col_label: &str, cells: Vec<Vec<f64>>) -> Self {
        Self { row_label: row_label.into(), col_label: col_label.into(), cells }
    }

    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn min(&self) -> f64 {
        self.cells.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with `#` comment lines for `meta`, a header row, then one row per
    /// candidate. Cells are printed with three decimals.
    pub fn to_csv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.row_label);
        for c in 0..self.cols() {
            let _ = write!(out, ",{}{c}", self.col_label);
        }
        out.push('\n');
        for (r, row) in self.cells.iter().enumerate() {
            let _ = write!(out, "{r}");
            for v in row {
                let _ = write!(out, ",{v:.3}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`TimingMatrix::to_csv`]. Rows must all
    /// have the header's width.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Csv("missing header row".into()))?;
        let head: Vec<&str> = header.split(',').collect();
        let width = head.len() - 1;
        let col_label = head
            .get(1)
            .map(|h| h.trim_end_matches(|c: char| c.is_ascii_digit()).to_string())
            .unwrap_or_default();
        let mut cells = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() - 1 != width {
                return Err(Error::Csv(format!(
                    "row {i} has {} cells, header has {width}",
                    fields.len() - 1
                )));
            }
            let row = fields[1..]
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Csv(format!("row {i}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        Ok(Self { row_label: head[0].to_string(), col_label, cells })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Min,
    Max,
}

/// Best candidate and how far it stands out, before comparing to the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub guessed: Option<u64>,
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryVerdict {
    pub guessed: Option<u64>,
    pub correct: bool,
    pub separation: f64,
    pub truth: u64,
}

impl RecoveryVerdict {
    pub fn judge(r: Recovery, truth: u64) -> Self {
        Self { guessed: r.guessed, correct: r.guessed == Some(truth), separation: r.separation, truth }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Picks the best candidate by `direction` and scores it as
/// `|best - mean(others)| / max(sd(others), MIN_SPREAD)` with the sample
/// standard deviation.
pub fn recover(values: &[f64], direction: Direction, threshold_z: f64) -> Result<Recovery> {
    if values.len() < 2 {
        return Err(Error::Scenario("recover needs at least two candidates".into()));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        let better = match direction {
            Direction::Min => v < values[best],
            Direction::Max => v > values[best],
        };
        if better {
            best = i;
        }
    }
    let others: Vec<f64> = values.iter().enumerate().filter(|&(i, _)| i != best).map(|(_, &v)| v).collect();
    let m = mean(&others);
    let gap = (values[best] - m).abs();
    let sd = if others.len() > 1 {
        (others.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (others.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let separation = gap / sd.max(MIN_SPREAD);
    let guessed = (separation >= threshold_z).then_some(best as u64);
    Ok(Recovery { guessed, separation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    SpectreFr,
    SpectrePp,
    AesPp,
    AesFr,
    AesEvictTime,
    AesCollision,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::SpectreFr,
        AttackKind::SpectrePp,
        AttackKind::AesPp,
        AttackKind::AesFr,
        AttackKind::AesEvictTime,
        AttackKind::AesCollision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::SpectreFr => "spectre-fr",
            AttackKind::SpectrePp => "spectre-pp",
            AttackKind::AesPp => "aes-pp",
            AttackKind::AesFr => "aes-fr",
            AttackKind::AesEvictTime => "aes-evict-time",
            AttackKind::AesCollision => "aes-collision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_spectre(self) -> bool {
        matches!(self, AttackKind::SpectreFr | AttackKind::SpectrePp)
    }

    /// Whether `defense` is meant to stop this attack.
    pub fn defended_by(self, defense: DefenseKind) -> bool {
        match defense {
            DefenseKind::RasPlus => true,
            DefenseKind::RasSpec => self.is_spectre(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    /// Spectre secret byte.
    pub secret: u8,
    /// Spectre flush-reload stride in bytes.
    pub step: u64,
    pub key: [u8; 16],
    /// Repetitions per candidate (or per input value for AES).
    pub trials: usize,
    /// Key byte targeted by the AES prime-probe and flush-reload attacks.
    pub target_byte: usize,
    pub threshold_z: f64,
    /// Replace the victim by one whose accesses ignore the secret.
    pub dummy_victim: bool,
    /// L1 MSHR count used by the collision attack.
    pub collision_l1_mshrs: usize,
    /// Fault injection: all requests fill-allowed.
    pub force_fill: bool,
    pub seed: u64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            secret: 30,
            step: 64,
            key: [0; 16],
            trials: 64,
            target_byte: 0,
            threshold_z: DEFAULT_THRESHOLD_Z,
            dummy_victim: false,
            collision_l1_mshrs: 1,
            force_fill: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub defense: String,
    pub matrix: TimingMatrix,
    pub verdict: RecoveryVerdict,
    pub metrics: Metrics,
    pub seed: u64,
}

/// What a single attack driver returns.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutput {
    pub matrix: TimingMatrix,
    pub verdict: RecoveryVerdict,
    pub metrics: Metrics,
}

impl AttackOutput {
    fn new(matrix: TimingMatrix, verdict: RecoveryVerdict, sim: &Simulator) -> Self {
        Self { matrix, verdict, metrics: Metrics::collect(sim) }
    }
}

pub fn run_attack(kind: AttackKind, cfg: &HierarchyConfig, p: &AttackParams) -> Result<AttackReport> {
    let out = match kind {
        AttackKind::SpectreFr => run_spectre_fr(cfg, p)?,
        AttackKind::SpectrePp => run_spectre_pp(cfg, p)?,
        AttackKind::AesPp => run_aes_pp(cfg, p)?,
        AttackKind::AesFr => run_aes_fr(cfg, p)?,
        AttackKind::AesEvictTime => run_aes_evict_time(cfg, p)?,
        AttackKind::AesCollision => run_aes_collision(cfg, p)?,
    };
    Ok(AttackReport {
        attack: kind,
        defense: cfg.defense.label(),
        matrix: out.matrix,
        verdict: out.verdict,
        metrics: out.metrics,
        seed: p.seed,
    })
}

/// Fresh simulator plus the attacker's own random stream.
fn setup(cfg: &HierarchyConfig, p: &AttackParams) -> Result<(Simulator, Rng)> {
    if p.trials == 0 {
        return Err(Error::Scenario("trials must be at least 1".into()));
    }
    let mut sim = Simulator::new(*cfg, p.seed)?;
    sim.force_fill(p.force_fill);
    Ok((sim, Rng::for_stream(p.seed, stream::WORKLOAD)))
}
