//! Synthetic memory traces and trace replay.
//!
//! A trace is a sequence of loads and stores with inter-issue gaps and
//! authorization delays. The text form is one record per line:
//!
//! ```text
//! # gap kind addr auth
//! 0 L 0x1000 0
//! 3 S 0x1040 0
//! 2 L 0x7f00 40
//! 1 L 0x2000 X
//! ```
//!
//! `auth` is the number of cycles after issue at which the op is authorized,
//! or `X` when it is squashed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cache::{LevelStats, NoFillSplit};
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyConfig;
use crate::kernel::{stream, Cycle, Rng};
use crate::shb::ShbStats;
use crate::speculative::{OpKind, Resolve, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub gap: Cycle,
    pub kind: TraceKind,
    pub addr: u64,
    /// Cycles from issue to authorization; `None` means squashed.
    pub auth_delta: Option<Cycle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuthLatency {
    Fixed(Cycle),
    Uniform(Cycle, Cycle),
}

impl AuthLatency {
    fn sample(self, rng: &mut Rng) -> Cycle {
        match self {
            AuthLatency::Fixed(c) => c,
            AuthLatency::Uniform(lo, hi) => lo + rng.below(hi - lo + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalityModel {
    pub base_addr: u64,
    pub working_set_bytes: u64,
    pub stride_bytes: u64,
    pub p_sequential: f64,
    pub p_reuse: f64,
    /// Share of loads issued before they are authorized.
    pub spec_fraction: f64,
    /// Share of speculative loads that end up squashed.
    pub p_squash: f64,
    pub p_store: f64,
    pub auth_latency: AuthLatency,
    pub gap_min: Cycle,
    pub gap_max: Cycle,
    /// Reuse draws pick from this many most recent addresses.
    pub reuse_depth: usize,
}

impl Default for LocalityModel {
    fn default() -> Self {
        Self {
            base_addr: 0x100_0000,
            working_set_bytes: 1 << 20,
            stride_bytes: 8,
            p_sequential: 0.3,
            p_reuse: 0.62,
            spec_fraction: 0.6,
            p_squash: 0.05,
            p_store: 0.2,
            auth_latency: AuthLatency::Uniform(5, 60),
            gap_min: 2,
            gap_max: 10,
            reuse_depth: 16,
        }
    }
}

impl LocalityModel {
    pub fn validate(&self) -> Result<()> {
        for (key, p) in [
            ("p_sequential", self.p_sequential),
            ("p_reuse", self.p_reuse),
            ("spec_fraction", self.spec_fraction),
            ("p_squash", self.p_squash),
            ("p_store", self.p_store),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("model.{key}"), "must be within [0, 1]"));
            }
        }
        if self.p_sequential + self.p_reuse > 1.0 {
            return Err(Error::config("model.p_reuse", "p_sequential + p_reuse exceeds 1"));
        }
        if self.working_set_bytes < self.stride_bytes.max(1) {
            return Err(Error::config("model.working_set_bytes", "smaller than one stride"));
        }
        if self.gap_min > self.gap_max {
            return Err(Error::config("model.gap_min", "exceeds gap_max"));
        }
        if let AuthLatency::Uniform(lo, hi) = self.auth_latency {
            if lo > hi {
                return Err(Error::config("model.auth_latency", "lower bound exceeds upper bound"));
            }
        }
        if self.reuse_depth == 0 {
            return Err(Error::config("model.reuse_depth", "must be at least 1"));
        }
        Ok(())
    }
}

/// Which branch of the mixture produced an address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrSource {
    Sequential,
    Reuse,
    Uniform,
}

/// Streaming form of [`generate_trace`].
#[derive(Debug, Clone)]
pub struct TraceGenerator {
    model: LocalityModel,
    rng: Rng,
    prev: u64,
    recent: Vec<u64>,
    started: bool,
}

impl TraceGenerator {
    pub fn new(model: LocalityModel, rng: Rng) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, rng, prev: model.base_addr, recent: Vec::new(), started: false })
    }

    fn address(&mut self) -> (u64, AddrSource) {
        let m = &self.model;
        if !self.started {
            self.started = true;
            return (m.base_addr, AddrSource::Sequential);
        }
        let u = self.rng.next_f64();
        if u < m.p_sequential {
            let off = (self.prev - m.base_addr + m.stride_bytes) % m.working_set_bytes;
            (m.base_addr + off, AddrSource::Sequential)
        } else if u < m.p_sequential + m.p_reuse && !self.recent.is_empty() {
            let i = self.rng.below(self.recent.len() as u64) as usize;
            (self.recent[i], AddrSource::Reuse)
        } else {
            let words = m.working_set_bytes / 8;
            (m.base_addr + self.rng.below(words) * 8, AddrSource::Uniform)
        }
    }

    pub fn next_record(&mut self) -> (TraceRecord, AddrSource) {
        let (addr, src) = self.address();
        self.prev = addr;
        if self.recent.len() == self.model.reuse_depth {
            self.recent.remove(0);
        }
        self.recent.push(addr);
        let m = self.model;
        let gap = m.gap_min + self.rng.below(m.gap_max - m.gap_min + 1);
        let kind = if self.rng.chance(m.p_store) { TraceKind::Store } else { TraceKind::Load };
        let auth_delta = if kind == TraceKind::Load && self.rng.chance(m.spec_fraction) {
            if self.rng.chance(m.p_squash) {
                None
            } else {
                Some(m.auth_latency.sample(&mut self.rng).max(1))
            }
        } else {
            Some(0)
        };
        (TraceRecord { gap, kind, addr, auth_delta }, src)
    }
}

pub fn generate_trace(model: &LocalityModel, n: usize, rng: Rng) -> Result<Vec<TraceRecord>> {
    if n == 0 {
        return Err(Error::Scenario("trace length must be at least 1".into()));
    }
    let mut g = TraceGenerator::new(*model, rng)?;
    Ok((0..n).map(|_| g.next_record().0).collect())
}

/// Trace of the default model with the workload stream of `seed`.
pub fn default_trace(n: usize, seed: u64) -> Result<Vec<TraceRecord>> {
    generate_trace(&LocalityModel::default(), n, Rng::for_stream(seed, stream::WORKLOAD))
}

pub fn format_trace(records: &[TraceRecord]) -> String {
    let mut out = String::from("# gap kind addr auth\n");
    for r in records {
        let kind = match r.kind {
            TraceKind::Load => 'L',
            TraceKind::Store => 'S',
        };
        let _ = match r.auth_delta {
            Some(a) => writeln!(out, "{} {kind} {:#x} {a}", r.gap, r.addr),
            None => writeln!(out, "{} {kind} {:#x} X", r.gap, r.addr),
        };
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Trace { line, msg };
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let gap = fields[0].parse().map_err(|e| err(format!("bad gap `{}`: {e}", fields[0])))?;
        let kind = match fields[1] {
            "L" => TraceKind::Load,
            "S" => TraceKind::Store,
            k => return Err(err(format!("bad kind `{k}`, expected L or S"))),
        };
        let hex = fields[2].strip_prefix("0x").or_else(|| fields[2].strip_prefix("0X")).unwrap_or(fields[2]);
        let addr = u64::from_str_radix(hex, 16).map_err(|e| err(format!("bad address `{}`: {e}", fields[2])))?;
        let auth_delta = match fields[3] {
            "X" => None,
            a => Some(a.parse().map_err(|e| err(format!("bad auth delta `{a}`: {e}")))?),
        };
        out.push(TraceRecord { gap, kind, addr, auth_delta });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayOptions {
    /// Cycles after issue at which a squashed op is squashed.
    pub squash_delay: Cycle,
    pub seed: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { squash_delay: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub l1: LevelStats,
    pub l2: LevelStats,
    pub nofill_l1: NoFillSplit,
    pub nofill_l2: NoFillSplit,
    pub shb: ShbStats,
    pub memory_writebacks: u64,
    pub cycles_total: Cycle,
    pub ops: u64,
}

impl Metrics {
    pub fn collect(sim: &Simulator) -> Self {
        let h = sim.hierarchy();
        Self {
            l1: *h.l1().stats(),
            l2: *h.l2().stats(),
            nofill_l1: *h.l1().nofill_split(),
            nofill_l2: *h.l2().nofill_split(),
            shb: sim.shb().map(|s| *s.stats()).unwrap_or_default(),
            memory_writebacks: h.memory_writebacks(),
            cycles_total: sim.now(),
            ops: sim.rob().len() as u64,
        }
    }

    pub fn miss_rate_l1(&self) -> f64 {
        ratio(self.l1.misses, self.l1.accesses)
    }

    pub fn miss_rate_l2(&self) -> f64 {
        ratio(self.l2.misses, self.l2.accesses)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Percentages of no-fill MSHRs that were never cleared, cleared by an SHB
/// Fetch, or cleared by a later non-speculative access.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPercentages {
    pub never_cleared: f64,
    pub cleared_by_shb_fetch: f64,
    pub cleared_by_nonspec_access: f64,
}

impl From<&NoFillSplit> for SplitPercentages {
    fn from(s: &NoFillSplit) -> Self {
        let (never_cleared, cleared_by_shb_fetch, cleared_by_nonspec_access) = s.percentages();
        Self { never_cleared, cleared_by_shb_fetch, cleared_by_nonspec_access }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub l1: SplitPercentages,
    pub l2: SplitPercentages,
}

pub fn nofill_split_report(m: &Metrics) -> SplitReport {
    SplitReport { l1: (&m.nofill_l1).into(), l2: (&m.nofill_l2).into() }
}

/// Loads the trace into a simulator without running it. Authorization times
/// are raised where needed so they never precede an older op's.
pub fn load_trace(sim: &mut Simulator, trace: &[TraceRecord], opts: &ReplayOptions) -> Result<()> {
    let mut t = sim.now();
    let mut last_auth = 0;
    for r in trace {
        t += r.gap;
        let resolve = match r.auth_delta {
            Some(a) => {
                last_auth = (t + a).max(last_auth);
                Resolve::AuthorizeAt(last_auth)
            }
            None => Resolve::SquashAt(t + opts.squash_delay),
        };
        let kind = match r.kind {
            TraceKind::Load => OpKind::Load,
            TraceKind::Store => OpKind::Store,
        };
        sim.push(kind, r.addr, t, resolve)?;
    }
    Ok(())
}

pub fn replay(trace: &[TraceRecord], cfg: &HierarchyConfig, opts: &ReplayOptions) -> Result<Metrics> {
    let mut sim = Simulator::new(*cfg, opts.seed)?;
    load_trace(&mut sim, trace, opts)?;
    sim.run_to_quiet()?;
    Ok(Metrics::collect(&sim))
}
