//! L1D + L2 + fixed-latency memory.
//!
//! Memory returns are deterministic, so the cycle at which a miss completes
//! is known when its MSHR is allocated. The hierarchy hands that cycle back
//! as a [`FillEvent`]; the owner schedules it and calls
//! [`Hierarchy::fill_return`] when it fires.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cache::{
    CacheGeometry, CacheLevel, ClearCause, FillResult, FlushOutcome, LevelRequest, LookupOutcome, MissOrigin,
    MshrEntry, NoFillClearOutcome, ReplacementPolicy, RequestId, WritebackEntry,
};
use crate::error::{Error, Result};
use crate::kernel::{stream, Cycle, Rng};
use crate::shb::window_base;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefenseKind {
    BaselineLru,
    SaRandomRepl,
    RasSpec,
    RasPlus,
    RandomFill,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::BaselineLru => "baseline-lru",
            DefenseKind::SaRandomRepl => "sa-rr",
            DefenseKind::RasSpec => "ras-spec",
            DefenseKind::RasPlus => "ras-plus",
            DefenseKind::RandomFill => "random-fill",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "baseline-lru" | "baseline" => DefenseKind::BaselineLru,
            "sa-rr" => DefenseKind::SaRandomRepl,
            "ras-spec" => DefenseKind::RasSpec,
            "ras-plus" => DefenseKind::RasPlus,
            "random-fill" => DefenseKind::RandomFill,
            _ => return None,
        })
    }

    pub fn uses_shb(self) -> bool {
        matches!(self, DefenseKind::RasSpec | DefenseKind::RasPlus)
    }

    pub fn replacement(self) -> ReplacementPolicy {
        match self {
            DefenseKind::BaselineLru => ReplacementPolicy::Lru,
            _ => ReplacementPolicy::Random,
        }
    }
}

/// Defense selection plus the R/E/W knobs (`R3E4W64` style labels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefenseMode {
    pub kind: DefenseKind,
    pub rate_cycles: Cycle,
    pub shb_entries: usize,
    pub window_lines: u64,
    /// NoFillClear from SHB Fetches. Disabling it is an ablation knob.
    pub nofill_clear: bool,
}

impl DefenseMode {
    pub fn baseline() -> Self {
        Self { kind: DefenseKind::BaselineLru, rate_cycles: 1, shb_entries: 1, window_lines: 1, nofill_clear: true }
    }

    pub fn sa_random() -> Self {
        Self { kind: DefenseKind::SaRandomRepl, ..Self::baseline() }
    }

    pub fn ras_spec(rate: Cycle, entries: usize, window: u64) -> Self {
        Self { kind: DefenseKind::RasSpec, rate_cycles: rate, shb_entries: entries, window_lines: window, nofill_clear: true }
    }

    pub fn ras_plus(rate: Cycle, entries: usize, window: u64) -> Self {
        Self { kind: DefenseKind::RasPlus, ..Self::ras_spec(rate, entries, window) }
    }

    pub fn random_fill(window: u64) -> Self {
        Self { kind: DefenseKind::RandomFill, window_lines: window, ..Self::baseline() }
    }

    /// Best-performing RaS-Spec setting: R3 E1 W4.
    pub fn ras_spec_default() -> Self {
        Self::ras_spec(3, 1, 4)
    }

    /// Full-set-coverage RaS+ setting: R3 E4 W64.
    pub fn ras_plus_default() -> Self {
        Self::ras_plus(3, 4, 64)
    }

    pub fn label(&self) -> String {
        match self.kind {
            DefenseKind::RasSpec | DefenseKind::RasPlus => format!(
                "{}-R{}E{}W{}{}",
                self.kind.name(),
                self.rate_cycles,
                self.shb_entries,
                self.window_lines,
                if self.nofill_clear { "" } else { "-noclear" }
            ),
            DefenseKind::RandomFill => format!("{}-W{}", self.kind.name(), self.window_lines),
            k => k.name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, DefenseKind::RasSpec | DefenseKind::RasPlus | DefenseKind::RandomFill) {
            if self.rate_cycles < 1 {
                return Err(Error::config("rate", "must be at least 1"));
            }
            if self.shb_entries < 1 {
                return Err(Error::config("entries", "must be at least 1"));
            }
            if self.window_lines < 1 || !self.window_lines.is_power_of_two() {
                return Err(Error::config("window", "must be a power of two"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub l1: CacheGeometry,
    pub l2: CacheGeometry,
    pub mem_latency: Cycle,
    pub l2_latency: Cycle,
    pub defense: DefenseMode,
    /// Drops the NoFill bit from writebacks. Only for demonstrating the
    /// writeback channel the bit closes.
    #[serde(default)]
    pub strip_writeback_nofill: bool,
}

impl HierarchyConfig {
    pub fn new(defense: DefenseMode) -> Self {
        Self {
            l1: CacheGeometry::default_l1(),
            l2: CacheGeometry::default_l2(),
            mem_latency: 150,
            l2_latency: 12,
            defense,
            strip_writeback_nofill: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.l1.validate("l1")?;
        self.l2.validate("l2")?;
        if self.l1.line_bytes != self.l2.line_bytes {
            return Err(Error::config("l2.line_bytes", "must equal l1.line_bytes"));
        }
        self.defense.validate()
    }

    pub fn l2_hit_path(&self) -> Cycle {
        self.l1.hit_latency + self.l2_latency
    }

    pub fn memory_path(&self) -> Cycle {
        self.l1.hit_latency + self.l2_latency + self.mem_latency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillSuppression {
    None,
    L1,
    L2,
    Both,
}

/// Timing of one demand access as issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessOutcome {
    pub total_latency: Cycle,
    pub l1_hit: bool,
    pub l2_hit: bool,
    /// NoFill status of the request at issue time. A later NoFillClear can
    /// still turn a suppressed fill into a real one.
    pub fill_suppressed_at: FillSuppression,
    /// Completed by merging into an already pending miss.
    pub merged: bool,
}

/// A pending line return the owner must schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FillEvent {
    pub at: Cycle,
    pub line_addr: u64,
    /// The miss went to memory, so L2 also has an MSHR to complete.
    pub from_memory: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessResult {
    Done { outcome: AccessOutcome, fills: Vec<FillEvent> },
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoFillClearResult {
    ClearedL1,
    ClearedL1L2,
    ClearedL2,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShbFetchOutcome {
    /// Line already in L1; nothing changes.
    Resident,
    /// A miss for the line was pending; NoFillClear was applied to it.
    Pending(NoFillClearResult),
    Issued(FillEvent),
    /// No MSHR available; the fetch is lost.
    Dropped,
}

/// How a line came to be installed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillProvenance {
    /// Miss allocated fill-allowed by a demand access.
    Demand,
    /// Demand miss allocated no-fill, later cleared.
    Cleared(ClearCause),
    ShbFetch,
    RandomFill,
    /// L2 allocation by a fill-allowed writeback.
    Writeback,
    /// L2 allocation by a writeback whose NoFill bit was stripped.
    StrippedNoFillWriteback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillRecord {
    pub cycle: Cycle,
    pub level: Level,
    pub line_addr: u64,
    pub provenance: FillProvenance,
    pub requesters: Vec<RequestId>,
    pub shb_source: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    cfg: HierarchyConfig,
    l1: CacheLevel,
    l2: CacheLevel,
    repl_rng: Rng,
    rf_rng: Rng,
    pending_return: HashMap<u64, (Cycle, bool)>,
    fill_log: Option<Vec<FillRecord>>,
    memory_writebacks: u64,
    rf_dropped: u64,
}

impl Hierarchy {
    pub fn new(cfg: HierarchyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let policy = cfg.defense.kind.replacement();
        let mut l2_geom = cfg.l2;
        l2_geom.hit_latency = cfg.l2_latency;
        Ok(Self {
            cfg,
            l1: CacheLevel::new(cfg.l1, policy),
            l2: CacheLevel::new(l2_geom, policy),
            repl_rng: Rng::for_stream(seed, stream::REPLACEMENT),
            rf_rng: Rng::for_stream(seed, stream::SHB_WINDOW),
            pending_return: HashMap::new(),
            fill_log: None,
            memory_writebacks: 0,
            rf_dropped: 0,
        })
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.cfg
    }

    pub fn l1(&self) -> &CacheLevel {
        &self.l1
    }

    pub fn l2(&self) -> &CacheLevel {
        &self.l2
    }

    pub fn memory_writebacks(&self) -> u64 {
        self.memory_writebacks
    }

    pub fn random_fill_dropped(&self) -> u64 {
        self.rf_dropped
    }

    pub fn record_fills(&mut self, on: bool) {
        self.fill_log = on.then(Vec::new);
    }

    pub fn fill_log(&self) -> &[FillRecord] {
        self.fill_log.as_deref().unwrap_or(&[])
    }

    pub fn line_addr(&self, addr: u64) -> u64 {
        self.cfg.l1.line_addr(addr)
    }

    fn log(&mut self, rec: FillRecord) {
        if let Some(log) = self.fill_log.as_mut() {
            log.push(rec);
        }
    }

    /// Would a miss on `line` at L2 find neither the line, a pending MSHR,
    /// nor a free MSHR?
    fn l2_would_block(&self, line: u64) -> bool {
        !self.l2.contains(line) && self.l2.find_mshr(line).is_none() && !self.l2.has_free_mshr()
    }

    /// Sends a request that missed L1 and allocated `line` on to L2.
    fn forward_to_l2(&mut self, req: &LevelRequest, line: u64, now: Cycle) -> (FillEvent, bool) {
        let l1_lat = self.cfg.l1.hit_latency;
        let l2_req = LevelRequest { addr: line, ..*req };
        let (at, from_memory, l2_hit) = match self.l2.lookup(&l2_req, now) {
            LookupOutcome::Hit { .. } => (now + l1_lat + self.cfg.l2_latency, false, true),
            LookupOutcome::MissAllocated(_) => (now + self.cfg.memory_path(), true, false),
            LookupOutcome::MissMerged(_) => {
                let (at, _) = self.pending_return[&line];
                (at, true, false)
            }
            LookupOutcome::Blocked => unreachable!("checked by l2_would_block"),
        };
        self.pending_return.insert(line, (at, l2_hit));
        (FillEvent { at, line_addr: line, from_memory }, l2_hit)
    }

    /// Routes one demand access. `req.origin` must be `Demand`.
    pub fn access(&mut self, req: LevelRequest, now: Cycle) -> AccessResult {
        let line = self.line_addr(req.addr);
        if !self.l1.contains(line) && self.l1.find_mshr(line).is_none() && self.l2_would_block(line) {
            return AccessResult::Blocked;
        }
        let l1_lat = self.cfg.l1.hit_latency;
        match self.l1.lookup(&req, now) {
            LookupOutcome::Hit { latency } => AccessResult::Done {
                outcome: AccessOutcome {
                    total_latency: latency,
                    l1_hit: true,
                    l2_hit: false,
                    fill_suppressed_at: FillSuppression::None,
                    merged: false,
                },
                fills: Vec::new(),
            },
            LookupOutcome::Blocked => AccessResult::Blocked,
            LookupOutcome::MissMerged(_) => {
                if !req.no_fill {
                    // The fill-allowed access also lifts NoFill in L2.
                    self.l2.clear_by_access(line, now);
                }
                let (at, l2_hit) = self.pending_return[&line];
                AccessResult::Done {
                    outcome: AccessOutcome {
                        total_latency: at.saturating_sub(now).max(l1_lat),
                        l1_hit: false,
                        l2_hit,
                        fill_suppressed_at: FillSuppression::None,
                        merged: true,
                    },
                    fills: Vec::new(),
                }
            }
            LookupOutcome::MissAllocated(_) => {
                let (ev, l2_hit) = self.forward_to_l2(&req, line, now);
                let mut fills = vec![ev];
                if self.cfg.defense.kind == DefenseKind::RandomFill {
                    if let Some(rf) = self.random_fill_fetch(req.addr, now) {
                        fills.push(rf);
                    }
                }
                let fill_suppressed_at = match (req.no_fill, l2_hit) {
                    (false, _) => FillSuppression::None,
                    (true, true) => FillSuppression::L1,
                    (true, false) => FillSuppression::Both,
                };
                AccessResult::Done {
                    outcome: AccessOutcome {
                        total_latency: ev.at - now,
                        l1_hit: false,
                        l2_hit,
                        fill_suppressed_at,
                        merged: false,
                    },
                    fills,
                }
            }
        }
    }

    /// Random Fill comparison mode: one random line from the demand's window.
    fn random_fill_fetch(&mut self, addr: u64, now: Cycle) -> Option<FillEvent> {
        let w = self.cfg.defense.window_lines;
        let lb = self.cfg.l1.line_bytes;
        let target = window_base(addr, w, lb) + self.rf_rng.below(w) * lb;
        let req = LevelRequest {
            addr: target,
            no_fill: false,
            is_store: false,
            origin: MissOrigin::RandomFill,
            requester: None,
            shb_source: None,
        };
        self.prefetch(req, now)
    }

    /// Fill-allowed prefetch into both levels. Returns the fill event when a
    /// new miss was allocated.
    fn prefetch(&mut self, req: LevelRequest, now: Cycle) -> Option<FillEvent> {
        let line = self.line_addr(req.addr);
        if self.l1.contains(line) {
            return None;
        }
        if !self.l1.has_free_mshr() || self.l2_would_block(line) {
            self.rf_dropped += 1;
            return None;
        }
        if self.l1.find_mshr(line).is_some() {
            self.l1.lookup(&req, now);
            self.l2.clear_by_access(line, now);
            return None;
        }
        match self.l1.lookup(&req, now) {
            LookupOutcome::MissAllocated(_) => Some(self.forward_to_l2(&req, line, now).0),
            LookupOutcome::Blocked => {
                self.rf_dropped += 1;
                None
            }
            _ => None,
        }
    }

    /// Applies NoFillClear at L1, then L2.
    pub fn propagate_nofillclear(&mut self, line_addr: u64, shb_source: Option<u64>, now: Cycle) -> NoFillClearResult {
        let l1 = self.l1.apply_nofillclear(line_addr, shb_source, now) == NoFillClearOutcome::Cleared;
        let l2 = self.l2.apply_nofillclear(line_addr, shb_source, now) == NoFillClearOutcome::Cleared;
        match (l1, l2) {
            (true, true) => NoFillClearResult::ClearedL1L2,
            (true, false) => NoFillClearResult::ClearedL1,
            (false, true) => {
                debug_assert!(false, "L2 MSHR without a matching L1 MSHR");
                NoFillClearResult::ClearedL2
            }
            (false, false) => NoFillClearResult::NoMatch,
        }
    }

    /// SHB Fetch of `line_addr`, selected from the window of `source`.
    pub fn shb_fetch(&mut self, fetch_addr: u64, source: u64, now: Cycle) -> ShbFetchOutcome {
        let line = self.line_addr(fetch_addr);
        if self.l1.contains(line) {
            return ShbFetchOutcome::Resident;
        }
        // Without a free MSHR the whole operation is dropped, NoFillClear
        // included. Otherwise only fetches matching a pending demand miss
        // would take effect, which biases fills toward the victim's lines.
        if !self.l1.has_free_mshr() || self.l2_would_block(line) {
            return ShbFetchOutcome::Dropped;
        }
        if self.l1.find_mshr(line).is_some() {
            if !self.cfg.defense.nofill_clear {
                return ShbFetchOutcome::Pending(NoFillClearResult::NoMatch);
            }
            return ShbFetchOutcome::Pending(self.propagate_nofillclear(line, Some(source), now));
        }
        let req = LevelRequest {
            addr: line,
            no_fill: false,
            is_store: false,
            origin: MissOrigin::ShbFetch,
            requester: None,
            shb_source: Some(source),
        };
        match self.l1.lookup(&req, now) {
            LookupOutcome::MissAllocated(_) => ShbFetchOutcome::Issued(self.forward_to_l2(&req, line, now).0),
            _ => ShbFetchOutcome::Dropped,
        }
    }

    fn provenance(m: &MshrEntry) -> FillProvenance {
        match (m.origin, m.cleared) {
            (MissOrigin::ShbFetch, _) => FillProvenance::ShbFetch,
            (MissOrigin::RandomFill, _) => FillProvenance::RandomFill,
            (MissOrigin::Demand, Some((cause, _))) if m.allocated_no_fill => FillProvenance::Cleared(cause),
            (MissOrigin::Demand, _) => FillProvenance::Demand,
        }
    }

    /// Completes the pending miss for `ev.line_addr` at both levels.
    pub fn fill_return(&mut self, ev: FillEvent, now: Cycle) -> Result<Vec<RequestId>> {
        let line = ev.line_addr;
        self.pending_return.remove(&line);
        let l1_id = self
            .l1
            .find_mshr(line)
            .ok_or_else(|| Error::Sim(format!("fill return for {line:#x} without L1 MSHR")))?;
        if ev.from_memory {
            let l2_id = self
                .l2
                .find_mshr(line)
                .ok_or_else(|| Error::Sim(format!("memory return for {line:#x} without L2 MSHR")))?;
            let requesters = self.l1.mshr(l1_id).map(|m| m.targets.clone()).unwrap_or_default();
            let done = self.l2.complete_fill(l2_id, &mut self.repl_rng)?;
            match done.result {
                FillResult::Filled { writeback, .. } => {
                    self.log(FillRecord {
                        cycle: now,
                        level: Level::L2,
                        line_addr: line,
                        provenance: Self::provenance(&done.mshr),
                        requesters,
                        shb_source: done.mshr.shb_source,
                    });
                    if writeback.is_some() {
                        self.memory_writebacks += 1;
                    }
                }
                FillResult::Bypassed { writeback } => {
                    if writeback.is_some() {
                        self.memory_writebacks += 1;
                    }
                }
            }
        }
        let done = self.l1.complete_fill(l1_id, &mut self.repl_rng)?;
        let writeback = match done.result {
            FillResult::Filled { writeback, .. } => {
                self.log(FillRecord {
                    cycle: now,
                    level: Level::L1,
                    line_addr: line,
                    provenance: Self::provenance(&done.mshr),
                    requesters: done.mshr.targets.clone(),
                    shb_source: done.mshr.shb_source,
                });
                writeback
            }
            FillResult::Bypassed { writeback } => writeback,
        };
        if let Some(wb) = writeback {
            self.route_writeback(wb, now);
        }
        Ok(done.mshr.targets)
    }

    /// L1 writeback into L2. No-fill writebacks never allocate in L2.
    pub fn route_writeback(&mut self, mut entry: WritebackEntry, now: Cycle) {
        let stripped = entry.no_fill && self.cfg.strip_writeback_nofill;
        if stripped {
            entry.no_fill = false;
        }
        let allocates = !entry.no_fill && !self.l2.contains(entry.line_addr);
        if self.l2.accept_writeback(entry, &mut self.repl_rng).is_some() {
            self.memory_writebacks += 1;
        }
        if allocates {
            self.log(FillRecord {
                cycle: now,
                level: Level::L2,
                line_addr: entry.line_addr,
                provenance: if stripped {
                    FillProvenance::StrippedNoFillWriteback
                } else {
                    FillProvenance::Writeback
                },
                requesters: Vec::new(),
                shb_source: None,
            });
        }
    }

    /// Flushes the line from every level. Returns the latency; a line present
    /// anywhere costs one cycle more than an absent one.
    pub fn flush(&mut self, addr: u64) -> (FlushOutcome, Cycle) {
        let line = self.line_addr(addr);
        let o1 = self.l1.flush_line(line);
        let o2 = self.l2.flush_line(line);
        for o in [o1, o2] {
            if let FlushOutcome::FlushedDirty(_) = o {
                self.memory_writebacks += 1;
            }
        }
        let outcome = match (o1, o2) {
            (FlushOutcome::NotPresent, other) => other,
            (first, _) => first,
        };
        let latency = self.l1.flush_latency(&outcome);
        (outcome, latency)
    }
}
