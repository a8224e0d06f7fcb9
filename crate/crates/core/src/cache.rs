//! One set-associative cache level: tag store, replacement state, MSHRs,
//! line fill buffer and writeback buffer, plus the NoFill suppression path.
//!
//! Only tags and metadata are modelled. Data never matters for timing
//! channels, only presence does.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Cycle, Rng};

/// Identifier of a demand request travelling through the hierarchy.
pub type RequestId = u64;

/// Index into a level's MSHR array.
pub type MshrId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheGeometry {
    pub num_sets: usize,
    pub ways: usize,
    pub line_bytes: u64,
    pub mshr_entries: usize,
    #[serde(default = "default_buffer_entries")]
    pub lfb_entries: usize,
    #[serde(default = "default_buffer_entries")]
    pub wb_entries: usize,
    pub hit_latency: Cycle,
}

fn default_buffer_entries() -> usize {
    8
}

impl CacheGeometry {
    /// 32 KiB, 64 sets x 8 ways x 64 B, 16 MSHRs, 2-cycle hits.
    pub fn default_l1() -> Self {
        Self {
            num_sets: 64,
            ways: 8,
            line_bytes: 64,
            mshr_entries: 16,
            lfb_entries: 8,
            wb_entries: 8,
            hit_latency: 2,
        }
    }

    /// 512 KiB, 1024 sets x 8 ways x 64 B.
    pub fn default_l2() -> Self {
        Self {
            num_sets: 1024,
            ways: 8,
            line_bytes: 64,
            mshr_entries: 32,
            lfb_entries: 8,
            wb_entries: 8,
            hit_latency: 12,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{prefix}.{key}"), msg))
            }
        };
        check(self.num_sets.is_power_of_two(), "num_sets", "must be a power of two")?;
        check(self.line_bytes.is_power_of_two(), "line_bytes", "must be a power of two")?;
        check(self.ways >= 1 && self.ways <= 255, "ways", "must be in 1..=255")?;
        check(self.mshr_entries >= 1, "mshr_entries", "must be at least 1")?;
        check(self.lfb_entries >= 1, "lfb_entries", "must be at least 1")?;
        check(self.wb_entries >= 1, "wb_entries", "must be at least 1")?;
        Ok(())
    }

    pub fn way_size_bytes(&self) -> u64 {
        self.num_sets as u64 * self.line_bytes
    }

    pub fn line_addr(&self, addr: u64) -> u64 {
        addr & !(self.line_bytes - 1)
    }

    pub fn set_index(&self, addr: u64) -> usize {
        ((addr / self.line_bytes) % self.num_sets as u64) as usize
    }

    pub fn tag(&self, addr: u64) -> u64 {
        addr / self.way_size_bytes()
    }

    fn line_from(&self, set: usize, tag: u64) -> u64 {
        tag * self.way_size_bytes() + set as u64 * self.line_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementPolicy {
    Lru,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TagEntry {
    pub valid: bool,
    pub dirty: bool,
    pub tag: u64,
    /// 0 is most recently used. Maintained only under LRU.
    pub lru_rank: u8,
}

/// Who created an MSHR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissOrigin {
    Demand,
    ShbFetch,
    RandomFill,
}

/// Why a no-fill MSHR had its NoFill bit cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClearCause {
    /// NoFillClear carried by an SHB Fetch address.
    ShbFetch,
    /// A fill-allowed demand access merged into the MSHR.
    NonSpecAccess,
    /// A Random Fill fetch merged into the MSHR.
    RandomFill,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MshrEntry {
    pub line_addr: u64,
    pub no_fill: bool,
    pub targets: Vec<RequestId>,
    pub issued_at: Cycle,
    pub origin: MissOrigin,
    /// NoFill value at allocation.
    pub allocated_no_fill: bool,
    pub cleared: Option<(ClearCause, Cycle)>,
    pub store_merged: bool,
    /// SHB entry whose window produced the fetch that allocated or cleared
    /// this MSHR.
    pub shb_source: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfbEntry {
    pub line_addr: u64,
    pub data_present: bool,
    pub no_fill: bool,
    pub store_merged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WritebackEntry {
    pub line_addr: u64,
    pub no_fill: bool,
}

/// A request as seen by one cache level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelRequest {
    pub addr: u64,
    pub no_fill: bool,
    pub is_store: bool,
    pub origin: MissOrigin,
    pub requester: Option<RequestId>,
    pub shb_source: Option<u64>,
}

impl LevelRequest {
    pub fn load(addr: u64, no_fill: bool) -> Self {
        Self {
            addr,
            no_fill,
            is_store: false,
            origin: MissOrigin::Demand,
            requester: None,
            shb_source: None,
        }
    }

    pub fn store(addr: u64, no_fill: bool) -> Self {
        Self { is_store: true, ..Self::load(addr, no_fill) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupOutcome {
    Hit { latency: Cycle },
    MissAllocated(MshrId),
    MissMerged(MshrId),
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    HitWritten,
    MissAllocated(MshrId),
    MissMerged(MshrId),
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evicted {
    pub line_addr: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillResult {
    Filled { evicted: Option<Evicted>, writeback: Option<WritebackEntry> },
    /// Data went to the requester only; tag store untouched. A merged store
    /// leaves the level as a no-fill writeback.
    Bypassed { writeback: Option<WritebackEntry> },
}

/// The freed MSHR together with what happened to its line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletedFill {
    pub mshr: MshrEntry,
    pub result: FillResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushOutcome {
    FlushedClean,
    FlushedDirty(WritebackEntry),
    NotPresent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoFillClearOutcome {
    Cleared,
    NoMatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub fills: u64,
    pub bypassed_fills: u64,
    pub evictions: u64,
    pub writebacks_out: u64,
    pub nofill_writebacks_forwarded: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoFillSplit {
    pub allocated: u64,
    pub never_cleared: u64,
    pub cleared_by_shb_fetch: u64,
    pub cleared_by_nonspec_access: u64,
    pub cleared_by_random_fill: u64,
}

impl NoFillSplit {
    /// Percentages `(never, shb, nonspec)` over resolved no-fill MSHRs.
    pub fn percentages(&self) -> (f64, f64, f64) {
        let total = self.never_cleared
            + self.cleared_by_shb_fetch
            + self.cleared_by_nonspec_access
            + self.cleared_by_random_fill;
        if total == 0 {
            return (0.0, 0.0, 0.0);
        }
        let pct = |n: u64| 100.0 * n as f64 / total as f64;
        (
            pct(self.never_cleared),
            pct(self.cleared_by_shb_fetch),
            pct(self.cleared_by_nonspec_access + self.cleared_by_random_fill),
        )
    }
}

#[derive(Debug, Clone)]
struct LineFillBuffer {
    capacity: usize,
    entries: Vec<LfbEntry>,
}

#[derive(Debug, Clone)]
pub struct CacheLevel {
    geom: CacheGeometry,
    policy: ReplacementPolicy,
    tags: Vec<TagEntry>,
    mshrs: Vec<Option<MshrEntry>>,
    lfb: LineFillBuffer,
    wb_buffer: VecDeque<WritebackEntry>,
    stats: LevelStats,
    split: NoFillSplit,
}

impl CacheLevel {
    pub fn new(geom: CacheGeometry, policy: ReplacementPolicy) -> Self {
        let mut tags = vec![TagEntry::default(); geom.num_sets * geom.ways];
        for set in tags.chunks_mut(geom.ways) {
            for (way, e) in set.iter_mut().enumerate() {
                e.lru_rank = way as u8;
            }
        }
        Self {
            geom,
            policy,
            tags,
            mshrs: vec![None; geom.mshr_entries],
            lfb: LineFillBuffer { capacity: geom.lfb_entries, entries: Vec::new() },
            wb_buffer: VecDeque::new(),
            stats: LevelStats::default(),
            split: NoFillSplit::default(),
        }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geom
    }

    pub fn policy(&self) -> ReplacementPolicy {
        self.policy
    }

    pub fn stats(&self) -> &LevelStats {
        &self.stats
    }

    pub fn nofill_split(&self) -> &NoFillSplit {
        &self.split
    }

    pub fn set(&self, set_index: usize) -> &[TagEntry] {
        let w = self.geom.ways;
        &self.tags[set_index * w..(set_index + 1) * w]
    }

    /// Full tag store copy, for before/after comparisons.
    pub fn tag_snapshot(&self) -> Vec<TagEntry> {
        self.tags.clone()
    }

    pub fn writeback_buffer(&self) -> impl Iterator<Item = &WritebackEntry> {
        self.wb_buffer.iter()
    }

    pub fn mshrs(&self) -> impl Iterator<Item = (MshrId, &MshrEntry)> {
        self.mshrs.iter().enumerate().filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
    }

    pub fn mshr(&self, id: MshrId) -> Option<&MshrEntry> {
        self.mshrs.get(id).and_then(Option::as_ref)
    }

    pub fn mshrs_in_use(&self) -> usize {
        self.mshrs.iter().filter(|m| m.is_some()).count()
    }

    pub fn has_free_mshr(&self) -> bool {
        self.mshrs.iter().any(Option::is_none)
    }

    pub fn find_mshr(&self, addr: u64) -> Option<MshrId> {
        let line = self.geom.line_addr(addr);
        self.mshrs
            .iter()
            .position(|m| m.as_ref().is_some_and(|m| m.line_addr == line))
    }

    fn find_way(&self, addr: u64) -> Option<(usize, usize)> {
        let set = self.geom.set_index(addr);
        let tag = self.geom.tag(addr);
        self.set(set)
            .iter()
            .position(|e| e.valid && e.tag == tag)
            .map(|way| (set, way))
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.find_way(addr).is_some()
    }

    pub fn is_dirty(&self, addr: u64) -> bool {
        self.find_way(addr)
            .is_some_and(|(s, w)| self.tags[s * self.geom.ways + w].dirty)
    }

    fn touch(&mut self, set: usize, way: usize) {
        if self.policy != ReplacementPolicy::Lru {
            return;
        }
        let w = self.geom.ways;
        let entries = &mut self.tags[set * w..(set + 1) * w];
        let rank = entries[way].lru_rank;
        for e in entries.iter_mut() {
            if e.lru_rank < rank {
                e.lru_rank += 1;
            }
        }
        entries[way].lru_rank = 0;
    }

    /// Demand or prefetch lookup. Counts toward the access statistics only
    /// for demand requests.
    pub fn lookup(&mut self, req: &LevelRequest, now: Cycle) -> LookupOutcome {
        let demand = req.origin == MissOrigin::Demand;
        if let Some((set, way)) = self.find_way(req.addr) {
            if demand {
                self.stats.accesses += 1;
                self.stats.hits += 1;
            }
            if req.is_store {
                self.tags[set * self.geom.ways + way].dirty = true;
            }
            self.touch(set, way);
            return LookupOutcome::Hit { latency: self.geom.hit_latency };
        }
        if let Some(id) = self.find_mshr(req.addr) {
            if demand {
                self.stats.accesses += 1;
                self.stats.misses += 1;
            }
            let m = self.mshrs[id].as_mut().expect("found mshr");
            if let Some(r) = req.requester {
                m.targets.push(r);
            }
            m.store_merged |= req.is_store;
            if !req.no_fill && m.no_fill {
                let cause = match req.origin {
                    MissOrigin::Demand => ClearCause::NonSpecAccess,
                    MissOrigin::ShbFetch => ClearCause::ShbFetch,
                    MissOrigin::RandomFill => ClearCause::RandomFill,
                };
                m.no_fill = false;
                m.cleared = Some((cause, now));
                if req.shb_source.is_some() {
                    m.shb_source = req.shb_source;
                }
            }
            return LookupOutcome::MissMerged(id);
        }
        let Some(id) = self.mshrs.iter().position(Option::is_none) else {
            return LookupOutcome::Blocked;
        };
        if demand {
            self.stats.accesses += 1;
            self.stats.misses += 1;
        }
        if req.no_fill {
            self.split.allocated += 1;
        }
        self.mshrs[id] = Some(MshrEntry {
            line_addr: self.geom.line_addr(req.addr),
            no_fill: req.no_fill,
            targets: req.requester.into_iter().collect(),
            issued_at: now,
            origin: req.origin,
            allocated_no_fill: req.no_fill,
            cleared: None,
            store_merged: req.is_store,
            shb_source: req.shb_source,
        });
        LookupOutcome::MissAllocated(id)
    }

    pub fn write_store(&mut self, addr: u64, no_fill: bool, now: Cycle) -> StoreOutcome {
        match self.lookup(&LevelRequest::store(addr, no_fill), now) {
            LookupOutcome::Hit { .. } => StoreOutcome::HitWritten,
            LookupOutcome::MissAllocated(id) => StoreOutcome::MissAllocated(id),
            LookupOutcome::MissMerged(id) => StoreOutcome::MissMerged(id),
            LookupOutcome::Blocked => StoreOutcome::Blocked,
        }
    }

    /// Invalid ways first (lowest index), then LRU rank or a uniform draw.
    pub fn select_victim(&self, set_index: usize, rng: &mut Rng) -> usize {
        let set = self.set(set_index);
        if let Some(way) = set.iter().position(|e| !e.valid) {
            return way;
        }
        match self.policy {
            ReplacementPolicy::Lru => set
                .iter()
                .position(|e| e.lru_rank as usize == self.geom.ways - 1)
                .expect("lru ranks form a permutation"),
            ReplacementPolicy::Random => rng.below(self.geom.ways as u64) as usize,
        }
    }

    /// Installs `addr` as a fresh line. Returns the evicted line, if any.
    fn install(&mut self, addr: u64, dirty: bool, rng: &mut Rng) -> Option<Evicted> {
        let set = self.geom.set_index(addr);
        let way = self.select_victim(set, rng);
        let idx = set * self.geom.ways + way;
        let old = self.tags[idx];
        let evicted = old.valid.then(|| Evicted {
            line_addr: self.geom.line_from(set, old.tag),
            dirty: old.dirty,
        });
        if evicted.is_some() {
            self.stats.evictions += 1;
        }
        self.tags[idx] = TagEntry { valid: true, dirty, tag: self.geom.tag(addr), lru_rank: old.lru_rank };
        self.touch(set, way);
        evicted
    }

    /// Handles the arrival of the line for `id`: install it, or with NoFill
    /// still set, pass it through the line fill buffer without touching the
    /// tag store. The MSHR is freed either way.
    pub fn complete_fill(&mut self, id: MshrId, rng: &mut Rng) -> Result<CompletedFill> {
        let mshr = self
            .mshrs
            .get_mut(id)
            .and_then(Option::take)
            .ok_or_else(|| Error::Sim(format!("complete_fill on free MSHR {id}")))?;
        if self.lfb.entries.len() >= self.lfb.capacity {
            self.mshrs[id] = Some(mshr);
            return Err(Error::Sim("line fill buffer overflow".into()));
        }
        self.lfb.entries.push(LfbEntry {
            line_addr: mshr.line_addr,
            data_present: true,
            no_fill: mshr.no_fill,
            store_merged: mshr.store_merged,
        });
        let lfb = self.lfb.entries.pop().expect("just pushed");

        if mshr.allocated_no_fill {
            match mshr.cleared {
                None => self.split.never_cleared += 1,
                Some((ClearCause::ShbFetch, _)) => self.split.cleared_by_shb_fetch += 1,
                Some((ClearCause::NonSpecAccess, _)) => self.split.cleared_by_nonspec_access += 1,
                Some((ClearCause::RandomFill, _)) => self.split.cleared_by_random_fill += 1,
            }
        }

        let result = if lfb.no_fill {
            self.stats.bypassed_fills += 1;
            let writeback = lfb.store_merged.then_some(WritebackEntry {
                line_addr: lfb.line_addr,
                no_fill: true,
            });
            FillResult::Bypassed { writeback }
        } else {
            self.stats.fills += 1;
            let evicted = self.install(lfb.line_addr, lfb.store_merged, rng);
            let writeback = evicted.filter(|e| e.dirty).map(|e| WritebackEntry {
                line_addr: e.line_addr,
                no_fill: false,
            });
            if writeback.is_some() {
                self.stats.writebacks_out += 1;
            }
            FillResult::Filled { evicted, writeback }
        };
        Ok(CompletedFill { mshr, result })
    }

    /// Receives a writeback from the level above. No-fill writebacks go
    /// straight to the writeback buffer; others update or allocate a line.
    /// Returns a writeback this level pushes further down, if any.
    pub fn accept_writeback(&mut self, entry: WritebackEntry, rng: &mut Rng) -> Option<WritebackEntry> {
        if entry.no_fill {
            self.stats.nofill_writebacks_forwarded += 1;
            return self.push_writeback(entry);
        }
        if let Some((set, way)) = self.find_way(entry.line_addr) {
            self.tags[set * self.geom.ways + way].dirty = true;
            return None;
        }
        let evicted = self.install(entry.line_addr, true, rng);
        evicted.filter(|e| e.dirty).and_then(|e| {
            self.stats.writebacks_out += 1;
            self.push_writeback(WritebackEntry { line_addr: e.line_addr, no_fill: false })
        })
    }

    /// Queues a writeback; when the buffer is full the oldest entry drains.
    fn push_writeback(&mut self, entry: WritebackEntry) -> Option<WritebackEntry> {
        self.wb_buffer.push_back(entry);
        if self.wb_buffer.len() > self.geom.wb_entries {
            self.wb_buffer.pop_front()
        } else {
            None
        }
    }

    pub fn flush_line(&mut self, addr: u64) -> FlushOutcome {
        let Some((set, way)) = self.find_way(addr) else {
            return FlushOutcome::NotPresent;
        };
        let e = &mut self.tags[set * self.geom.ways + way];
        let dirty = e.dirty;
        e.valid = false;
        e.dirty = false;
        if dirty {
            self.stats.writebacks_out += 1;
            FlushOutcome::FlushedDirty(WritebackEntry { line_addr: self.geom.line_addr(addr), no_fill: false })
        } else {
            FlushOutcome::FlushedClean
        }
    }

    /// A present line takes one cycle longer to flush than an absent one.
    pub fn flush_latency(&self, outcome: &FlushOutcome) -> Cycle {
        match outcome {
            FlushOutcome::NotPresent => self.geom.hit_latency,
            _ => self.geom.hit_latency + 1,
        }
    }

    /// Clears the NoFill bit of a pending MSHR for the same line. Never looks
    /// at the tag store.
    pub fn apply_nofillclear(&mut self, line_addr: u64, shb_source: Option<u64>, now: Cycle) -> NoFillClearOutcome {
        let Some(id) = self.find_mshr(line_addr) else {
            return NoFillClearOutcome::NoMatch;
        };
        let m = self.mshrs[id].as_mut().expect("found mshr");
        if m.no_fill {
            m.no_fill = false;
            m.cleared = Some((ClearCause::ShbFetch, now));
            m.shb_source = shb_source;
        }
        NoFillClearOutcome::Cleared
    }

    /// Clears NoFill on a pending MSHR because a fill-allowed access to the
    /// same line arrived. Returns whether an MSHR matched.
    pub fn clear_by_access(&mut self, line_addr: u64, now: Cycle) -> bool {
        let Some(id) = self.find_mshr(line_addr) else {
            return false;
        };
        let m = self.mshrs[id].as_mut().expect("found mshr");
        if m.no_fill {
            m.no_fill = false;
            m.cleared = Some((ClearCause::NonSpecAccess, now));
        }
        true
    }
}
