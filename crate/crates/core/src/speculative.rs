//! Abstract out-of-order core: memory operations go through
//! issue → (authorize | squash) → commit, with authorization and squash
//! times given by the scenario rather than by a pipeline model.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cache::{LevelRequest, MissOrigin};
use crate::error::{Error, Result};
use crate::hierarchy::{AccessOutcome, AccessResult, DefenseKind, FillEvent, Hierarchy, HierarchyConfig, ShbFetchOutcome};
use crate::kernel::{stream, Cycle, Kernel, Rng};
use crate::shb::{SafeHistoryBuffer, ShbEmission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Load,
    Store,
    Flush,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolve {
    AuthorizeAt(Cycle),
    SquashAt(Cycle),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemOp {
    pub seq: u64,
    pub kind: OpKind,
    pub addr: u64,
    pub issue_at: Cycle,
    pub resolve: Resolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobState {
    Speculative,
    Authorized,
    Squashed,
    Committed,
}

impl RobState {
    pub fn can_move_to(self, to: RobState) -> bool {
        use RobState::*;
        matches!((self, to), (Speculative, Authorized) | (Authorized, Committed) | (Speculative, Squashed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobEntry {
    pub op: MemOp,
    pub state: RobState,
    pub issued_at: Option<Cycle>,
    pub completed_at: Option<Cycle>,
    pub authorized_at: Option<Cycle>,
    pub squashed_at: Option<Cycle>,
    pub no_fill: bool,
    pub outcome: Option<AccessOutcome>,
}

impl RobEntry {
    fn move_to(&mut self, to: RobState) -> Result<()> {
        if !self.state.can_move_to(to) {
            return Err(Error::Sim(format!("op {} cannot go from {:?} to {:?}", self.op.seq, self.state, to)));
        }
        self.state = to;
        Ok(())
    }

    /// Dropped before it reached the memory system.
    pub fn dropped(&self) -> bool {
        self.state == RobState::Squashed && self.issued_at.is_none()
    }

    pub fn latency(&self) -> Option<Cycle> {
        Some(self.completed_at? - self.issued_at?)
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    TryIssue,
    Fill(FillEvent),
    ShbTick,
    Authorize(u64),
    Squash(u64),
    /// A load's data arrives; an authorized load commits.
    Complete(u64),
}

/// An address entering the SHB, with the op that put it there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShbInsertion {
    pub cycle: Cycle,
    pub addr: u64,
    pub seq: u64,
}

/// One simulated core with its memory hierarchy and SHB.
#[derive(Debug)]
pub struct Simulator {
    kernel: Kernel<Event>,
    hier: Hierarchy,
    shb: Option<SafeHistoryBuffer>,
    rob: Vec<RobEntry>,
    load_q: VecDeque<u64>,
    store_q: VecDeque<(Cycle, u64)>,
    retry_at: Option<Cycle>,
    last_authorize: Cycle,
    work_events: usize,
    force_fill: bool,
    trace_shb: bool,
    emissions: Vec<ShbEmission>,
    insertions: Vec<ShbInsertion>,
}

impl Simulator {
    pub fn new(cfg: HierarchyConfig, seed: u64) -> Result<Self> {
        let hier = Hierarchy::new(cfg, seed)?;
        let d = cfg.defense;
        let shb = d.kind.uses_shb().then(|| {
            SafeHistoryBuffer::new(
                d.shb_entries,
                d.rate_cycles,
                d.window_lines,
                cfg.l1.line_bytes,
                Rng::for_stream(seed, stream::SHB_ENTRY),
                Rng::for_stream(seed, stream::SHB_WINDOW),
            )
        });
        let mut kernel = Kernel::new();
        if shb.is_some() {
            kernel.schedule(0, Event::ShbTick)?;
        }
        Ok(Self {
            kernel,
            hier,
            shb,
            rob: Vec::new(),
            load_q: VecDeque::new(),
            store_q: VecDeque::new(),
            retry_at: None,
            last_authorize: 0,
            work_events: 0,
            force_fill: false,
            trace_shb: false,
            emissions: Vec::new(),
            insertions: Vec::new(),
        })
    }

    /// Fault injection: every request goes out fill-allowed.
    pub fn force_fill(&mut self, on: bool) {
        self.force_fill = on;
    }

    /// Records every SHB insertion and emission.
    pub fn trace_shb(&mut self, on: bool) {
        self.trace_shb = on;
    }

    pub fn record_fills(&mut self, on: bool) {
        self.hier.record_fills(on);
    }

    pub fn now(&self) -> Cycle {
        self.kernel.now()
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hier
    }

    pub fn shb(&self) -> Option<&SafeHistoryBuffer> {
        self.shb.as_ref()
    }

    pub fn defense(&self) -> DefenseKind {
        self.hier.config().defense.kind
    }

    pub fn rob(&self) -> &[RobEntry] {
        &self.rob
    }

    pub fn entry(&self, seq: u64) -> Option<&RobEntry> {
        self.rob.get(seq as usize)
    }

    pub fn emissions(&self) -> &[ShbEmission] {
        &self.emissions
    }

    pub fn shb_insertions(&self) -> &[ShbInsertion] {
        &self.insertions
    }

    /// Adds the next op in program order. Authorization times must be
    /// non-decreasing across ops (ROB order).
    pub fn push(&mut self, kind: OpKind, addr: u64, issue_at: Cycle, resolve: Resolve) -> Result<u64> {
        let now = self.now();
        if issue_at < now {
            return Err(Error::Scenario(format!("op issues at {issue_at}, clock already at {now}")));
        }
        let seq = self.rob.len() as u64;
        if let Resolve::AuthorizeAt(a) = resolve {
            if a < self.last_authorize {
                return Err(Error::Scenario(format!(
                    "op {seq} authorized at {a}, before an older op authorized at {}",
                    self.last_authorize
                )));
            }
            self.last_authorize = a;
        }
        let mut entry = RobEntry {
            op: MemOp { seq, kind, addr, issue_at, resolve },
            state: RobState::Speculative,
            issued_at: None,
            completed_at: None,
            authorized_at: None,
            squashed_at: None,
            no_fill: false,
            outcome: None,
        };
        match (kind, resolve) {
            (OpKind::Store, Resolve::SquashAt(s)) => {
                entry.state = RobState::Squashed;
                entry.squashed_at = Some(s.max(now));
            }
            (_, Resolve::SquashAt(s)) if s < issue_at => {
                entry.state = RobState::Squashed;
                entry.squashed_at = Some(s.max(now));
            }
            (OpKind::Store, Resolve::AuthorizeAt(a)) => {
                let commit = a.max(issue_at);
                self.store_q.push_back((commit, seq));
                self.schedule(commit, Event::Authorize(seq))?;
                self.schedule(commit, Event::TryIssue)?;
            }
            (_, r) => {
                self.load_q.push_back(seq);
                self.schedule(issue_at, Event::TryIssue)?;
                if kind == OpKind::Load {
                    match r {
                        Resolve::AuthorizeAt(a) => self.schedule(a.max(now), Event::Authorize(seq))?,
                        Resolve::SquashAt(s) => self.schedule(s, Event::Squash(seq))?,
                    }
                }
            }
        }
        self.rob.push(entry);
        Ok(seq)
    }

    fn schedule(&mut self, at: Cycle, ev: Event) -> Result<()> {
        if !matches!(ev, Event::ShbTick) {
            self.work_events += 1;
        }
        self.kernel.schedule(at, ev)
    }

    fn no_fill_for(&self, kind: OpKind, speculative: bool) -> bool {
        if self.force_fill || kind == OpKind::Flush {
            return false;
        }
        match self.defense() {
            DefenseKind::BaselineLru | DefenseKind::SaRandomRepl => false,
            DefenseKind::RasSpec => kind == OpKind::Load && speculative,
            DefenseKind::RasPlus | DefenseKind::RandomFill => true,
        }
    }

    fn shb_insert(&mut self, addr: u64, seq: u64, now: Cycle) {
        if let Some(shb) = self.shb.as_mut() {
            shb.insert(addr);
            if self.trace_shb {
                self.insertions.push(ShbInsertion { cycle: now, addr, seq });
            }
        }
    }

    /// The op's older ops are all authorized; its address becomes safe.
    pub fn on_authorize(&mut self, seq: u64, now: Cycle) -> Result<()> {
        let e = self.rob.get_mut(seq as usize).ok_or_else(|| Error::Sim(format!("no op {seq}")))?;
        if e.state != RobState::Speculative {
            return Ok(());
        }
        e.move_to(RobState::Authorized)?;
        e.authorized_at = Some(now);
        if e.completed_at.is_some_and(|c| c <= now) {
            e.move_to(RobState::Committed)?;
        }
        let addr = e.op.addr;
        self.shb_insert(addr, seq, now);
        Ok(())
    }

    pub fn on_squash(&mut self, seq: u64, now: Cycle) -> Result<()> {
        let e = self.rob.get_mut(seq as usize).ok_or_else(|| Error::Sim(format!("no op {seq}")))?;
        if e.state == RobState::Speculative {
            e.move_to(RobState::Squashed)?;
            e.squashed_at = Some(now);
        }
        Ok(())
    }

    /// Drains a committed store into the cache. Its address entered the SHB
    /// at commit. Returns false when the hierarchy is out of MSHRs.
    pub fn on_store_commit(&mut self, seq: u64, now: Cycle) -> Result<bool> {
        let addr = self.rob[seq as usize].op.addr;
        let no_fill = self.no_fill_for(OpKind::Store, false);
        let req = LevelRequest { requester: Some(seq), ..LevelRequest::store(addr, no_fill) };
        let AccessResult::Done { outcome, fills } = self.hier.access(req, now) else {
            return Ok(false);
        };
        for f in fills {
            self.schedule(f.at, Event::Fill(f))?;
        }
        if self.rob[seq as usize].state == RobState::Speculative {
            self.on_authorize(seq, now)?;
        }
        let e = &mut self.rob[seq as usize];
        e.move_to(RobState::Committed)?;
        e.issued_at = Some(now);
        e.completed_at = Some(now + outcome.total_latency);
        e.no_fill = no_fill;
        e.outcome = Some(outcome);
        Ok(true)
    }

    /// Issues a load or flush. Returns false when blocked.
    fn issue(&mut self, seq: u64, now: Cycle) -> Result<bool> {
        let op = self.rob[seq as usize].op;
        if op.kind == OpKind::Flush {
            let (_, latency) = self.hier.flush(op.addr);
            let e = &mut self.rob[seq as usize];
            e.issued_at = Some(now);
            e.completed_at = Some(now + latency);
            if e.state == RobState::Speculative {
                e.move_to(RobState::Authorized)?;
                e.authorized_at = Some(now);
            }
            e.move_to(RobState::Committed)?;
            return Ok(true);
        }
        if let Resolve::AuthorizeAt(a) = op.resolve {
            if a <= now {
                self.on_authorize(seq, now)?;
            }
        }
        let speculative = self.rob[seq as usize].state == RobState::Speculative;
        let no_fill = self.no_fill_for(OpKind::Load, speculative);
        let req = LevelRequest {
            addr: op.addr,
            no_fill,
            is_store: false,
            origin: MissOrigin::Demand,
            requester: Some(seq),
            shb_source: None,
        };
        let AccessResult::Done { outcome, fills } = self.hier.access(req, now) else {
            return Ok(false);
        };
        for f in fills {
            self.schedule(f.at, Event::Fill(f))?;
        }
        let e = &mut self.rob[seq as usize];
        e.issued_at = Some(now);
        e.completed_at = Some(now + outcome.total_latency);
        e.no_fill = no_fill;
        e.outcome = Some(outcome);
        if matches!(e.state, RobState::Speculative | RobState::Authorized) {
            self.schedule(now + outcome.total_latency, Event::Complete(seq))?;
        }
        Ok(true)
    }

    fn try_issue(&mut self, now: Cycle) -> Result<()> {
        let mut blocked = false;
        while let Some(&seq) = self.load_q.front() {
            let e = &self.rob[seq as usize];
            if e.state == RobState::Squashed && e.issued_at.is_none() {
                self.load_q.pop_front();
                continue;
            }
            if e.op.issue_at > now {
                break;
            }
            if !self.issue(seq, now)? {
                blocked = true;
                break;
            }
            self.load_q.pop_front();
        }
        while let Some(&(commit, seq)) = self.store_q.front() {
            if commit > now {
                break;
            }
            if !self.on_store_commit(seq, now)? {
                blocked = true;
                break;
            }
            self.store_q.pop_front();
        }
        if blocked && self.retry_at != Some(now + 1) {
            self.retry_at = Some(now + 1);
            self.schedule(now + 1, Event::TryIssue)?;
        }
        Ok(())
    }

    fn shb_tick(&mut self, now: Cycle) -> Result<()> {
        let Some(shb) = self.shb.as_mut() else { return Ok(()) };
        let rate = shb.rate_cycles();
        if let Some(em) = shb.tick(now) {
            if self.trace_shb {
                self.emissions.push(em);
            }
            match self.hier.shb_fetch(em.fetch_addr, em.entry, now) {
                ShbFetchOutcome::Issued(f) => self.schedule(f.at, Event::Fill(f))?,
                ShbFetchOutcome::Dropped => {
                    if let Some(shb) = self.shb.as_mut() {
                        shb.note_dropped();
                    }
                }
                ShbFetchOutcome::Resident | ShbFetchOutcome::Pending(_) => {}
            }
        }
        self.kernel.schedule(now + rate, Event::ShbTick)
    }

    /// Fires the earliest event. Returns false when nothing is queued.
    fn step(&mut self) -> Result<bool> {
        let Some(ev) = self.kernel.pop_next() else { return Ok(false) };
        let now = ev.fire_at;
        if !matches!(ev.payload, Event::ShbTick) {
            self.work_events -= 1;
        }
        match ev.payload {
            Event::TryIssue => {
                if self.retry_at == Some(now) {
                    self.retry_at = None;
                }
                self.try_issue(now)?;
            }
            Event::Fill(f) => {
                self.hier.fill_return(f, now)?;
            }
            Event::ShbTick => self.shb_tick(now)?,
            Event::Authorize(seq) => self.on_authorize(seq, now)?,
            Event::Squash(seq) => self.on_squash(seq, now)?,
            Event::Complete(seq) => {
                let e = &mut self.rob[seq as usize];
                if e.state == RobState::Authorized {
                    e.move_to(RobState::Committed)?;
                }
            }
        }
        Ok(true)
    }

    /// Fires everything due at or before `t`, then moves the clock to `t`.
    pub fn run_until(&mut self, t: Cycle) -> Result<()> {
        while self.kernel.next_fire_at().is_some_and(|f| f <= t) {
            self.step()?;
        }
        self.kernel.advance_idle_to(t);
        Ok(())
    }

    pub fn wait(&mut self, cycles: Cycle) -> Result<()> {
        self.run_until(self.now() + cycles)
    }

    /// Runs until no op, fill or resolution event remains. SHB ticks alone
    /// do not keep the simulation going.
    pub fn run_to_quiet(&mut self) -> Result<Cycle> {
        while self.work_events > 0 {
            self.step()?;
        }
        Ok(self.now())
    }

    /// Runs until op `seq` has completed (or was dropped) and returns its
    /// completion cycle.
    pub fn run_op(&mut self, seq: u64) -> Result<Option<Cycle>> {
        loop {
            let e = &self.rob[seq as usize];
            if e.dropped() {
                return Ok(None);
            }
            if let Some(c) = e.completed_at {
                self.run_until(c)?;
                return Ok(Some(c));
            }
            if !self.step()? {
                return Err(Error::Sim(format!("op {seq} can never complete")));
            }
        }
    }

    fn timed(&mut self, kind: OpKind, addr: u64) -> Result<Cycle> {
        let start = self.now();
        let seq = self.push(kind, addr, start, Resolve::AuthorizeAt(start))?;
        let done = self.run_op(seq)?.expect("authorized op is never dropped");
        Ok(done - start)
    }

    /// Non-speculative load issued now; returns its latency.
    pub fn load(&mut self, addr: u64) -> Result<Cycle> {
        self.timed(OpKind::Load, addr)
    }

    pub fn store(&mut self, addr: u64) -> Result<Cycle> {
        self.timed(OpKind::Store, addr)
    }

    pub fn flush(&mut self, addr: u64) -> Result<Cycle> {
        self.timed(OpKind::Flush, addr)
    }

    /// Transient load issued now and squashed `squash_after` cycles later.
    /// Returns once both the squash and the load's own miss have resolved.
    pub fn transient_load(&mut self, addr: u64, squash_after: Cycle) -> Result<()> {
        let now = self.now();
        let seq = self.push(OpKind::Load, addr, now, Resolve::SquashAt(now + squash_after))?;
        self.run_op(seq)?;
        self.run_until(now + squash_after)?;
        self.run_to_quiet()?;
        Ok(())
    }

    /// Issues every address now as non-speculative loads and returns the
    /// cycles until the last one completes.
    pub fn load_all(&mut self, addrs: &[u64]) -> Result<Cycle> {
        let start = self.now();
        let seqs = addrs
            .iter()
            .map(|&a| self.push(OpKind::Load, a, start, Resolve::AuthorizeAt(start)))
            .collect::<Result<Vec<_>>>()?;
        let mut end = start;
        for s in seqs {
            end = end.max(self.run_op(s)?.unwrap_or(start));
        }
        Ok(end - start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{DefenseMode, FillProvenance, Level};

    fn sim(d: DefenseMode) -> Simulator {
        let mut s = Simulator::new(HierarchyConfig::new(d), 5).unwrap();
        s.record_fills(true);
        s.trace_shb(true);
        s
    }

    fn resident(s: &Simulator, addr: u64) -> bool {
        s.hierarchy().l1().contains(s.hierarchy().line_addr(addr))
    }

    #[test]
    fn nonspec_load_under_ras_spec_fills() {
        let mut s = sim(DefenseMode::ras_spec_default());
        let seq = s.push(OpKind::Load, 0x1000, 0, Resolve::AuthorizeAt(0)).unwrap();
        s.run_to_quiet().unwrap();
        assert!(!s.rob()[seq as usize].no_fill);
        assert!(resident(&s, 0x1000));
    }

    #[test]
    fn speculative_load_under_ras_spec_is_no_fill() {
        let mut s = sim(DefenseMode::ras_spec(3, 1, 1));
        let seq = s.push(OpKind::Load, 0x1000, 0, Resolve::AuthorizeAt(1000)).unwrap();
        s.run_to_quiet().unwrap();
        assert!(s.rob()[seq as usize].no_fill);
        assert!(!resident(&s, 0x1000));
        // Authorized after the return: not filled, but the address is in the SHB.
        assert_eq!(s.shb().unwrap().entries().collect::<Vec<_>>(), vec![0x1000]);
        assert_eq!(s.rob()[seq as usize].state, RobState::Committed);
    }

    #[test]
    fn authorized_before_return_fills_via_nofillclear() {
        let mut s = sim(DefenseMode::ras_spec(3, 1, 1));
        s.push(OpKind::Load, 0x1000, 0, Resolve::AuthorizeAt(10)).unwrap();
        s.run_to_quiet().unwrap();
        assert!(resident(&s, 0x1000));
        let rec = s.hierarchy().fill_log().iter().find(|r| r.level == Level::L1).unwrap();
        assert!(matches!(rec.provenance, FillProvenance::Cleared(_)));
    }

    #[test]
    fn ras_plus_store_is_no_fill_and_enters_shb() {
        let mut s = sim(DefenseMode::ras_plus(3, 4, 1 << 20));
        let seq = s.push(OpKind::Store, 0x2000, 0, Resolve::AuthorizeAt(0)).unwrap();
        s.run_op(seq).unwrap();
        let e = &s.rob()[seq as usize];
        assert!(e.no_fill);
        assert_eq!(e.state, RobState::Committed);
        assert_eq!(s.shb_insertions()[0].addr, 0x2000);
    }

    #[test]
    fn ras_spec_store_fills_and_enters_shb() {
        let mut s = sim(DefenseMode::ras_spec_default());
        let seq = s.push(OpKind::Store, 0x2000, 0, Resolve::AuthorizeAt(4)).unwrap();
        s.run_to_quiet().unwrap();
        let e = &s.rob()[seq as usize];
        assert!(!e.no_fill);
        assert_eq!(e.issued_at, Some(4));
        assert_eq!(s.shb_insertions()[0].cycle, 4);
        assert!(s.hierarchy().l1().is_dirty(0x2000));
    }

    #[test]
    fn squashed_store_never_reaches_cache() {
        let mut s = sim(DefenseMode::ras_spec_default());
        s.push(OpKind::Store, 0x2000, 0, Resolve::SquashAt(5)).unwrap();
        s.wait(300).unwrap();
        assert_eq!(s.hierarchy().l1().stats().accesses, 0);
        assert!(s.shb().unwrap().is_empty());
    }

    #[test]
    fn squash_before_issue_drops_op() {
        let mut s = sim(DefenseMode::baseline());
        let seq = s.push(OpKind::Load, 0x40, 10, Resolve::SquashAt(5)).unwrap();
        s.wait(300).unwrap();
        assert!(s.rob()[seq as usize].dropped());
        assert_eq!(s.hierarchy().l1().stats().accesses, 0);
    }

    #[test]
    fn squashed_no_fill_miss_leaves_tags_untouched() {
        for d in [DefenseMode::ras_spec_default(), DefenseMode::ras_plus_default()] {
            let mut s = sim(d);
            let before = (s.hierarchy().l1().tag_snapshot(), s.hierarchy().l2().tag_snapshot());
            s.transient_load(0x7780, 20).unwrap();
            assert!(s.shb().unwrap().is_empty());
            assert_eq!((s.hierarchy().l1().tag_snapshot(), s.hierarchy().l2().tag_snapshot()), before);
        }
    }

    #[test]
    fn baseline_squash_still_fills() {
        let mut s = sim(DefenseMode::baseline());
        s.transient_load(0x7780, 20).unwrap();
        assert!(resident(&s, 0x7780));
    }

    #[test]
    fn out_of_order_authorization_is_rejected() {
        let mut s = sim(DefenseMode::ras_spec_default());
        s.push(OpKind::Load, 0x40, 0, Resolve::AuthorizeAt(50)).unwrap();
        assert!(matches!(
            s.push(OpKind::Load, 0x80, 1, Resolve::AuthorizeAt(40)),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn legal_transitions_only() {
        use RobState::*;
        assert!(Speculative.can_move_to(Authorized));
        assert!(Authorized.can_move_to(Committed));
        assert!(Speculative.can_move_to(Squashed));
        for from in [Squashed, Committed] {
            for to in [Speculative, Authorized, Squashed, Committed] {
                assert!(!from.can_move_to(to));
            }
        }
        assert!(!Authorized.can_move_to(Squashed));
    }

    #[test]
    fn blocked_loads_retry_in_order() {
        let mut cfg = HierarchyConfig::new(DefenseMode::baseline());
        cfg.l1.mshr_entries = 1;
        let mut s = Simulator::new(cfg, 1).unwrap();
        let a = s.push(OpKind::Load, 0x0, 0, Resolve::AuthorizeAt(0)).unwrap();
        let b = s.push(OpKind::Load, 0x40, 0, Resolve::AuthorizeAt(0)).unwrap();
        s.run_to_quiet().unwrap();
        assert_eq!(s.rob()[a as usize].completed_at, Some(164));
        assert_eq!(s.rob()[b as usize].issued_at, Some(164));
        assert_eq!(s.rob()[b as usize].completed_at, Some(328));
    }

    #[test]
    fn timed_helpers() {
        let mut s = sim(DefenseMode::baseline());
        assert_eq!(s.load(0x1000).unwrap(), 164);
        assert_eq!(s.load(0x1000).unwrap(), 2);
        assert_eq!(s.flush(0x1000).unwrap(), 3);
        assert_eq!(s.flush(0x1000).unwrap(), 2);
        assert_eq!(s.load_all(&[0x0, 0x40, 0x80]).unwrap(), 164);
    }

    #[test]
    fn authorized_before_data_commits_on_arrival() {
        let mut s = sim(DefenseMode::ras_spec_default());
        let seq = s.push(OpKind::Load, 0x1000, 0, Resolve::AuthorizeAt(40)).unwrap();
        s.run_until(100).unwrap();
        assert_eq!(s.entry(seq).unwrap().state, RobState::Authorized);
        s.run_to_quiet().unwrap();
        assert_eq!(s.entry(seq).unwrap().state, RobState::Committed);
    }

    #[test]
    fn force_fill_defeats_no_fill() {
        let mut s = sim(DefenseMode::ras_plus_default());
        s.force_fill(true);
        s.transient_load(0x7780, 20).unwrap();
        assert!(resident(&s, 0x7780));
    }
}
