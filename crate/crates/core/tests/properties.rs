use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use proptest::prelude::*;
use rascache::cache::{CacheGeometry, CacheLevel, FillResult, LevelRequest, LookupOutcome, ReplacementPolicy};
use rascache::hierarchy::{AccessResult, FillEvent, Hierarchy};
use rascache::kernel::Cycle;
use rascache::shb::{window_base, SafeHistoryBuffer};
use rascache::{DefenseMode, HierarchyConfig, OpKind, Resolve, Rng, RobState, Simulator};

fn tiny_geometry() -> CacheGeometry {
    CacheGeometry {
        num_sets: 4,
        ways: 4,
        line_bytes: 64,
        mshr_entries: 4,
        lfb_entries: 4,
        wb_entries: 4,
        hit_latency: 2,
    }
}

/// Per-set most-recent-first list.
struct LruOracle {
    sets: Vec<Vec<u64>>,
    ways: usize,
}

impl LruOracle {
    /// Returns (hit, evicted line).
    fn access(&mut self, g: &CacheGeometry, addr: u64) -> (bool, Option<u64>) {
        let line = g.line_addr(addr);
        let set = &mut self.sets[g.set_index(addr)];
        if let Some(pos) = set.iter().position(|&l| l == line) {
            set.remove(pos);
            set.insert(0, line);
            return (true, None);
        }
        set.insert(0, line);
        let evicted = if set.len() > self.ways { set.pop() } else { None };
        (false, evicted)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lru_matches_list_oracle(lines in prop::collection::vec(0u64..40, 1..300)) {
        let g = tiny_geometry();
        let mut cache = CacheLevel::new(g, ReplacementPolicy::Lru);
        let mut oracle = LruOracle { sets: vec![Vec::new(); g.num_sets], ways: g.ways };
        let mut rng = Rng::new(1);
        for (t, l) in lines.into_iter().enumerate() {
            let addr = l * 64 + 8;
            let (hit, evicted) = oracle.access(&g, addr);
            match cache.lookup(&LevelRequest::load(addr, false), t as Cycle) {
                LookupOutcome::Hit { .. } => prop_assert!(hit),
                LookupOutcome::MissAllocated(id) => {
                    prop_assert!(!hit);
                    let done = cache.complete_fill(id, &mut rng).unwrap();
                    let FillResult::Filled { evicted: got, .. } = done.result else {
                        return Err(TestCaseError::fail("fill-allowed miss bypassed"));
                    };
                    prop_assert_eq!(got.map(|e| e.line_addr), evicted);
                }
                other => return Err(TestCaseError::fail(format!("unexpected {other:?}"))),
            }
            for s in 0..g.num_sets {
                let mut want = oracle.sets[s].clone();
                want.sort_unstable();
                let mut have: Vec<u64> = (0..400u64)
                    .map(|l| l * 64)
                    .filter(|&a| g.set_index(a) == s && cache.contains(a))
                    .collect();
                have.sort_unstable();
                prop_assert_eq!(have, want);
            }
        }
    }

    #[test]
    fn nofill_miss_leaves_tags_untouched(
        ops in prop::collection::vec((0u64..64, any::<bool>(), any::<bool>()), 1..200),
        random in any::<bool>(),
    ) {
        let policy = if random { ReplacementPolicy::Random } else { ReplacementPolicy::Lru };
        let mut cache = CacheLevel::new(tiny_geometry(), policy);
        let mut rng = Rng::new(5);
        for (t, (l, no_fill, store)) in ops.into_iter().enumerate() {
            let req = LevelRequest { is_store: store, ..LevelRequest::load(l * 64, no_fill) };
            let before = cache.tag_snapshot();
            if let LookupOutcome::MissAllocated(id) = cache.lookup(&req, t as Cycle) {
                let done = cache.complete_fill(id, &mut rng).unwrap();
                if no_fill {
                    prop_assert_eq!(cache.tag_snapshot(), before);
                    let is_bypass = matches!(done.result, FillResult::Bypassed { .. });
                    prop_assert!(is_bypass);
                } else {
                    prop_assert!(cache.contains(l * 64));
                }
            }
        }
    }
}

/// Drives a bare hierarchy with requests and returns fills in time order.
struct Driver {
    h: Hierarchy,
    pending: BinaryHeap<Reverse<(Cycle, u64, u64, bool)>>,
    seq: u64,
    now: Cycle,
}

impl Driver {
    fn new(defense: DefenseMode, mshrs: usize) -> Self {
        let mut cfg = HierarchyConfig::new(defense);
        cfg.l1.mshr_entries = mshrs;
        cfg.l1.num_sets = 8;
        cfg.l1.ways = 2;
        cfg.l2.num_sets = 16;
        cfg.l2.ways = 2;
        let mut h = Hierarchy::new(cfg, 3).unwrap();
        h.record_fills(true);
        Self { h, pending: BinaryHeap::new(), seq: 0, now: 0 }
    }

    fn push(&mut self, f: FillEvent) {
        self.pending.push(Reverse((f.at, self.seq, f.line_addr, f.from_memory)));
        self.seq += 1;
    }

    fn advance(&mut self, to: Cycle) {
        while let Some(Reverse((at, _, line_addr, from_memory))) = self.pending.peek().copied() {
            if at > to {
                break;
            }
            self.pending.pop();
            self.h.fill_return(FillEvent { at, line_addr, from_memory }, at).unwrap();
        }
        self.now = to;
    }

    fn access(&mut self, req: LevelRequest) {
        if let AccessResult::Done { fills, .. } = self.h.access(req, self.now) {
            fills.into_iter().for_each(|f| self.push(f));
        }
    }
}

fn mshr_lines(c: &CacheLevel) -> Vec<u64> {
    c.mshrs().map(|(_, m)| m.line_addr).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mshrs_unique_and_nofill_monotone(
        ops in prop::collection::vec((0u64..48, any::<bool>(), any::<bool>(), 0u64..40), 1..250),
        mshrs in 1usize..6,
    ) {
        let mut d = Driver::new(DefenseMode::ras_spec_default(), mshrs);
        // (level, line, issued_at) -> last seen NoFill bit
        let mut seen: HashMap<(u8, u64, Cycle), bool> = HashMap::new();
        for (l, no_fill, store, dt) in ops {
            d.advance(d.now + dt);
            let addr = l * 64;
            let req = if store { LevelRequest::store(addr, no_fill) } else { LevelRequest::load(addr, no_fill) };
            d.access(req);
            for (lvl, c) in [(1u8, d.h.l1()), (2u8, d.h.l2())] {
                let lines = mshr_lines(c);
                let unique: HashSet<_> = lines.iter().collect();
                prop_assert_eq!(unique.len(), lines.len());
                prop_assert!(lines.len() <= c.geometry().mshr_entries);
                for (_, m) in c.mshrs() {
                    let prev = seen.insert((lvl, m.line_addr, m.issued_at), m.no_fill);
                    prop_assert!(!(prev == Some(false) && m.no_fill), "NoFill bit set again on {:#x}", m.line_addr);
                }
            }
        }
    }

    #[test]
    fn only_fill_allowed_lines_become_resident(
        ops in prop::collection::vec((0u64..48, any::<bool>(), any::<bool>(), 0u64..40), 1..250),
    ) {
        let mut d = Driver::new(DefenseMode::ras_spec_default(), 4);
        let mut allowed = HashSet::new();
        for (l, no_fill, store, dt) in ops {
            d.advance(d.now + dt);
            let addr = l * 64;
            if !no_fill {
                allowed.insert(addr);
            }
            d.access(if store { LevelRequest::store(addr, no_fill) } else { LevelRequest::load(addr, no_fill) });
        }
        d.advance(Cycle::MAX);
        for l in 0..48u64 {
            let addr = l * 64;
            if d.h.l1().contains(addr) || d.h.l2().contains(addr) {
                prop_assert!(allowed.contains(&addr), "{:#x} resident without a fill-allowed request", addr);
            }
        }
    }

    #[test]
    fn shb_emits_only_from_its_entries(
        ops in prop::collection::vec(prop_oneof![(0u64..1u64 << 20).prop_map(Some), Just(None)], 1..300),
        cap in 1usize..6,
        log_w in 0u32..7,
    ) {
        let w = 1u64 << log_w;
        let mut shb = SafeHistoryBuffer::new(cap, 1, w, 64, Rng::new(11), Rng::new(12));
        let mut inserted = Vec::new();
        for (t, op) in ops.into_iter().enumerate() {
            match op {
                Some(addr) => {
                    shb.insert(addr);
                    inserted.push(addr);
                }
                None => {
                    let current: Vec<u64> = shb.entries().collect();
                    let recent = &inserted[inserted.len().saturating_sub(cap)..];
                    prop_assert_eq!(&current[..], recent);
                    match shb.tick(t as Cycle) {
                        Some(e) => {
                            prop_assert!(current.contains(&e.entry));
                            let base = window_base(e.entry, w, 64);
                            prop_assert!(e.fetch_addr >= base && e.fetch_addr < base + w * 64);
                            prop_assert_eq!(e.fetch_addr % 64, 0);
                        }
                        None => prop_assert!(current.is_empty()),
                    }
                }
            }
        }
    }

    #[test]
    fn shb_insertions_come_from_authorized_ops(
        ops in prop::collection::vec((0u64..256, 0u64..6, 0u64..200, any::<bool>(), any::<bool>()), 1..60),
        plus in any::<bool>(),
    ) {
        let defense = if plus { DefenseMode::ras_plus(3, 4, 16) } else { DefenseMode::ras_spec(3, 2, 4) };
        let mut sim = Simulator::new(HierarchyConfig::new(defense), 9).unwrap();
        sim.trace_shb(true);
        let mut t = 0;
        let mut last_auth = 0;
        for (l, gap, delay, squash, store) in ops {
            t += gap;
            let kind = if store { OpKind::Store } else { OpKind::Load };
            let resolve = if squash {
                Resolve::SquashAt(t + delay)
            } else {
                last_auth = last_auth.max(t + delay);
                Resolve::AuthorizeAt(last_auth)
            };
            sim.push(kind, 0x10_0000 + l * 64, t, resolve).unwrap();
        }
        sim.run_to_quiet().unwrap();
        for ins in sim.shb_insertions() {
            let e = sim.entry(ins.seq).unwrap();
            prop_assert_eq!(e.op.addr, ins.addr);
            prop_assert_ne!(e.state, RobState::Squashed);
            prop_assert!(e.authorized_at.is_some_and(|a| a <= ins.cycle));
        }
        for em in sim.emissions() {
            let inserted_before = sim.shb_insertions().iter().any(|i| i.addr == em.entry && i.cycle <= em.cycle);
            prop_assert!(inserted_before);
        }
    }
}
