#![allow(dead_code)]

use std::collections::HashSet;

use rascache::hierarchy::{FillProvenance, FillRecord, Level};
use rascache::cache::ClearCause;
use rascache::shb::window_base;
use rascache::{DefenseMode, HierarchyConfig, OpKind, Resolve, Rng, Simulator};

fn below(r: &mut Rng, n: u64) -> u64 {
    r.rand_below(n).expect("n > 0")
}

fn pick<T: Copy>(r: &mut Rng, xs: &[T]) -> T {
    xs[below(r, xs.len() as u64) as usize]
}

/// A random hierarchy shape and defense knobs for `kind` ("spec" or "plus").
pub fn random_config(r: &mut Rng, plus: bool) -> HierarchyConfig {
    let rate = pick(r, &[1, 2, 3, 5]);
    let entries = pick(r, &[1, 2, 4]);
    let window = pick(r, &[1, 4, 16, 64]);
    let defense = if plus { DefenseMode::ras_plus(rate, entries, window) } else { DefenseMode::ras_spec(rate, entries, window) };
    let mut cfg = HierarchyConfig::new(defense);
    cfg.l1.mshr_entries = pick(r, &[1, 2, 4, 16]);
    cfg.l2.mshr_entries = pick(r, &[2, 8, 32]);
    cfg
}

/// Builds and runs one random stream of loads, stores and flushes with
/// mixed speculation, squashes and address reuse.
pub fn random_stream(seed: u64, plus: bool) -> Simulator {
    let mut r = Rng::new(seed);
    let cfg = random_config(&mut r, plus);
    let mut sim = Simulator::new(cfg, seed).expect("valid config");
    sim.record_fills(true);
    sim.trace_shb(true);
    let pool: Vec<u64> = (0..24).map(|i| 0x10_0000 + i * 64 + (i % 3) * cfg.l1.way_size_bytes()).collect();
    let n = 4 + below(&mut r, 36);
    let mut t = 0;
    let mut last_auth = 0;
    for _ in 0..n {
        t += below(&mut r, 20);
        let addr = pick(&mut r, &pool) + below(&mut r, 8) * 8;
        let u = r.next_f64();
        let kind = if u < 0.75 {
            OpKind::Load
        } else if u < 0.95 {
            OpKind::Store
        } else {
            OpKind::Flush
        };
        let resolve = if r.chance(0.2) {
            Resolve::SquashAt(t + 1 + below(&mut r, 200))
        } else {
            let delay = if r.chance(0.6) { below(&mut r, 300) } else { 0 };
            last_auth = last_auth.max(t + delay);
            Resolve::AuthorizeAt(last_auth)
        };
        sim.push(kind, addr, t, resolve).expect("ops pushed in time order");
    }
    sim.run_to_quiet().expect("stream runs");
    sim
}

fn describe(r: &FillRecord) -> String {
    format!("{:?} fill of {:#x} at {} via {:?}", r.level, r.line_addr, r.cycle, r.provenance)
}

/// Was `entry` in the SHB of capacity `cap` when the tick at `cycle` ran?
fn entry_current(sim: &Simulator, entry: u64, cycle: u64, cap: usize) -> bool {
    let current = |strict: bool| {
        let ins: Vec<u64> = sim
            .shb_insertions()
            .iter()
            .filter(|i| if strict { i.cycle < cycle } else { i.cycle <= cycle })
            .map(|i| i.addr)
            .collect();
        ins[ins.len().saturating_sub(cap)..].contains(&entry)
    };
    current(true) || current(false)
}

/// An SHB-driven fill must come from an emission whose entry was current and
/// whose window holds the line.
fn shb_fill_ok(sim: &Simulator, r: &FillRecord) -> bool {
    let d = sim.hierarchy().config().defense;
    let lb = sim.hierarchy().config().l1.line_bytes;
    let Some(src) = r.shb_source else { return false };
    let base = window_base(src, d.window_lines, lb);
    r.line_addr >= base
        && r.line_addr < base + d.window_lines * lb
        && sim.emissions().iter().any(|e| {
            e.entry == src && e.fetch_addr == r.line_addr && e.cycle <= r.cycle && entry_current(sim, src, e.cycle, d.shb_entries)
        })
}

/// Fills that install data for an access that was speculative and
/// unauthorized. A demand-driven fill needs a requester that was authorized
/// when it issued; SHB-driven fills need a current SHB entry.
pub fn speculative_fill_violations(sim: &Simulator) -> Vec<String> {
    let mut out = Vec::new();
    let mut l1_filled = HashSet::new();
    for r in sim.hierarchy().fill_log() {
        let ok = match r.provenance {
            FillProvenance::Demand | FillProvenance::Cleared(ClearCause::NonSpecAccess) => r.requesters.iter().any(|&q| {
                sim.entry(q).is_some_and(|e| match (e.authorized_at, e.issued_at) {
                    (Some(a), Some(i)) => a <= i && a <= r.cycle,
                    _ => false,
                })
            }),
            FillProvenance::ShbFetch | FillProvenance::Cleared(ClearCause::ShbFetch) => shb_fill_ok(sim, r),
            FillProvenance::Writeback => l1_filled.contains(&r.line_addr),
            _ => false,
        };
        if r.level == Level::L1 {
            l1_filled.insert(r.line_addr);
        }
        if !ok {
            out.push(describe(r));
        }
    }
    out
}

/// Under RaS+ every fill is SHB-driven (or a writeback of a line an SHB
/// fill installed earlier).
pub fn window_violations(sim: &Simulator) -> Vec<String> {
    let mut out = Vec::new();
    let mut l1_filled = HashSet::new();
    for r in sim.hierarchy().fill_log() {
        let ok = match r.provenance {
            FillProvenance::ShbFetch | FillProvenance::Cleared(ClearCause::ShbFetch) => shb_fill_ok(sim, r),
            FillProvenance::Writeback => l1_filled.contains(&r.line_addr),
            _ => false,
        };
        if r.level == Level::L1 {
            l1_filled.insert(r.line_addr);
        }
        if !ok {
            out.push(describe(r));
        }
    }
    out
}
