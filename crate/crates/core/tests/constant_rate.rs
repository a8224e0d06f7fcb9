use proptest::prelude::*;
use rascache::kernel::Cycle;
use rascache::workloads::{generate_trace, load_trace, LocalityModel, ReplayOptions, TraceRecord};
use rascache::{DefenseMode, HierarchyConfig, Rng, Simulator};

fn run(trace: &[TraceRecord], cfg: HierarchyConfig, until: Cycle) -> Simulator {
    let mut sim = Simulator::new(cfg, 4).unwrap();
    sim.trace_shb(true);
    load_trace(&mut sim, trace, &ReplayOptions::default()).unwrap();
    sim.run_until(until).unwrap();
    sim
}

fn with_addresses(trace: &[TraceRecord], f: impl Fn(u64) -> u64) -> Vec<TraceRecord> {
    trace.iter().map(|r| TraceRecord { addr: f(r.addr), ..*r }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emission_times_ignore_miss_pattern(
        seed in any::<u64>(),
        rate in 1u64..8,
        entries in 1usize..5,
        log_w in 0u32..7,
        mshrs in 1usize..4,
        plus in any::<bool>(),
        horizon in 200u64..3_000,
    ) {
        let w = 1 << log_w;
        let defense = if plus { DefenseMode::ras_plus(rate, entries, w) } else { DefenseMode::ras_spec(rate, entries, w) };
        let mut cfg = HierarchyConfig::new(defense);
        cfg.l1.mshr_entries = mshrs;
        let trace = generate_trace(&LocalityModel::default(), 300, Rng::new(seed)).unwrap();
        // Every access to one line: hits after the first miss.
        let hot = with_addresses(&trace, |a| 0x5000 + a % 64);
        // Every access to a distinct line: misses that exhaust the MSHRs.
        let cold = with_addresses(&trace, |a| 0x100_0000 + (a / 8) * 64 * 64);

        let a = run(&hot, cfg, horizon);
        let b = run(&cold, cfg, horizon);
        let ta: Vec<Cycle> = a.emissions().iter().map(|e| e.cycle).collect();
        let tb: Vec<Cycle> = b.emissions().iter().map(|e| e.cycle).collect();
        prop_assert_eq!(&ta, &tb);
        prop_assert!(a.hierarchy().l1().stats().misses != b.hierarchy().l1().stats().misses);

        for sim in [&a, &b] {
            let s = sim.shb().unwrap().stats();
            // Ticks fire at 0, R, 2R, ...; those in (0, T] number floor(T / R).
            prop_assert_eq!(s.emissions + s.empty_ticks, horizon / rate + 1);
            prop_assert!(sim.emissions().iter().all(|e| e.cycle % rate == 0));
        }
    }
}

#[test]
fn every_tick_emits_once_the_buffer_is_filled() {
    let cfg = HierarchyConfig::new(DefenseMode::ras_spec(3, 1, 4));
    let mut sim = Simulator::new(cfg, 1).unwrap();
    sim.trace_shb(true);
    sim.load(0x1000).unwrap();
    let start = sim.now();
    sim.run_until(start + 300).unwrap();
    let after: Vec<Cycle> = sim.emissions().iter().map(|e| e.cycle).filter(|&c| c > start).collect();
    assert_eq!(after.len() as u64, 300 / 3);
    assert!(after.windows(2).all(|w| w[1] - w[0] == 3));
}
