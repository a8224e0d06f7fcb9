//! Safe History Buffer: a FIFO of authorized addresses that drives
//! constant-rate, window-randomized cache fills.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::kernel::{Cycle, Rng};

/// One SHB tick that produced a fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShbEmission {
    pub cycle: Cycle,
    /// Entry the window was built around.
    pub entry: u64,
    /// Line-aligned fetch address, also used as the NoFillClear address.
    pub fetch_addr: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShbStats {
    pub insertions: u64,
    pub emissions: u64,
    pub empty_ticks: u64,
    pub dropped_full_mshr: u64,
}

#[derive(Debug, Clone)]
pub struct SafeHistoryBuffer {
    entries: VecDeque<u64>,
    capacity: usize,
    rate_cycles: Cycle,
    window_lines: u64,
    line_bytes: u64,
    entry_rng: Rng,
    window_rng: Rng,
    stats: ShbStats,
}

/// Lower bound of the `window_lines`-line aligned region holding `addr`.
pub fn window_base(addr: u64, window_lines: u64, line_bytes: u64) -> u64 {
    let span = window_lines * line_bytes;
    addr - addr % span
}

impl SafeHistoryBuffer {
    pub fn new(
        capacity: usize,
        rate_cycles: Cycle,
        window_lines: u64,
        line_bytes: u64,
        entry_rng: Rng,
        window_rng: Rng,
    ) -> Self {
        assert!(capacity >= 1 && rate_cycles >= 1 && window_lines >= 1);
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
            rate_cycles,
            window_lines,
            line_bytes,
            entry_rng,
            window_rng,
            stats: ShbStats::default(),
        }
    }

    pub fn rate_cycles(&self) -> Cycle {
        self.rate_cycles
    }

    pub fn window_lines(&self) -> u64 {
        self.window_lines
    }

    pub fn entries(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> &ShbStats {
        &self.stats
    }

    pub(crate) fn note_dropped(&mut self) {
        self.stats.dropped_full_mshr += 1;
    }

    /// Caller guarantees `addr` is authorized. Duplicates are kept.
    pub fn insert(&mut self, addr: u64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(addr);
        self.stats.insertions += 1;
    }

    /// Picks an entry uniformly, then a uniform line of its aligned window.
    pub fn select_fetch_address(&mut self) -> Option<(u64, u64)> {
        if self.entries.is_empty() {
            return None;
        }
        let idx = self.entry_rng.below(self.entries.len() as u64) as usize;
        let entry = self.entries[idx];
        let base = window_base(entry, self.window_lines, self.line_bytes);
        let offset = self.window_rng.below(self.window_lines) * self.line_bytes;
        Some((entry, base + offset))
    }

    /// One constant-rate opportunity. Emits nothing when empty.
    pub fn tick(&mut self, now: Cycle) -> Option<ShbEmission> {
        debug_assert_eq!(now % self.rate_cycles, 0, "SHB ticked off-rate");
        match self.select_fetch_address() {
            Some((entry, fetch_addr)) => {
                self.stats.emissions += 1;
                Some(ShbEmission { cycle: now, entry, fetch_addr })
            }
            None => {
                self.stats.empty_ticks += 1;
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shb(cap: usize, rate: u64, window: u64) -> SafeHistoryBuffer {
        SafeHistoryBuffer::new(cap, rate, window, 64, Rng::new(2), Rng::new(3))
    }

    #[test]
    fn fifo_capacity_one() {
        let mut s = shb(1, 3, 1);
        s.insert(0xA);
        s.insert(0xB);
        assert_eq!(s.entries().collect::<Vec<_>>(), vec![0xB]);
    }

    #[test]
    fn fifo_drops_oldest() {
        let mut s = shb(4, 3, 1);
        for a in [1, 2, 3, 4, 5] {
            s.insert(a);
        }
        assert_eq!(s.entries().collect::<Vec<_>>(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn duplicates_kept() {
        let mut s = shb(4, 3, 1);
        s.insert(0x40);
        s.insert(0x40);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn empty_selects_nothing() {
        let mut s = shb(4, 3, 4);
        assert_eq!(s.select_fetch_address(), None);
        assert_eq!(s.tick(0), None);
        assert_eq!(s.stats().empty_ticks, 1);
    }

    #[test]
    fn window_of_one_line() {
        let mut s = shb(1, 3, 1);
        s.insert(0x1040);
        assert_eq!(s.select_fetch_address(), Some((0x1040, 0x1040)));
        s.insert(0x1077);
        assert_eq!(s.select_fetch_address(), Some((0x1077, 0x1040)));
    }

    #[test]
    fn window_of_64_lines() {
        let mut s = shb(1, 3, 64);
        s.insert(0x1234);
        assert_eq!(window_base(0x1234, 64, 64), 0x1000);
        for _ in 0..1000 {
            let (_, f) = s.select_fetch_address().unwrap();
            assert!((0x1000..0x2000).contains(&f));
            assert_eq!(f % 64, 0);
        }
    }

    #[test]
    fn window_selection_matches_rng_oracle() {
        let mut s = SafeHistoryBuffer::new(2, 3, 16, 64, Rng::new(10), Rng::new(11));
        s.insert(0x4000);
        s.insert(0x8123);
        let mut er = Rng::new(10);
        let mut wr = Rng::new(11);
        for _ in 0..50 {
            let entry = [0x4000u64, 0x8123][(er.next_u64() % 2) as usize];
            let want = window_base(entry, 16, 64) + (wr.next_u64() % 16) * 64;
            assert_eq!(s.select_fetch_address(), Some((entry, want)));
        }
    }

    #[test]
    fn ten_emissions_in_thirty_cycles() {
        let mut s = shb(1, 3, 1);
        s.insert(0x40);
        let n = (0..30u64).filter(|t| t % 3 == 0).filter_map(|t| s.tick(t)).count();
        assert_eq!(n, 10);
    }
}
