//! Simulation clock, event queue and the seeded random source.
//!
//! Everything in a simulation instance is driven from one [`Kernel`]. Events
//! scheduled for the same cycle fire in insertion order, so a run is fully
//! determined by its seed, configuration and scenario.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Simulation time in cycles.
pub type Cycle = u64;

/// Per-subsystem stream constants XOR-ed into the experiment seed.
pub mod stream {
    pub const REPLACEMENT: u64 = 0x01;
    pub const SHB_ENTRY: u64 = 0x02;
    pub const SHB_WINDOW: u64 = 0x03;
    pub const WORKLOAD: u64 = 0x04;
}

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream for one subsystem, isolated from the others.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, n)` by rejection sampling.
    pub fn rand_below(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::Sim("rand_below called with n = 0".into()));
        }
        Ok(self.below(n))
    }

    /// Like [`Rng::rand_below`] for callers that already know `n >= 1`.
    pub(crate) fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n >= 1);
        // floor(2^64 / n) * n, which wraps to 0 when n divides 2^64.
        let limit = (u64::MAX / n * n).wrapping_add(if u64::MAX % n == n - 1 { n } else { 0 });
        loop {
            let draw = self.next_u64();
            if limit == 0 || draw < limit {
                return draw % n;
            }
        }
    }

    /// Uniform float in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scheduled<P> {
    pub fire_at: Cycle,
    pub seq: u64,
    pub payload: P,
}

impl<P> Scheduled<P> {
    fn key(&self) -> (Cycle, u64) {
        (self.fire_at, self.seq)
    }
}

impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Scheduled<P> {}

impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

/// Clock plus a queue ordered by `(fire_at, insertion sequence)`.
#[derive(Debug)]
pub struct Kernel<P> {
    now: Cycle,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Scheduled<P>>>,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> Cycle {
        self.now
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn next_fire_at(&self) -> Option<Cycle> {
        self.queue.peek().map(|Reverse(e)| e.fire_at)
    }

    pub fn schedule(&mut self, fire_at: Cycle, payload: P) -> Result<()> {
        if fire_at < self.now {
            return Err(Error::Sim(format!(
                "event scheduled at cycle {fire_at} but clock is at {}",
                self.now
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { fire_at, seq, payload }));
        Ok(())
    }

    /// Advances to the next event time (or by one cycle when idle) and
    /// returns every event due at that cycle, in insertion order.
    pub fn step(&mut self) -> Vec<Scheduled<P>> {
        let Some(t) = self.next_fire_at() else {
            self.now += 1;
            return Vec::new();
        };
        self.now = t;
        let mut fired = Vec::new();
        while self.next_fire_at() == Some(t) {
            let Reverse(e) = self.queue.pop().expect("peeked event");
            fired.push(e);
        }
        fired
    }

    /// Pops the single earliest event, advancing the clock to it.
    pub fn pop_next(&mut self) -> Option<Scheduled<P>> {
        let Reverse(e) = self.queue.pop()?;
        self.now = e.fire_at;
        Some(e)
    }

    /// Moves the clock forward to `t` without firing anything. Only valid
    /// when no event is due before `t`.
    pub fn advance_idle_to(&mut self, t: Cycle) {
        debug_assert!(self.next_fire_at().map_or(true, |f| f >= t));
        if t > self.now {
            self.now = t;
        }
    }
}
