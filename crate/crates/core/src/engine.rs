//! Discrete-event core: simulation clock, ordered event queue and seeded
//! random streams.
//!
//! Time is kept as integer microseconds so that sums of link delays never
//! drift; every public interface speaks milliseconds.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// A point in (or span of) simulated time, microsecond resolution.
#[derive(Copy, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    /// Sentinel used for "unreachable" / "no free resource" distances.
    pub const INFINITY: SimTime = SimTime(u64::MAX);

    pub const fn from_us(us: u64) -> Self {
        SimTime(us)
    }

    pub fn from_ms(ms: f64) -> Self {
        assert!(ms.is_finite() && ms >= 0.0, "negative or non-finite time: {ms}");
        SimTime((ms * 1000.0).round() as u64)
    }

    pub fn from_secs(s: f64) -> Self {
        Self::from_ms(s * 1000.0)
    }

    pub const fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_infinite(self) -> bool {
        self == Self::INFINITY
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Multiply by a non-negative factor, rounding to the nearest microsecond.
    pub fn scale(self, factor: f64) -> SimTime {
        assert!(factor >= 0.0, "negative scale factor");
        if self.is_infinite() {
            return self;
        }
        SimTime((self.0 as f64 * factor).round() as u64)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}ms", self.as_ms())
        }
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Handle returned by [`Scheduler::schedule`]; allows cancellation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug)]
struct EventRecord<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for EventRecord<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for EventRecord<E> {}

impl<E> PartialOrd for EventRecord<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for EventRecord<E> {
    // BinaryHeap is a max-heap: invert so the earliest (then lowest seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Counters for the event-conservation invariant.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
}

/// Ordered event queue with a monotone clock.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<EventRecord<E>>,
    cancelled: HashSet<u64>,
    stats: QueueStats,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            stats: QueueStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Enqueue `payload` to fire at `fire_at`.
    ///
    /// Scheduling in the past is a programming error and panics.
    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: {fire_at:?} < now {:?}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(EventRecord {
            fire_at,
            seq,
            payload,
        });
        self.stats.scheduled += 1;
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Cancel a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        let pending = self.heap.iter().any(|r| r.seq == handle.0);
        if pending && self.cancelled.insert(handle.0) {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    /// Pop the next live event firing at or before `end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.fire_at > end {
                return None;
            }
            let rec = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&rec.seq) {
                continue;
            }
            self.now = rec.fire_at;
            self.stats.processed += 1;
            return Some((rec.fire_at, rec.payload));
        }
    }

    /// Process every event with `fire_at <= end` in order; the clock ends at `end`.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        assert!(end >= self.now, "run_until into the past");
        let mut count = 0;
        while let Some((t, ev)) = self.pop_until(end) {
            handler(self, t, ev);
            count += 1;
        }
        self.now = end;
        count
    }

    /// Advance the clock without processing (used after the last event).
    pub fn advance_to(&mut self, t: SimTime) {
        assert!(t >= self.now, "clock moved backwards");
        self.now = t;
    }
}

/// Stable 64-bit seed for a named stream of a given run.
pub fn derive_seed(run_seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer mixed with the run seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(run_seed))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A named, independently seeded pseudo-random stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    label: String,
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(run_seed: u64, label: &str) -> Self {
        let seed = derive_seed(run_seed, label);
        RandomStream {
            label: label.to_string(),
            seed,
            draws: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw in `[lo, hi)`; `lo == hi` returns `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo <= hi, "uniform draw with lo > hi ({lo} > {hi})");
        self.draws += 1;
        let u: f64 = self.rng.random();
        if lo == hi {
            return lo;
        }
        let v = lo + (hi - lo) * u;
        // guard the open upper bound against rounding
        if v >= hi {
            lo.max(hi - (hi - lo) * f64::EPSILON)
        } else {
            v
        }
    }

    /// Exponential inter-arrival with the given rate (events per unit).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        assert!(rate > 0.0, "exponential rate must be positive");
        self.draws += 1;
        Exp::new(rate).expect("valid rate").sample(&mut self.rng)
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        self.draws += 1;
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.draws += 1;
        let u: f64 = self.rng.random();
        u < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.random()
    }
}

/// Convenience free function mirroring the stream method.
pub fn draw_uniform(stream: &mut RandomStream, lo: f64, hi: f64) -> f64 {
    stream.uniform(lo, hi)
}
