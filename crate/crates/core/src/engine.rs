//! Deterministic discrete-event scheduler and seeded random streams.
//!
//! Simulated time is kept as an integer count of microseconds so that event
//! ordering never depends on floating point comparison. Events with equal
//! fire times are dispatched in insertion order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};
use thiserror::Error;

const MICROS_PER_SEC: f64 = 1_000_000.0;

/// Simulated time, fixed-point microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: i64) -> Self {
        SimTime(us)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs(secs: f64) -> Self {
        SimTime((secs * MICROS_PER_SEC).round() as i64)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at {at} but clock is already {now}")]
    ScheduledInPast { at: SimTime, now: SimTime },
    #[error("run_until({until}) is before the current clock {now}")]
    RunIntoPast { until: SimTime, now: SimTime },
}

/// Handle returned by [`Scheduler::schedule`]; used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<A> {
    fire_time: SimTime,
    sequence: u64,
    action: A,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl<A> Eq for Entry<A> {}

impl<A> Entry<A> {
    fn key(&self) -> (SimTime, u64) {
        (self.fire_time, self.sequence)
    }
}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Event queue plus clock. `A` is the action token the owner dispatches on.
pub struct Scheduler<A> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Reverse<Entry<A>>>,
    live: HashSet<u64>,
    cancelled: HashSet<u64>,
    fired: u64,
}

impl<A> Default for Scheduler<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Scheduler<A> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            live: HashSet::new(),
            cancelled: HashSet::new(),
            fired: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far.
    pub fn fired(&self) -> u64 {
        self.fired
    }

    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn schedule(&mut self, fire_time: SimTime, action: A) -> Result<EventHandle, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::ScheduledInPast { at: fire_time, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Reverse(Entry { fire_time, sequence, action }));
        self.live.insert(sequence);
        Ok(EventHandle(sequence))
    }

    pub fn schedule_in(&mut self, delay: SimTime, action: A) -> Result<EventHandle, EngineError> {
        self.schedule(self.now + delay, action)
    }

    /// Cancelling an event that already fired is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        if self.live.remove(&handle.0) {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pops the next live event with `fire_time <= until`, advancing the clock to it.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, A)> {
        loop {
            let head = self.queue.peek()?;
            if head.0.fire_time > until {
                return None;
            }
            let Reverse(entry) = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&entry.sequence) {
                continue;
            }
            self.live.remove(&entry.sequence);
            debug_assert!(entry.fire_time >= self.now);
            self.now = entry.fire_time;
            self.fired += 1;
            return Some((entry.fire_time, entry.action));
        }
    }

    /// Dispatches every event with `fire_time <= until` to `handler`, then sets
    /// the clock to `until`. Handlers may schedule further events, including at
    /// the current instant.
    pub fn run_until<F>(&mut self, until: SimTime, mut handler: F) -> Result<SimTime, EngineError>
    where
        F: FnMut(&mut Self, SimTime, A),
    {
        if until < self.now {
            return Err(EngineError::RunIntoPast { until, now: self.now });
        }
        while let Some((t, action)) = self.pop_until(until) {
            handler(self, t, action);
        }
        self.now = until;
        Ok(until)
    }
}

/// SplitMix64 finalizer; used to derive seeds.
pub fn stable_mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes. Stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// A named random stream derived from a master seed.
///
/// Streams are keyed by label (and optionally an index), so adding a new
/// consumer never shifts the draws of existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_seed: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: &str) -> Self {
        Self { seed, stream_seed: stable_mix(seed, label_hash(stream_id)) }
    }

    /// Sub-stream, e.g. one per node.
    pub fn child(&self, index: u64) -> Self {
        Self { seed: self.seed, stream_seed: stable_mix(self.stream_seed, index.wrapping_add(1)) }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed)
    }
}
