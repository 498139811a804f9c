//! Event queue and virtual clock.
//!
//! Events are ordered by `(fire_at, seq)` where `seq` is a global insertion
//! counter, so events scheduled for the same instant dispatch in the order
//! they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("event scheduled at {fire_at} but the clock is already at {now}")]
    SchedulingInPast { fire_at: SimTime, now: SimTime },
}

/// Opaque handle returned by [`Scheduler::schedule`], used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Lifetime counters, used to check that every event is either dispatched or
/// cancelled exactly once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub scheduled: u64,
    pub dispatched: u64,
    pub cancelled: u64,
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    // One bit per seq: set once the event has been dispatched or cancelled.
    resolved: Vec<u64>,
    live: usize,
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
            resolved: Vec::new(),
            live: 0,
            stats: QueueStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    /// Number of events still pending.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    fn is_resolved(&self, seq: u64) -> bool {
        let word = (seq / 64) as usize;
        word < self.resolved.len() && self.resolved[word] & (1 << (seq % 64)) != 0
    }

    /// Marks `seq` resolved; returns false if it already was.
    fn resolve(&mut self, seq: u64) -> bool {
        if seq >= self.next_seq || self.is_resolved(seq) {
            return false;
        }
        let word = (seq / 64) as usize;
        if word >= self.resolved.len() {
            self.resolved.resize(word + 1, 0);
        }
        self.resolved[word] |= 1 << (seq % 64);
        self.live -= 1;
        true
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> Result<EventHandle, KernelError> {
        if fire_at < self.now {
            return Err(KernelError::SchedulingInPast {
                fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at,
            seq,
            payload,
        });
        self.live += 1;
        self.stats.scheduled += 1;
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("a non-negative delay never lands in the past")
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.resolve(handle.0) {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    /// Pops the next live event with `fire_at <= limit` and advances the clock to it.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        loop {
            let top = self.heap.peek()?;
            if top.fire_at > limit {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.resolve(entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.stats.dispatched += 1;
            return Some((entry.fire_at, entry.payload));
        }
    }

    /// Dispatches every event due at or before `end` through `handler`, then
    /// sets the clock to `end`. Handlers may schedule further events.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut count = 0;
        while let Some((at, event)) = self.pop_until(end) {
            handler(self, at, event);
            count += 1;
        }
        if end > self.now {
            self.now = end;
        }
        count
    }

    /// Cancels everything still pending. Returns how many events were dropped.
    pub fn drain(&mut self) -> usize {
        let n = self.live;
        let seqs: Vec<u64> = self.heap.drain().map(|e| e.seq).collect();
        for seq in seqs {
            self.resolve(seq);
        }
        self.stats.cancelled += n as u64;
        n
    }
}
