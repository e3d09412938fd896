//! Time-ordered event queue with cancellable handles.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::error::ScheduleError;

/// Identifies a scheduled event; used to cancel it before it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Debug)]
struct Entry<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Events pop in `(time, insertion sequence)` order, so simultaneous events
/// keep FIFO order.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    live: HashSet<u64>,
    next_seq: u64,
    now: f64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            next_seq: 0,
            now: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn schedule(&mut self, time: f64, event: E) -> Result<EventHandle, ScheduleError> {
        if !time.is_finite() {
            return Err(ScheduleError::NotFinite);
        }
        if time < self.now {
            return Err(ScheduleError::InPast {
                at: time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Entry { time, seq, event });
        Ok(EventHandle(seq))
    }

    /// Returns false if the event already fired or was cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Time of the next live event.
    pub fn peek_time(&mut self) -> Option<f64> {
        self.discard_cancelled();
        self.heap.peek().map(|e| e.time)
    }

    /// Removes the next live event with `time <= limit` and advances the
    /// clock to its fire time.
    pub fn pop_until(&mut self, limit: f64) -> Option<(f64, EventHandle, E)> {
        self.discard_cancelled();
        if self.heap.peek()?.time > limit {
            return None;
        }
        let entry = self.heap.pop()?;
        self.live.remove(&entry.seq);
        self.now = entry.time;
        Some((entry.time, EventHandle(entry.seq), entry.event))
    }

    /// Moves the clock forward without processing anything.
    pub fn advance_to(&mut self, time: f64) {
        if time > self.now {
            self.now = time;
        }
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn discard_cancelled(&mut self) {
        while let Some(top) = self.heap.peek() {
            if !self.live.contains(&top.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }
}
