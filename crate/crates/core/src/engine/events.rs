//! Event queue with a total order on (time, kind precedence, sequence).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::time::SimTime;
use crate::workload::JobId;

/// Precedence at equal timestamps, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    ConfigChange,
    RuleExpiry,
    DeletionCycle,
    TransferDone,
    TaskRelease,
    Demand,
    Eviction,
    JobEnd,
    JobStart,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Payload {
    None,
    Change(usize),
    /// Ramp step: (ramp generation, slots).
    Slots(u64, u32),
    Task(usize),
    AnalysisArrival,
    Placement(usize),
    /// Carousel chunk `k` of task `t` is off tape.
    Chunk(usize, usize),
    Job(JobId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: SimTime,
    pub kind: EventKind,
    pub seq: u64,
    pub payload: Payload,
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Panics when asked to schedule into the past.
    pub fn push(&mut self, time: SimTime, kind: EventKind, payload: Payload) {
        assert!(
            time >= self.now,
            "event scheduled in the past: {time} < {}",
            self.now
        );
        self.heap.push(Reverse(Event {
            time,
            kind,
            seq: self.seq,
            payload,
        }));
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(e) = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
