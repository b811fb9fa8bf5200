//! Deterministic priority queue of simulation events.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

/// Event kinds, in tie-break rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    MsgArrival,
    ComputeDone,
    MemDone,
    SeServiceDone,
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub time: u64,
    pub kind: EventKind,
    pub source: usize,
    pub seq: u64,
    pub payload: P,
}

impl<P> Event<P> {
    fn key(&self) -> (u64, EventKind, usize, u64) {
        (self.time, self.kind, self.source, self.seq)
    }
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Event<P>>,
    next_seq: u64,
    now: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
        }
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules an event; events in the past are clamped to the current
    /// time.
    pub fn schedule(&mut self, time: u64, kind: EventKind, source: usize, payload: P) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            time: time.max(self.now),
            kind,
            source,
            seq,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<Event<P>> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_source() {
        let mut q = EventQueue::new();
        q.schedule(5, EventKind::MsgArrival, 2, 'b');
        q.schedule(5, EventKind::MsgArrival, 1, 'a');
        assert_eq!(q.pop().unwrap().payload, 'a');
        assert_eq!(q.pop().unwrap().payload, 'b');
        assert!(q.pop().is_none());
    }

    #[test]
    fn ties_break_by_kind_before_source() {
        let mut q = EventQueue::new();
        q.schedule(5, EventKind::MemDone, 0, 1);
        q.schedule(5, EventKind::MsgArrival, 9, 2);
        assert_eq!(q.pop().unwrap().payload, 2);
    }

    proptest! {
        #[test]
        fn pops_in_sorted_order(items in proptest::collection::vec((0u64..50, 0usize..4, 0usize..5), 0..200)) {
            let kinds = [EventKind::MsgArrival, EventKind::ComputeDone, EventKind::MemDone, EventKind::SeServiceDone];
            let mut q = EventQueue::new();
            let mut reference = Vec::new();
            for (i, &(t, k, s)) in items.iter().enumerate() {
                q.schedule(t, kinds[k], s, i);
                reference.push((t, kinds[k], s, i as u64, i));
            }
            reference.sort();
            let got: Vec<usize> = std::iter::from_fn(|| q.pop().map(|e| e.payload)).collect();
            let want: Vec<usize> = reference.into_iter().map(|r| r.4).collect();
            prop_assert_eq!(got, want);
        }
    }
}
