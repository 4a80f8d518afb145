//! Relaxation-accuracy measurement.
//!
//! A sequential shadow structure runs alongside the structure under test.
//! One global lock is placed exactly around the linearization attempts:
//! a thread acquires it, performs the publish CAS, and iff that succeeds
//! applies the matching shadow insert/delete before releasing. Window
//! search stays outside the lock. A delete reports the removed label's
//! distance from the exact-semantics end (0 = exact hit).
//!
//! Structures take the hook as a generic [`Instrument`] parameter;
//! [`Untracked`] is the zero-cost pass-through, so unmeasured call paths
//! compile down to the bare CAS.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Mutex;

/// Which end of the shadow sequence an operation addresses. Stacks insert
/// and remove at `Front`; queues insert at `Back` and remove at `Front`;
/// deques use both per side (left = front, right = back).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Front,
    Back,
}

/// Measurement hook around sequence-structure linearization points.
/// `attempt` performs the single publish CAS; implementations must call it
/// exactly once and may not block while doing so.
///
/// # Safety
///
/// `insert`'s `label` points at the value being inserted. Callers guarantee
/// it stays readable for the whole call whenever `attempt` returns true;
/// implementations may dereference it only during the call, after invoking
/// `attempt`. (Keeping it a raw pointer leaves the unmeasured path free of
/// any reference into the shared node.)
pub unsafe trait Instrument<T>: Sync {
    /// Wraps an insert linearization. `label` identifies the inserted item.
    fn insert<F: FnOnce() -> bool>(&self, label: *const T, end: End, attempt: F) -> bool;

    /// Wraps a remove linearization; `attempt` yields the removed item by
    /// value when its CAS wins.
    fn remove<F: FnOnce() -> Option<T>>(&self, end: End, attempt: F) -> Option<T>;
}

/// Measurement hook around counter linearization points.
pub trait CounterInstrument: Sync {
    /// Wraps one increment/decrement attempt; `attempt` yields the observed
    /// global value when its CAS wins.
    fn apply<F: FnOnce() -> Option<u64>>(&self, delta: i64, attempt: F) -> Option<u64>;
}

/// No measurement: every hook is the bare attempt.
pub struct Untracked;

unsafe impl<T> Instrument<T> for Untracked {
    #[inline(always)]
    fn insert<F: FnOnce() -> bool>(&self, _: *const T, _: End, attempt: F) -> bool {
        attempt()
    }
    #[inline(always)]
    fn remove<F: FnOnce() -> Option<T>>(&self, _: End, attempt: F) -> Option<T> {
        attempt()
    }
}

impl CounterInstrument for Untracked {
    #[inline(always)]
    fn apply<F: FnOnce() -> Option<u64>>(&self, _: i64, attempt: F) -> Option<u64> {
        attempt()
    }
}

/// Rank error of one linearized operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ErrorRecord {
    pub op: u64,
    pub rank: u64,
}

/// Exact aggregate of a set of error records.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub max: u64,
    pub count: u64,
}

/// Mean/max/count over collected records; empty input yields all zeros.
pub fn summarize(records: &[ErrorRecord]) -> ErrorSummary {
    if records.is_empty() {
        return ErrorSummary::default();
    }
    let sum: u128 = records.iter().map(|r| r.rank as u128).sum();
    ErrorSummary {
        mean: sum as f64 / records.len() as f64,
        max: records.iter().map(|r| r.rank).max().unwrap_or(0),
        count: records.len() as u64,
    }
}

const NIL: usize = usize::MAX;

struct ShadowNode<T> {
    label: T,
    prev: usize,
    next: usize,
}

/// Doubly linked label sequence with O(1) ends, O(1) label lookup and
/// O(rank) rank computation (rank = steps from the queried end).
struct ShadowList<T> {
    nodes: Vec<ShadowNode<T>>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
    index: HashMap<T, usize>,
}

impl<T: Clone + Eq + Hash> ShadowList<T> {
    fn new() -> Self {
        ShadowList {
            nodes: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
            index: HashMap::new(),
        }
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn alloc(&mut self, label: T, prev: usize, next: usize) -> usize {
        let node = ShadowNode { label, prev, next };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i] = node;
                i
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    fn insert(&mut self, label: T, end: End) {
        let idx = match end {
            End::Front => {
                let idx = self.alloc(label.clone(), NIL, self.head);
                if self.head != NIL {
                    self.nodes[self.head].prev = idx;
                } else {
                    self.tail = idx;
                }
                self.head = idx;
                idx
            }
            End::Back => {
                let idx = self.alloc(label.clone(), self.tail, NIL);
                if self.tail != NIL {
                    self.nodes[self.tail].next = idx;
                } else {
                    self.head = idx;
                }
                self.tail = idx;
                idx
            }
        };
        let previous = self.index.insert(label, idx);
        assert!(previous.is_none(), "duplicate label in measured run");
    }

    /// Unlinks `label` and returns its distance from `end`.
    fn remove_ranked(&mut self, label: &T, end: End) -> Option<u64> {
        let idx = self.index.remove(label)?;
        let mut rank = 0u64;
        let mut cur = match end {
            End::Front => self.head,
            End::Back => self.tail,
        };
        while cur != idx {
            debug_assert!(cur != NIL, "label indexed but not linked");
            cur = match end {
                End::Front => self.nodes[cur].next,
                End::Back => self.nodes[cur].prev,
            };
            rank += 1;
        }
        let (prev, next) = (self.nodes[idx].prev, self.nodes[idx].next);
        if prev != NIL {
            self.nodes[prev].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.nodes[next].prev = prev;
        } else {
            self.tail = prev;
        }
        self.free.push(idx);
        Some(rank)
    }

    fn labels(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.head;
        while cur != NIL {
            out.push(self.nodes[cur].label.clone());
            cur = self.nodes[cur].next;
        }
        out
    }
}

struct SequenceState<T> {
    shadow: ShadowList<T>,
    records: Vec<ErrorRecord>,
    next_op: u64,
}

/// Shadow-sequence oracle for stacks, queues and deques. All measured
/// operations on one structure must share one oracle; mixing measured and
/// unmeasured operations on the same structure voids the measurement.
pub struct SequenceOracle<T> {
    state: Mutex<SequenceState<T>>,
}

impl<T: Clone + Eq + Hash> SequenceOracle<T> {
    pub fn new() -> Self {
        SequenceOracle {
            state: Mutex::new(SequenceState {
                shadow: ShadowList::new(),
                records: Vec::new(),
                next_op: 0,
            }),
        }
    }

    pub fn records(&self) -> Vec<ErrorRecord> {
        self.state.lock().unwrap().records.clone()
    }

    pub fn summary(&self) -> ErrorSummary {
        summarize(&self.state.lock().unwrap().records)
    }

    /// Labels currently inside the shadow, front to back. At quiescence this
    /// must equal the measured structure's contents.
    pub fn remaining(&self) -> Vec<T> {
        self.state.lock().unwrap().shadow.labels()
    }
}

impl<T: Clone + Eq + Hash> Default for SequenceOracle<T> {
    fn default() -> Self {
        Self::new()
    }
}

unsafe impl<T: Clone + Eq + Hash + Sync + Send> Instrument<T> for SequenceOracle<T> {
    // The trait's safety contract guarantees the pointer outlives this call
    // whenever `attempt` succeeds.
    #[allow(clippy::not_unsafe_ptr_arg_deref)]
    fn insert<F: FnOnce() -> bool>(&self, label: *const T, end: End, attempt: F) -> bool {
        let mut state = self.state.lock().unwrap();
        let ok = attempt();
        if ok {
            // Contract: the label outlives the call when attempt succeeded,
            // and any concurrent taker serializes behind this lock.
            let label = unsafe { (*label).clone() };
            state.shadow.insert(label, end);
        }
        ok
    }

    fn remove<F: FnOnce() -> Option<T>>(&self, end: End, attempt: F) -> Option<T> {
        let mut state = self.state.lock().unwrap();
        let removed = attempt();
        if let Some(label) = &removed {
            let rank = state
                .shadow
                .remove_ranked(label, end)
                .expect("removed label missing from shadow");
            let op = state.next_op;
            state.next_op += 1;
            state.records.push(ErrorRecord { op, rank });
        }
        removed
    }
}

struct CounterState {
    twin: i64,
    records: Vec<ErrorRecord>,
    next_op: u64,
}

/// Exact-twin oracle for counters: the shadow is a plain counter updated in
/// the same critical section; the error is |returned global - twin|.
pub struct CounterOracle {
    state: Mutex<CounterState>,
}

impl CounterOracle {
    pub fn new() -> Self {
        CounterOracle {
            state: Mutex::new(CounterState {
                twin: 0,
                records: Vec::new(),
                next_op: 0,
            }),
        }
    }

    pub fn records(&self) -> Vec<ErrorRecord> {
        self.state.lock().unwrap().records.clone()
    }

    pub fn summary(&self) -> ErrorSummary {
        summarize(&self.state.lock().unwrap().records)
    }

    pub fn twin_value(&self) -> i64 {
        self.state.lock().unwrap().twin
    }
}

impl Default for CounterOracle {
    fn default() -> Self {
        Self::new()
    }
}

impl CounterInstrument for CounterOracle {
    fn apply<F: FnOnce() -> Option<u64>>(&self, delta: i64, attempt: F) -> Option<u64> {
        let mut state = self.state.lock().unwrap();
        let observed = attempt();
        if let Some(value) = observed {
            state.twin += delta;
            let rank = (value as i64 - state.twin).unsigned_abs();
            let op = state.next_op;
            state.next_op += 1;
            state.records.push(ErrorRecord { op, rank });
        }
        observed
    }
}
