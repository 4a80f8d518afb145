//! Round-robin multi-instance baselines: each thread walks the slots in
//! strict order following its local counter, retrying a contended slot
//! until it succeeds there. The stack variant carries a proven bound of
//! `(2 * threads - 1) * (width - 1)`.
//!
//! A Get that observes its slot empty performs one deterministic full
//! round: if every slot is empty it returns empty without advancing,
//! otherwise it completes on the first non-empty slot and continues from
//! there (strictly spinning on an empty slot would block any drain).

use crossbeam_epoch as epoch;
use crossbeam_utils::CachePadded;

use crate::baselines::exact::{MsQueue, Raced, SubCounter, TreiberStack};
use crate::oracle::{CounterInstrument, End, Instrument, Untracked};

/// Per-thread round-robin positions, one per operation direction:
/// successive successful puts of one thread touch indices i, i+1 mod
/// width, ..., and likewise - independently - its gets.
#[derive(Default)]
pub struct RobinContext {
    next_put: usize,
    next_get: usize,
}

/// k for the round-robin stack: `(2 * threads - 1) * (width - 1)`.
pub fn stack_k_bound(threads: usize, width: usize) -> u64 {
    (2 * threads as u64 - 1) * (width as u64 - 1)
}

macro_rules! robin_plumbing {
    () => {
        pub fn thread_context(&self) -> RobinContext {
            RobinContext::default()
        }

        pub fn width(&self) -> usize {
            self.slots.len()
        }
    };
}

/// Round-robin relaxed stack.
pub struct RobinStack<T> {
    slots: Box<[CachePadded<TreiberStack<T>>]>,
}

impl<T: Send> RobinStack<T> {
    pub fn new(width: usize) -> Self {
        assert!(width >= 1);
        RobinStack {
            slots: (0..width)
                .map(|_| CachePadded::new(TreiberStack::new()))
                .collect(),
        }
    }

    robin_plumbing!();

    pub fn push(&self, ctx: &mut RobinContext, value: T) {
        self.push_with(ctx, value, &Untracked)
    }

    pub fn push_with<I: Instrument<T>>(&self, ctx: &mut RobinContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = TreiberStack::prepare((), value);
        let label = TreiberStack::payload_ptr(node);
        let slot = ctx.next_put % self.slots.len();
        // Must succeed here before moving on.
        loop {
            if instr.insert(label, End::Front, || {
                self.slots[slot].try_push_node(node, guard)
            }) {
                ctx.next_put = slot.wrapping_add(1);
                return;
            }
        }
    }

    pub fn pop(&self, ctx: &mut RobinContext) -> Option<T> {
        self.pop_with(ctx, &Untracked)
    }

    pub fn pop_with<I: Instrument<T>>(&self, ctx: &mut RobinContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let width = self.slots.len();
        let start = ctx.next_get % width;
        for off in 0..width {
            let i = (start + off) % width;
            loop {
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[i].try_pop(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    ctx.next_get = i.wrapping_add(1);
                    return Some(v);
                }
                if !raced {
                    break; // observed empty: move on in the round
                }
            }
        }
        None
    }

    pub fn drain(&self, ctx: &mut RobinContext) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(v) = self.pop(ctx) {
            out.push(v);
        }
        out
    }
}

/// Round-robin relaxed FIFO queue.
pub struct RobinQueue<T> {
    slots: Box<[CachePadded<MsQueue<T>>]>,
}

impl<T: Send> RobinQueue<T> {
    pub fn new(width: usize) -> Self {
        assert!(width >= 1);
        RobinQueue {
            slots: (0..width)
                .map(|_| CachePadded::new(MsQueue::new()))
                .collect(),
        }
    }

    robin_plumbing!();

    pub fn enqueue(&self, ctx: &mut RobinContext, value: T) {
        self.enqueue_with(ctx, value, &Untracked)
    }

    pub fn enqueue_with<I: Instrument<T>>(&self, ctx: &mut RobinContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = MsQueue::prepare((), value);
        let label = MsQueue::payload_ptr(node);
        let slot = ctx.next_put % self.slots.len();
        loop {
            if instr.insert(label, End::Back, || {
                self.slots[slot].try_enqueue_node(node, guard)
            }) {
                ctx.next_put = slot.wrapping_add(1);
                return;
            }
        }
    }

    pub fn dequeue(&self, ctx: &mut RobinContext) -> Option<T> {
        self.dequeue_with(ctx, &Untracked)
    }

    pub fn dequeue_with<I: Instrument<T>>(&self, ctx: &mut RobinContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let width = self.slots.len();
        let start = ctx.next_get % width;
        for off in 0..width {
            let i = (start + off) % width;
            loop {
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[i].try_dequeue(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    ctx.next_get = i.wrapping_add(1);
                    return Some(v);
                }
                if !raced {
                    break;
                }
            }
        }
        None
    }

    pub fn drain(&self, ctx: &mut RobinContext) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(v) = self.dequeue(ctx) {
            out.push(v);
        }
        out
    }
}

/// Round-robin relaxed counter.
pub struct RobinCounter {
    slots: Box<[CachePadded<SubCounter>]>,
}

impl RobinCounter {
    pub fn new(width: usize) -> Self {
        assert!(width >= 1);
        RobinCounter {
            slots: (0..width).map(|_| CachePadded::new(SubCounter::new())).collect(),
        }
    }

    robin_plumbing!();

    pub fn increment(&self, ctx: &mut RobinContext) -> u64 {
        self.increment_with(ctx, &Untracked)
    }

    pub fn increment_with<I: CounterInstrument>(&self, ctx: &mut RobinContext, instr: &I) -> u64 {
        let width = self.slots.len() as u64;
        let slot = ctx.next_put % self.slots.len();
        let v = instr
            .apply(1, || Some(self.slots[slot].increment() * width))
            .expect("increments always apply");
        ctx.next_put = slot.wrapping_add(1);
        v
    }

    pub fn decrement(&self, ctx: &mut RobinContext) -> u64 {
        self.decrement_with(ctx, &Untracked)
    }

    pub fn decrement_with<I: CounterInstrument>(&self, ctx: &mut RobinContext, instr: &I) -> u64 {
        let width = self.slots.len() as u64;
        let n = self.slots.len();
        let start = ctx.next_get % n;
        for off in 0..n {
            let i = (start + off) % n;
            loop {
                let mut raced = false;
                let observed = instr.apply(-1, || match self.slots[i].try_decrement() {
                    Ok(Some(new)) => Some(new * width),
                    Ok(None) => None,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = observed {
                    ctx.next_get = i.wrapping_add(1);
                    return v;
                }
                if !raced {
                    break;
                }
            }
        }
        0
    }

    pub fn exact_total(&self) -> u64 {
        self.slots.iter().map(|s| s.value()).sum()
    }

    pub fn slot_values(&self) -> Vec<u64> {
        self.slots.iter().map(|s| s.value()).collect()
    }
}
