//! Randomized multi-instance baselines. `Random` picks one uniform slot
//! per operation; `Random-C2` additionally timestamps inserted items and
//! lets a Get sample two distinct slots, taking the more correct one for
//! the structure's semantics. Neither provides a deterministic
//! k-out-of-order bound.

use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch as epoch;
use crossbeam_utils::CachePadded;

use crate::baselines::exact::{MsQueue, Raced, SubCounter, TreiberStack};
use crate::oracle::{CounterInstrument, End, Instrument, Untracked};
use crate::rng::Rng64;

/// Thread-private state for the randomized baselines: an RNG plus the
/// per-thread entry-order stamp (sequence number fused with the thread id,
/// compared lexicographically).
pub struct RandomContext {
    rng: Rng64,
    tid: u16,
    seq: u64,
}

impl RandomContext {
    fn new(seed: u64, id: u64) -> Self {
        RandomContext {
            rng: Rng64::from_seed(seed, id),
            tid: id as u16,
            seq: 0,
        }
    }

    /// Stamps strictly increase per producing thread.
    fn next_stamp(&mut self) -> u64 {
        self.seq += 1;
        (self.seq << 16) | self.tid as u64
    }
}

macro_rules! context_plumbing {
    () => {
        pub fn thread_context(&self) -> RandomContext {
            let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
            RandomContext::new(self.seed, id)
        }

        pub fn width(&self) -> usize {
            self.slots.len()
        }
    };
}

/// Uniform-random relaxed stack over `width` Treiber sub-stacks.
pub struct RandomStack<T> {
    slots: Box<[CachePadded<TreiberStack<T, u64>>]>,
    seed: u64,
    next_ctx: AtomicU64,
    /// When true, pops compare two sampled tops and take the younger stamp.
    two_choice: bool,
}

impl<T: Send> RandomStack<T> {
    pub fn new(width: usize, seed: u64) -> Self {
        Self::build(width, seed, false)
    }

    /// The timestamped two-choice variant.
    pub fn new_c2(width: usize, seed: u64) -> Self {
        Self::build(width, seed, true)
    }

    fn build(width: usize, seed: u64, two_choice: bool) -> Self {
        assert!(width >= 1);
        RandomStack {
            slots: (0..width)
                .map(|_| CachePadded::new(TreiberStack::new()))
                .collect(),
            seed,
            next_ctx: AtomicU64::new(0),
            two_choice,
        }
    }

    context_plumbing!();

    pub fn push(&self, ctx: &mut RandomContext, value: T) {
        self.push_with(ctx, value, &Untracked)
    }

    pub fn push_with<I: Instrument<T>>(&self, ctx: &mut RandomContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let stamp = ctx.next_stamp();
        let node = TreiberStack::prepare(stamp, value);
        let label = TreiberStack::payload_ptr(node);
        loop {
            let slot = ctx.rng.below(self.slots.len());
            if instr.insert(label, End::Front, || {
                self.slots[slot].try_push_node(node, guard)
            }) {
                return;
            }
        }
    }

    pub fn pop(&self, ctx: &mut RandomContext) -> Option<T> {
        self.pop_with(ctx, &Untracked)
    }

    pub fn pop_with<I: Instrument<T>>(&self, ctx: &mut RandomContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let width = self.slots.len();
        'restart: loop {
            let slot = if self.two_choice && width > 1 {
                let a = ctx.rng.below(width);
                let mut b = ctx.rng.below(width - 1);
                if b >= a {
                    b += 1;
                }
                // The younger top (larger stamp) is the more correct LIFO
                // answer; an empty sample falls back to the other slot.
                match (
                    self.slots[a].peek_tag(guard),
                    self.slots[b].peek_tag(guard),
                ) {
                    (Some(sa), Some(sb)) => {
                        if sa >= sb {
                            a
                        } else {
                            b
                        }
                    }
                    (Some(_), None) => a,
                    (None, Some(_)) => b,
                    (None, None) => usize::MAX, // trigger the sweep below
                }
            } else {
                ctx.rng.below(width)
            };

            if slot != usize::MAX {
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[slot].try_pop(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    return Some(v);
                }
                if raced {
                    continue 'restart;
                }
            }

            // Random miss: one deterministic full sweep; empty only if every
            // slot comes up empty.
            let start = ctx.rng.below(width);
            for off in 0..width {
                let i = (start + off) % width;
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[i].try_pop(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    return Some(v);
                }
                if raced {
                    continue 'restart;
                }
            }
            return None;
        }
    }

    /// Drains everything; only meaningful at quiescence.
    pub fn drain(&self, ctx: &mut RandomContext) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(v) = self.pop(ctx) {
            out.push(v);
        }
        out
    }
}

/// Uniform-random relaxed FIFO queue over `width` MS sub-queues.
pub struct RandomQueue<T> {
    slots: Box<[CachePadded<MsQueue<T, u64>>]>,
    seed: u64,
    next_ctx: AtomicU64,
    two_choice: bool,
}

impl<T: Send> RandomQueue<T> {
    pub fn new(width: usize, seed: u64) -> Self {
        Self::build(width, seed, false)
    }

    pub fn new_c2(width: usize, seed: u64) -> Self {
        Self::build(width, seed, true)
    }

    fn build(width: usize, seed: u64, two_choice: bool) -> Self {
        assert!(width >= 1);
        RandomQueue {
            slots: (0..width)
                .map(|_| CachePadded::new(MsQueue::new()))
                .collect(),
            seed,
            next_ctx: AtomicU64::new(0),
            two_choice,
        }
    }

    context_plumbing!();

    pub fn enqueue(&self, ctx: &mut RandomContext, value: T) {
        self.enqueue_with(ctx, value, &Untracked)
    }

    pub fn enqueue_with<I: Instrument<T>>(&self, ctx: &mut RandomContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let stamp = ctx.next_stamp();
        let node = MsQueue::prepare(stamp, value);
        let label = MsQueue::payload_ptr(node);
        loop {
            let slot = ctx.rng.below(self.slots.len());
            if instr.insert(label, End::Back, || {
                self.slots[slot].try_enqueue_node(node, guard)
            }) {
                return;
            }
        }
    }

    pub fn dequeue(&self, ctx: &mut RandomContext) -> Option<T> {
        self.dequeue_with(ctx, &Untracked)
    }

    pub fn dequeue_with<I: Instrument<T>>(&self, ctx: &mut RandomContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let width = self.slots.len();
        'restart: loop {
            let slot = if self.two_choice && width > 1 {
                let a = ctx.rng.below(width);
                let mut b = ctx.rng.below(width - 1);
                if b >= a {
                    b += 1;
                }
                // The older head (smaller stamp) is the more correct FIFO
                // answer.
                match (
                    self.slots[a].peek_tag(guard),
                    self.slots[b].peek_tag(guard),
                ) {
                    (Some(sa), Some(sb)) => {
                        if sa <= sb {
                            a
                        } else {
                            b
                        }
                    }
                    (Some(_), None) => a,
                    (None, Some(_)) => b,
                    (None, None) => usize::MAX,
                }
            } else {
                ctx.rng.below(width)
            };

            if slot != usize::MAX {
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[slot].try_dequeue(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    return Some(v);
                }
                if raced {
                    continue 'restart;
                }
            }

            let start = ctx.rng.below(width);
            for off in 0..width {
                let i = (start + off) % width;
                let mut raced = false;
                let taken = instr.remove(End::Front, || match self.slots[i].try_dequeue(guard) {
                    Ok(v) => v,
                    Err(Raced) => {
                        raced = true;
                        None
                    }
                });
                if let Some(v) = taken {
                    return Some(v);
                }
                if raced {
                    continue 'restart;
                }
            }
            return None;
        }
    }

    pub fn drain(&self, ctx: &mut RandomContext) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(v) = self.dequeue(ctx) {
            out.push(v);
        }
        out
    }
}

/// Uniform-random relaxed counter over `width` non-negative sub-counters.
/// Reads scale the operated slot by width, like the windowed counters.
pub struct RandomCounter {
    slots: Box<[CachePadded<SubCounter>]>,
    seed: u64,
    next_ctx: AtomicU64,
    two_choice: bool,
}

impl RandomCounter {
    pub fn new(width: usize, seed: u64) -> Self {
        Self::build(width, seed, false)
    }

    pub fn new_c2(width: usize, seed: u64) -> Self {
        Self::build(width, seed, true)
    }

    fn build(width: usize, seed: u64, two_choice: bool) -> Self {
        assert!(width >= 1);
        RandomCounter {
            slots: (0..width).map(|_| CachePadded::new(SubCounter::new())).collect(),
            seed,
            next_ctx: AtomicU64::new(0),
            two_choice,
        }
    }

    context_plumbing!();

    pub fn increment(&self, ctx: &mut RandomContext) -> u64 {
        self.increment_with(ctx, &Untracked)
    }

    pub fn increment_with<I: CounterInstrument>(
        &self,
        ctx: &mut RandomContext,
        instr: &I,
    ) -> u64 {
        let width = self.slots.len() as u64;
        let slot = ctx.rng.below(self.slots.len());
        instr
            .apply(1, || Some(self.slots[slot].increment() * width))
            .expect("increments always apply")
    }

    pub fn decrement(&self, ctx: &mut RandomContext) -> u64 {
        self.decrement_with(ctx, &Untracked)
    }

    pub fn decrement_with<I: CounterInstrument>(
        &self,
        ctx: &mut RandomContext,
        instr: &I,
    ) -> u64 {
        let width = self.slots.len() as u64;
        let n = self.slots.len();
        'restart: loop {
            // Two-choice decrements prefer the larger sampled slot.
            let slot = if self.two_choice && n > 1 {
                let a = ctx.rng.below(n);
                let mut b = ctx.rng.below(n - 1);
                if b >= a {
                    b += 1;
                }
                if self.slots[a].value() >= self.slots[b].value() {
                    a
                } else {
                    b
                }
            } else {
                ctx.rng.below(n)
            };
            let mut raced = false;
            let observed = instr.apply(-1, || match self.slots[slot].try_decrement() {
                Ok(Some(new)) => Some(new * width),
                Ok(None) => None,
                Err(Raced) => {
                    raced = true;
                    None
                }
            });
            if let Some(v) = observed {
                return v;
            }
            if raced {
                continue 'restart;
            }
            // Observed-zero miss: full sweep; all zero means the counter is
            // empty and 0 is returned.
            let start = ctx.rng.below(n);
            for off in 0..n {
                let i = (start + off) % n;
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
                    return v;
                }
                if raced {
                    continue 'restart;
                }
            }
            return 0;
        }
    }

    /// Sum of the sub-counters; meaningful at quiescence.
    pub fn exact_total(&self) -> u64 {
        self.slots.iter().map(|s| s.value()).sum()
    }

    pub fn slot_values(&self) -> Vec<u64> {
        self.slots.iter().map(|s| s.value()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn width_one_behaves_exactly() {
        let s: RandomStack<u64> = RandomStack::new(1, 7);
        let mut ctx = s.thread_context();
        s.push(&mut ctx, 1);
        s.push(&mut ctx, 2);
        assert_eq!(s.pop(&mut ctx), Some(2));
        assert_eq!(s.pop(&mut ctx), Some(1));
        assert_eq!(s.pop(&mut ctx), None);

        let q: RandomQueue<u64> = RandomQueue::new(1, 7);
        let mut ctx = q.thread_context();
        q.enqueue(&mut ctx, 1);
        q.enqueue(&mut ctx, 2);
        assert_eq!(q.dequeue(&mut ctx), Some(1));
        assert_eq!(q.dequeue(&mut ctx), Some(2));
        assert_eq!(q.dequeue(&mut ctx), None);
    }

    #[test]
    fn drained_structure_reports_empty() {
        let s: RandomStack<u64> = RandomStack::new(4, 3);
        let mut ctx = s.thread_context();
        for x in 0..20 {
            s.push(&mut ctx, x);
        }
        let drained: BTreeSet<u64> = s.drain(&mut ctx).into_iter().collect();
        assert_eq!(drained, (0..20).collect());
        assert_eq!(s.pop(&mut ctx), None);
    }

    #[test]
    fn stamps_increase_per_thread() {
        let s: RandomStack<u64> = RandomStack::new(2, 0);
        let mut ctx = s.thread_context();
        let a = ctx.next_stamp();
        let b = ctx.next_stamp();
        assert!(b > a);
        assert_eq!(a & 0xffff, b & 0xffff, "same thread id");
    }

    #[test]
    fn c2_stack_pops_the_younger_top() {
        // Width 2 makes the two sampled slots deterministic.
        let s: RandomStack<u64> = RandomStack::new_c2(2, 11);
        let guard = &epoch::pin();
        // Stamp 5 on one slot, stamp 9 on the other.
        let n5 = TreiberStack::prepare(5u64, 50u64);
        assert!(s.slots[0].try_push_node(n5, guard));
        let n9 = TreiberStack::prepare(9u64, 90u64);
        assert!(s.slots[1].try_push_node(n9, guard));
        let mut ctx = s.thread_context();
        assert_eq!(s.pop(&mut ctx), Some(90), "stamp 9 is younger");
    }

    #[test]
    fn c2_queue_dequeues_the_older_head() {
        let q: RandomQueue<u64> = RandomQueue::new_c2(2, 11);
        let guard = &epoch::pin();
        let n5 = MsQueue::prepare(5u64, 50u64);
        assert!(q.slots[0].try_enqueue_node(n5, guard));
        let n9 = MsQueue::prepare(9u64, 90u64);
        assert!(q.slots[1].try_enqueue_node(n9, guard));
        let mut ctx = q.thread_context();
        assert_eq!(q.dequeue(&mut ctx), Some(50), "stamp 5 is older");
    }

    #[test]
    fn c2_falls_back_to_the_nonempty_sample() {
        let s: RandomStack<u64> = RandomStack::new_c2(2, 13);
        let mut ctx = s.thread_context();
        s.push(&mut ctx, 42);
        assert_eq!(s.pop(&mut ctx), Some(42));
    }

    #[test]
    fn random_puts_spread_uniformly() {
        // 10^6 increments over 8 slots: each slot within 5 sigma of uniform.
        let c = RandomCounter::new(8, 1234);
        let mut ctx = c.thread_context();
        let n = 1_000_000u64;
        for _ in 0..n {
            c.increment(&mut ctx);
        }
        let expected = n as f64 / 8.0;
        let sigma = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for (i, &v) in c.slot_values().iter().enumerate() {
            let dev = (v as f64 - expected).abs();
            assert!(
                dev <= 5.0 * sigma,
                "slot {i}: {v} deviates {dev:.0} > 5 sigma ({:.0})",
                5.0 * sigma
            );
        }
        assert_eq!(c.exact_total(), n);
    }

    #[test]
    fn counter_decrement_on_empty_is_zero() {
        let c = RandomCounter::new_c2(3, 5);
        let mut ctx = c.thread_context();
        assert_eq!(c.decrement(&mut ctx), 0);
        c.increment(&mut ctx);
        c.decrement(&mut ctx);
        assert_eq!(c.exact_total(), 0);
    }
}
