//! Relaxed double-ended queue: `width` doubly linked sub-deques, each
//! governed by one descriptor holding both head pointers, a stability tag
//! and four monotone operation counters, with one decoupled window per
//! operation type.
//!
//! A push on a non-empty sub-deque publishes an unstable descriptor (its
//! linearization) and then stabilizes: the penultimate node's outward link
//! is fixed before a Stable copy is republished. Any thread finding an
//! unstable descriptor helps stabilize first. Pops complete in a single
//! publish and require a stable descriptor.

use std::cell::UnsafeCell;
use std::mem::ManuallyDrop;
use std::ptr;
use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Atomic, Guard, Shared};
use crossbeam_utils::CachePadded;

use crate::config::{ConfigError, StructureConfig};
use crate::oracle::{End, Instrument, Untracked};
use crate::rng::Rng64;
use crate::window::{
    decoupled_select, DecoupledWindow, DescriptorCell, OpKind, Selection, Snap, SlotView,
    ThreadContext,
};

struct Node<T> {
    value: UnsafeCell<ManuallyDrop<T>>,
    left: Atomic<Node<T>>,
    right: Atomic<Node<T>>,
}

impl<T> Node<T> {
    fn alloc(value: T) -> *const Node<T> {
        Box::into_raw(Box::new(Node {
            value: UnsafeCell::new(ManuallyDrop::new(value)),
            left: Atomic::null(),
            right: Atomic::null(),
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Stable,
    RightPush,
    LeftPush,
}

#[derive(Clone, Copy)]
struct DequeDesc<T> {
    right: *const Node<T>,
    left: *const Node<T>,
    status: Status,
    put_right: u64,
    get_right: u64,
    put_left: u64,
    get_left: u64,
}

/// The four operation types, doubling as direction-state indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DequeOp {
    PutRight = 0,
    GetRight = 1,
    PutLeft = 2,
    GetLeft = 3,
}

/// Decoupled-window relaxed deque. Every pop returns an item within
/// `k = 8 * depth * (width - 1)` of the respective end of the ideal
/// sequential deque.
pub struct DecoupledDeque<T> {
    cfg: StructureConfig,
    windows: [DecoupledWindow; 4],
    slots: Box<[CachePadded<DescriptorCell<DequeDesc<T>>>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

unsafe impl<T: Send> Send for DecoupledDeque<T> {}
unsafe impl<T: Send> Sync for DecoupledDeque<T> {}

struct DequeView<'a, T> {
    slots: &'a [CachePadded<DescriptorCell<DequeDesc<T>>>],
    op: DequeOp,
}

impl<'a, T> SlotView for DequeView<'a, T> {
    type Snap<'g>
        = Snap<'g, DequeDesc<T>>
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g> {
        self.slots[index].load(guard)
    }
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64 {
        match self.op {
            DequeOp::PutRight => snap.put_right,
            DequeOp::GetRight => snap.get_right,
            DequeOp::PutLeft => snap.put_left,
            DequeOp::GetLeft => snap.get_left,
        }
    }
    fn absent<'g>(&'g self, snap: &Self::Snap<'g>, _: &'g Guard) -> bool {
        // Both head pointers are null or non-null together.
        snap.right.is_null()
    }
}

impl<T: Send> DecoupledDeque<T> {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(DecoupledDeque {
            slots: (0..cfg.width)
                .map(|_| {
                    CachePadded::new(DescriptorCell::new(DequeDesc {
                        right: ptr::null(),
                        left: ptr::null(),
                        status: Status::Stable,
                        put_right: 0,
                        get_right: 0,
                        put_left: 0,
                        get_left: 0,
                    }))
                })
                .collect(),
            windows: [
                DecoupledWindow::new(&cfg),
                DecoupledWindow::new(&cfg),
                DecoupledWindow::new(&cfg),
                DecoupledWindow::new(&cfg),
            ],
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    /// k for the decoupled deque: `8 * depth * (width - 1)`. An upper
    /// bound, not necessarily tight.
    pub fn k_bound_for(cfg: &StructureConfig) -> u64 {
        8 * cfg.depth * (cfg.width as u64 - 1)
    }

    pub fn k_bound(&self) -> u64 {
        Self::k_bound_for(&self.cfg)
    }

    pub fn config(&self) -> &StructureConfig {
        &self.cfg
    }

    pub fn thread_context(&self) -> ThreadContext {
        let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
        ThreadContext::new(&self.cfg, 4, self.cfg.depth, Rng64::from_seed(self.seed, id))
    }

    fn view(&self, op: DequeOp) -> DequeView<'_, T> {
        DequeView {
            slots: &self.slots,
            op,
        }
    }

    /// Completes the pending neighbor-link fix recorded in `des` and
    /// republishes a Stable copy. Idempotent under races: every CAS failure
    /// means another thread already performed that step.
    fn stabilize(&self, index: usize, des: Snap<'_, DequeDesc<T>>, guard: &Guard) {
        match des.status {
            Status::Stable => {}
            Status::RightPush => self.stabilize_right(index, des, guard),
            Status::LeftPush => self.stabilize_left(index, des, guard),
        }
    }

    fn stabilize_right(&self, index: usize, des: Snap<'_, DequeDesc<T>>, guard: &Guard) {
        let node = des.right;
        debug_assert!(!node.is_null());
        let prev = unsafe { (*node).left.load(Ordering::Acquire, guard) };
        debug_assert!(!prev.is_null(), "a RightPush descriptor covers >= 2 nodes");
        let prev_next = unsafe { (*prev.as_raw()).right.load(Ordering::Acquire, guard) };
        if prev_next.as_raw() != node {
            if !self.slots[index].load(guard).same(&des) {
                return;
            }
            let fixed = unsafe {
                (*prev.as_raw())
                    .right
                    .compare_exchange(
                        prev_next,
                        Shared::from(node),
                        Ordering::AcqRel,
                        Ordering::Acquire,
                        guard,
                    )
                    .is_ok()
            };
            if !fixed {
                return;
            }
        }
        let stable = DequeDesc {
            status: Status::Stable,
            ..*des
        };
        let _ = self.slots[index].publish(des, stable, guard);
    }

    fn stabilize_left(&self, index: usize, des: Snap<'_, DequeDesc<T>>, guard: &Guard) {
        let node = des.left;
        debug_assert!(!node.is_null());
        let prev = unsafe { (*node).right.load(Ordering::Acquire, guard) };
        debug_assert!(!prev.is_null(), "a LeftPush descriptor covers >= 2 nodes");
        let prev_left = unsafe { (*prev.as_raw()).left.load(Ordering::Acquire, guard) };
        if prev_left.as_raw() != node {
            if !self.slots[index].load(guard).same(&des) {
                return;
            }
            let fixed = unsafe {
                (*prev.as_raw())
                    .left
                    .compare_exchange(
                        prev_left,
                        Shared::from(node),
                        Ordering::AcqRel,
                        Ordering::Acquire,
                        guard,
                    )
                    .is_ok()
            };
            if !fixed {
                return;
            }
        }
        let stable = DequeDesc {
            status: Status::Stable,
            ..*des
        };
        let _ = self.slots[index].publish(des, stable, guard);
    }

    pub fn push_right(&self, ctx: &mut ThreadContext, value: T) {
        self.push_with(ctx, value, DequeOp::PutRight, &Untracked)
    }

    pub fn push_left(&self, ctx: &mut ThreadContext, value: T) {
        self.push_with(ctx, value, DequeOp::PutLeft, &Untracked)
    }

    pub fn push_right_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, value: T, instr: &I) {
        self.push_with(ctx, value, DequeOp::PutRight, instr)
    }

    pub fn push_left_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, value: T, instr: &I) {
        self.push_with(ctx, value, DequeOp::PutLeft, instr)
    }

    fn push_with<I: Instrument<T>>(
        &self,
        ctx: &mut ThreadContext,
        value: T,
        op: DequeOp,
        instr: &I,
    ) {
        let guard = &epoch::pin();
        let node = Node::alloc(value);
        let label = unsafe { (*node).value.get() as *const T };
        let view = self.view(op);
        let dir = op as usize;
        let end = match op {
            DequeOp::PutRight => End::Back,
            DequeOp::PutLeft => End::Front,
            _ => unreachable!(),
        };
        loop {
            match decoupled_select(
                OpKind::Put,
                &view,
                &self.windows[dir],
                &self.cfg,
                ctx,
                dir,
                guard,
            ) {
                Selection::Slot { index, snap } => {
                    if snap.right.is_null() {
                        // Empty sub-deque: the node becomes both heads in
                        // one Stable publish.
                        debug_assert_eq!(snap.status, Status::Stable);
                        unsafe {
                            (*node).left.store(Shared::null(), Ordering::Relaxed);
                            (*node).right.store(Shared::null(), Ordering::Relaxed);
                        }
                        let mut new = DequeDesc {
                            right: node,
                            left: node,
                            ..*snap
                        };
                        Self::bump_put(&mut new, op);
                        let ok = instr.insert(label, end, || {
                            self.slots[index].publish(snap, new, guard).is_some()
                        });
                        if ok {
                            ctx.record_success(index);
                            return;
                        }
                        ctx.record_contention();
                    } else if snap.status == Status::Stable {
                        // Link inward, publish unstable (the linearization),
                        // then fix the outward link.
                        let mut new = DequeDesc { ..*snap };
                        match op {
                            DequeOp::PutRight => {
                                unsafe {
                                    (*node).left.store(Shared::from(snap.right), Ordering::Relaxed)
                                };
                                new.right = node;
                                new.status = Status::RightPush;
                            }
                            DequeOp::PutLeft => {
                                unsafe {
                                    (*node).right.store(Shared::from(snap.left), Ordering::Relaxed)
                                };
                                new.left = node;
                                new.status = Status::LeftPush;
                            }
                            _ => unreachable!(),
                        }
                        Self::bump_put(&mut new, op);
                        let mut published = None;
                        let ok = instr.insert(label, end, || {
                            match self.slots[index].publish(snap, new, guard) {
                                Some(fresh) => {
                                    published = Some(fresh);
                                    true
                                }
                                None => false,
                            }
                        });
                        if ok {
                            self.stabilize(index, published.expect("published"), guard);
                            ctx.record_success(index);
                            return;
                        }
                        ctx.record_contention();
                    } else {
                        // Unstable: help, then retry the whole attempt.
                        self.stabilize(index, snap, guard);
                    }
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    fn bump_put(desc: &mut DequeDesc<T>, op: DequeOp) {
        match op {
            DequeOp::PutRight => desc.put_right += 1,
            DequeOp::PutLeft => desc.put_left += 1,
            _ => unreachable!(),
        }
    }

    pub fn pop_right(&self, ctx: &mut ThreadContext) -> Option<T> {
        self.pop_with(ctx, DequeOp::GetRight, &Untracked)
    }

    pub fn pop_left(&self, ctx: &mut ThreadContext) -> Option<T> {
        self.pop_with(ctx, DequeOp::GetLeft, &Untracked)
    }

    pub fn pop_right_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<T> {
        self.pop_with(ctx, DequeOp::GetRight, instr)
    }

    pub fn pop_left_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<T> {
        self.pop_with(ctx, DequeOp::GetLeft, instr)
    }

    fn pop_with<I: Instrument<T>>(
        &self,
        ctx: &mut ThreadContext,
        op: DequeOp,
        instr: &I,
    ) -> Option<T> {
        let guard = &epoch::pin();
        let view = self.view(op);
        let dir = op as usize;
        let end = match op {
            DequeOp::GetRight => End::Back,
            DequeOp::GetLeft => End::Front,
            _ => unreachable!(),
        };
        loop {
            match decoupled_select(
                OpKind::Get,
                &view,
                &self.windows[dir],
                &self.cfg,
                ctx,
                dir,
                guard,
            ) {
                Selection::Slot { index, snap } => {
                    debug_assert!(!snap.right.is_null());
                    if snap.right == snap.left {
                        // Single item: clear both heads. A single-item
                        // descriptor is always stable (pushes that leave two
                        // or more nodes are the only unstable publishers).
                        let node = snap.right;
                        let mut new = DequeDesc {
                            right: ptr::null(),
                            left: ptr::null(),
                            ..*snap
                        };
                        Self::bump_get(&mut new, op);
                        if let Some(value) = self.try_unlink(index, snap, new, node, end, instr, guard)
                        {
                            ctx.record_success(index);
                            return Some(value);
                        }
                        ctx.record_contention();
                    } else if snap.status == Status::Stable {
                        let (node, prev) = match op {
                            DequeOp::GetRight => {
                                let node = snap.right;
                                let prev = unsafe { (*node).left.load(Ordering::Acquire, guard) };
                                (node, prev)
                            }
                            DequeOp::GetLeft => {
                                let node = snap.left;
                                let prev = unsafe { (*node).right.load(Ordering::Acquire, guard) };
                                (node, prev)
                            }
                            _ => unreachable!(),
                        };
                        debug_assert!(!prev.is_null(), "stable multi-item heads link inward");
                        let mut new = DequeDesc { ..*snap };
                        match op {
                            DequeOp::GetRight => new.right = prev.as_raw(),
                            DequeOp::GetLeft => new.left = prev.as_raw(),
                            _ => unreachable!(),
                        }
                        Self::bump_get(&mut new, op);
                        if let Some(value) = self.try_unlink(index, snap, new, node, end, instr, guard)
                        {
                            ctx.record_success(index);
                            return Some(value);
                        }
                        ctx.record_contention();
                    } else {
                        // Pops need a stable descriptor: help, flag
                        // contention, retry.
                        self.stabilize(index, snap, guard);
                        ctx.record_contention();
                    }
                }
                Selection::Empty => {
                    ctx.stats.ops += 1;
                    return None;
                }
            }
        }
    }

    fn bump_get(desc: &mut DequeDesc<T>, op: DequeOp) {
        match op {
            DequeOp::GetRight => desc.get_right += 1,
            DequeOp::GetLeft => desc.get_left += 1,
            _ => unreachable!(),
        }
    }

    /// One pop publish attempt; on success takes the node's payload and
    /// retires the node.
    #[allow(clippy::too_many_arguments)]
    fn try_unlink<I: Instrument<T>>(
        &self,
        index: usize,
        expected: Snap<'_, DequeDesc<T>>,
        new: DequeDesc<T>,
        node: *const Node<T>,
        end: End,
        instr: &I,
        guard: &Guard,
    ) -> Option<T> {
        instr.remove(end, || {
            if self.slots[index].publish(expected, new, guard).is_some() {
                let value = unsafe { ManuallyDrop::take(&mut *(*node).value.get()) };
                unsafe { guard.defer_destroy(Shared::from(node)) };
                Some(value)
            } else {
                None
            }
        })
    }

    /// Per-slot (right id, left id, status, four counters) snapshot for
    /// state audits.
    #[allow(clippy::type_complexity)]
    pub fn slot_states(&self) -> Vec<(usize, usize, Status, [u64; 4])> {
        let guard = &epoch::pin();
        self.slots
            .iter()
            .map(|cell| {
                let d = cell.load(guard);
                (
                    d.right as usize,
                    d.left as usize,
                    d.status,
                    [d.put_right, d.get_right, d.put_left, d.get_left],
                )
            })
            .collect()
    }

    /// Window maxes in order (put-right, get-right, put-left, get-left).
    pub fn window_maxes(&self) -> [u64; 4] {
        [
            self.windows[0].max(),
            self.windows[1].max(),
            self.windows[2].max(),
            self.windows[3].max(),
        ]
    }

    /// One sub-deque's items left-to-right; only meaningful at quiescence
    /// with a stable descriptor.
    #[doc(hidden)]
    pub fn items_left_to_right(&self, index: usize) -> Vec<T>
    where
        T: Clone,
    {
        let guard = &epoch::pin();
        let d = self.slots[index].load(guard);
        assert_eq!(d.status, Status::Stable, "walk requires a stable slot");
        let mut out = Vec::new();
        let mut cur = d.left;
        while !cur.is_null() {
            unsafe { out.push((**(*cur).value.get()).clone()) };
            if cur == d.right {
                break;
            }
            cur = unsafe { (*cur).right.load(Ordering::Acquire, guard).as_raw() };
        }
        out
    }

    /// One sub-deque's items right-to-left; only meaningful at quiescence
    /// with a stable descriptor.
    #[doc(hidden)]
    pub fn items_right_to_left(&self, index: usize) -> Vec<T>
    where
        T: Clone,
    {
        let guard = &epoch::pin();
        let d = self.slots[index].load(guard);
        assert_eq!(d.status, Status::Stable, "walk requires a stable slot");
        let mut out = Vec::new();
        let mut cur = d.right;
        while !cur.is_null() {
            unsafe { out.push((**(*cur).value.get()).clone()) };
            if cur == d.left {
                break;
            }
            cur = unsafe { (*cur).left.load(Ordering::Acquire, guard).as_raw() };
        }
        out
    }
}

impl<T> Drop for DecoupledDeque<T> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        for cell in self.slots.iter() {
            let d = cell.load(guard);
            // Exclusive access: complete any neighbor-link fix a panicked
            // operation left pending, so the walk below stays on live nodes.
            unsafe {
                match d.status {
                    Status::Stable => {}
                    Status::RightPush => {
                        let prev = (*d.right).left.load(Ordering::Relaxed, guard);
                        (*prev.as_raw())
                            .right
                            .store(Shared::from(d.right), Ordering::Relaxed);
                    }
                    Status::LeftPush => {
                        let prev = (*d.left).right.load(Ordering::Relaxed, guard);
                        (*prev.as_raw())
                            .left
                            .store(Shared::from(d.left), Ordering::Relaxed);
                    }
                }
            }
            let mut cur = d.left;
            while !cur.is_null() {
                let last = cur == d.right;
                unsafe {
                    let mut boxed = Box::from_raw(cur as *mut Node<T>);
                    ManuallyDrop::drop(boxed.value.get_mut());
                    cur = boxed.right.load(Ordering::Relaxed, guard).as_raw();
                }
                if last {
                    break;
                }
            }
        }
    }
}
