//! Exact single-instance structures: Treiber stack, Michael-Scott queue
//! and a fetch-and-add counter. They serve as width-1 building blocks for
//! the multi-instance baselines and as throughput references.
//!
//! Nodes carry an optional immutable tag (`H`), used by the timestamped
//! comparison baselines; the tag is readable while the node is shared,
//! unlike the payload.

use std::cell::UnsafeCell;
use std::mem::{ManuallyDrop, MaybeUninit};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Atomic, Guard, Shared};

use crate::oracle::{End, Instrument, Untracked};

/// Race-loss marker for single-attempt operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Raced;

pub(crate) struct StackNode<T, H> {
    tag: H,
    value: UnsafeCell<ManuallyDrop<T>>,
    next: *const StackNode<T, H>,
}

/// Treiber stack with tagged nodes.
pub struct TreiberStack<T, H: Copy = ()> {
    head: Atomic<StackNode<T, H>>,
}

unsafe impl<T: Send, H: Copy + Send> Send for TreiberStack<T, H> {}
unsafe impl<T: Send, H: Copy + Send> Sync for TreiberStack<T, H> {}

impl<T: Send, H: Copy> TreiberStack<T, H> {
    pub fn new() -> Self {
        TreiberStack {
            head: Atomic::null(),
        }
    }

    pub(crate) fn prepare(tag: H, value: T) -> *const StackNode<T, H> {
        Box::into_raw(Box::new(StackNode {
            tag,
            value: UnsafeCell::new(ManuallyDrop::new(value)),
            next: std::ptr::null(),
        }))
    }

    /// Address of the payload inside a prepared node, for measurement
    /// labels.
    pub(crate) fn payload_ptr(node: *const StackNode<T, H>) -> *const T {
        unsafe { (*node).value.get() as *const T }
    }

    /// One push CAS attempt with an already prepared node.
    pub(crate) fn try_push_node(&self, node: *const StackNode<T, H>, guard: &Guard) -> bool {
        let head = self.head.load(Ordering::Acquire, guard);
        unsafe { (*(node as *mut StackNode<T, H>)).next = head.as_raw() };
        self.head
            .compare_exchange(
                head,
                Shared::from(node),
                Ordering::AcqRel,
                Ordering::Acquire,
                guard,
            )
            .is_ok()
    }

    /// One pop CAS attempt: `Ok(None)` when the stack was observed empty,
    /// `Err(Raced)` on a lost race.
    pub(crate) fn try_pop(&self, guard: &Guard) -> Result<Option<T>, Raced> {
        let head = self.head.load(Ordering::Acquire, guard);
        if head.is_null() {
            return Ok(None);
        }
        let next = unsafe { (*head.as_raw()).next };
        match self.head.compare_exchange(
            head,
            Shared::from(next),
            Ordering::AcqRel,
            Ordering::Acquire,
            guard,
        ) {
            Ok(_) => {
                let value = unsafe { ManuallyDrop::take(&mut *(*head.as_raw()).value.get()) };
                unsafe { guard.defer_destroy(head) };
                Ok(Some(value))
            }
            Err(_) => Err(Raced),
        }
    }

    pub fn push_tagged(&self, tag: H, value: T) {
        self.push_tagged_with(tag, value, &Untracked)
    }

    pub fn push_tagged_with<I: Instrument<T>>(&self, tag: H, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = Self::prepare(tag, value);
        let label = Self::payload_ptr(node);
        while !instr.insert(label, End::Front, || self.try_push_node(node, guard)) {}
    }

    pub fn pop(&self) -> Option<T> {
        self.pop_with(&Untracked)
    }

    pub fn pop_with<I: Instrument<T>>(&self, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        loop {
            let mut raced = false;
            let taken = instr.remove(End::Front, || match self.try_pop(guard) {
                Ok(v) => v,
                Err(Raced) => {
                    raced = true;
                    None
                }
            });
            if taken.is_some() || !raced {
                return taken;
            }
        }
    }

    /// Tag of the current top item.
    pub fn peek_tag(&self, guard: &Guard) -> Option<H> {
        let head = self.head.load(Ordering::Acquire, guard);
        if head.is_null() {
            None
        } else {
            Some(unsafe { (*head.as_raw()).tag })
        }
    }

    pub fn is_empty(&self, guard: &Guard) -> bool {
        self.head.load(Ordering::Acquire, guard).is_null()
    }
}

impl<T: Send> TreiberStack<T, ()> {
    pub fn push(&self, value: T) {
        self.push_tagged((), value);
    }

    pub fn push_with<I: Instrument<T>>(&self, value: T, instr: &I) {
        self.push_tagged_with((), value, instr);
    }
}

impl<T: Send, H: Copy> Default for TreiberStack<T, H> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T, H: Copy> Drop for TreiberStack<T, H> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        let mut cur = self.head.load(Ordering::Relaxed, guard).as_raw();
        while !cur.is_null() {
            unsafe {
                let mut boxed = Box::from_raw(cur as *mut StackNode<T, H>);
                ManuallyDrop::drop(boxed.value.get_mut());
                cur = boxed.next;
            }
        }
    }
}

pub(crate) struct QueueNode<T, H> {
    tag: H,
    value: UnsafeCell<MaybeUninit<T>>,
    next: Atomic<QueueNode<T, H>>,
}

/// Michael-Scott queue with tagged nodes and a permanent sentinel.
pub struct MsQueue<T, H: Copy = ()> {
    head: Atomic<QueueNode<T, H>>,
    tail: Atomic<QueueNode<T, H>>,
}

unsafe impl<T: Send, H: Copy + Send> Send for MsQueue<T, H> {}
unsafe impl<T: Send, H: Copy + Send> Sync for MsQueue<T, H> {}

impl<T: Send, H: Copy + Default> MsQueue<T, H> {
    pub fn new() -> Self {
        let sentinel = Box::into_raw(Box::new(QueueNode {
            tag: H::default(),
            value: UnsafeCell::new(MaybeUninit::uninit()),
            next: Atomic::null(),
        }));
        MsQueue {
            head: Atomic::from(sentinel as *const QueueNode<T, H>),
            tail: Atomic::from(sentinel as *const QueueNode<T, H>),
        }
    }
}

impl<T: Send, H: Copy> MsQueue<T, H> {
    pub(crate) fn prepare(tag: H, value: T) -> *const QueueNode<T, H> {
        Box::into_raw(Box::new(QueueNode {
            tag,
            value: UnsafeCell::new(MaybeUninit::new(value)),
            next: Atomic::null(),
        }))
    }

    pub(crate) fn payload_ptr(node: *const QueueNode<T, H>) -> *const T {
        unsafe { (*node).value.get() as *const T }
    }

    /// One enqueue pass: links the prepared node or helps a lagging tail.
    /// `false` means retry (the node was not linked).
    pub(crate) fn try_enqueue_node(&self, node: *const QueueNode<T, H>, guard: &Guard) -> bool {
        let tail = self.tail.load(Ordering::Acquire, guard);
        let next = unsafe { (*tail.as_raw()).next.load(Ordering::Acquire, guard) };
        if next.is_null() {
            let linked = unsafe {
                (*tail.as_raw())
                    .next
                    .compare_exchange(
                        Shared::null(),
                        Shared::from(node),
                        Ordering::AcqRel,
                        Ordering::Acquire,
                        guard,
                    )
                    .is_ok()
            };
            if linked {
                let _ = self.tail.compare_exchange(
                    tail,
                    Shared::from(node),
                    Ordering::AcqRel,
                    Ordering::Acquire,
                    guard,
                );
                return true;
            }
            false
        } else {
            // Help swing the lagging tail.
            let _ =
                self.tail
                    .compare_exchange(tail, next, Ordering::AcqRel, Ordering::Acquire, guard);
            false
        }
    }

    /// One dequeue attempt: `Ok(None)` when observed empty, `Err(Raced)` on
    /// a lost race or a tail that needed helping.
    pub(crate) fn try_dequeue(&self, guard: &Guard) -> Result<Option<T>, Raced> {
        let head = self.head.load(Ordering::Acquire, guard);
        let tail = self.tail.load(Ordering::Acquire, guard);
        let next = unsafe { (*head.as_raw()).next.load(Ordering::Acquire, guard) };
        if head == tail {
            if next.is_null() {
                return Ok(None);
            }
            // Pending enqueue: help, then report a retry.
            let _ =
                self.tail
                    .compare_exchange(tail, next, Ordering::AcqRel, Ordering::Acquire, guard);
            return Err(Raced);
        }
        debug_assert!(!next.is_null());
        match self
            .head
            .compare_exchange(head, next, Ordering::AcqRel, Ordering::Acquire, guard)
        {
            Ok(_) => {
                let value = unsafe { (*(*next.as_raw()).value.get()).assume_init_read() };
                unsafe { guard.defer_destroy(head) };
                Ok(Some(value))
            }
            Err(_) => Err(Raced),
        }
    }

    pub fn enqueue_tagged(&self, tag: H, value: T) {
        self.enqueue_tagged_with(tag, value, &Untracked)
    }

    pub fn enqueue_tagged_with<I: Instrument<T>>(&self, tag: H, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = Self::prepare(tag, value);
        let label = Self::payload_ptr(node);
        while !instr.insert(label, End::Back, || self.try_enqueue_node(node, guard)) {}
    }

    pub fn dequeue(&self) -> Option<T> {
        self.dequeue_with(&Untracked)
    }

    pub fn dequeue_with<I: Instrument<T>>(&self, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        loop {
            let mut raced = false;
            let taken = instr.remove(End::Front, || match self.try_dequeue(guard) {
                Ok(v) => v,
                Err(Raced) => {
                    raced = true;
                    None
                }
            });
            if taken.is_some() || !raced {
                return taken;
            }
        }
    }

    /// Tag of the current head item (the sentinel's successor).
    pub fn peek_tag(&self, guard: &Guard) -> Option<H> {
        let head = self.head.load(Ordering::Acquire, guard);
        let next = unsafe { (*head.as_raw()).next.load(Ordering::Acquire, guard) };
        if next.is_null() {
            None
        } else {
            Some(unsafe { (*next.as_raw()).tag })
        }
    }

    pub fn is_empty(&self, guard: &Guard) -> bool {
        let head = self.head.load(Ordering::Acquire, guard);
        unsafe { (*head.as_raw()).next.load(Ordering::Acquire, guard).is_null() }
    }
}

impl<T: Send> MsQueue<T, ()> {
    pub fn enqueue(&self, value: T) {
        self.enqueue_tagged((), value);
    }

    pub fn enqueue_with<I: Instrument<T>>(&self, value: T, instr: &I) {
        self.enqueue_tagged_with((), value, instr);
    }
}

impl<T: Send, H: Copy + Default> Default for MsQueue<T, H> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T, H: Copy> Drop for MsQueue<T, H> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        let head = self.head.load(Ordering::Relaxed, guard).as_raw();
        unsafe {
            let mut cur = (*head).next.load(Ordering::Relaxed, guard).as_raw();
            drop(Box::from_raw(head as *mut QueueNode<T, H>));
            while !cur.is_null() {
                let mut boxed = Box::from_raw(cur as *mut QueueNode<T, H>);
                boxed.value.get_mut().assume_init_drop();
                cur = boxed.next.load(Ordering::Relaxed, guard).as_raw();
            }
        }
    }
}

/// Single fetch-and-add counter, the exact baseline.
#[derive(Default)]
pub struct FaaCounter {
    value: AtomicI64,
}

impl FaaCounter {
    pub fn new() -> Self {
        FaaCounter {
            value: AtomicI64::new(0),
        }
    }

    pub fn add(&self, delta: i64) -> i64 {
        self.value.fetch_add(delta, Ordering::AcqRel) + delta
    }

    /// Decrement that refuses to cross zero, mirroring the relaxed
    /// counters' empty rule; `None` when the counter was observed at 0.
    pub fn decrement_nonneg(&self) -> Option<i64> {
        let mut cur = self.value.load(Ordering::Acquire);
        loop {
            if cur <= 0 {
                return None;
            }
            match self.value.compare_exchange(
                cur,
                cur - 1,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return Some(cur - 1),
                Err(seen) => cur = seen,
            }
        }
    }

    pub fn value(&self) -> i64 {
        self.value.load(Ordering::Acquire)
    }
}

/// Non-negative sub-counter for the multi-instance counter baselines.
#[derive(Default)]
pub struct SubCounter {
    value: AtomicU64,
}

impl SubCounter {
    pub fn new() -> Self {
        SubCounter {
            value: AtomicU64::new(0),
        }
    }

    pub fn increment(&self) -> u64 {
        self.value.fetch_add(1, Ordering::AcqRel) + 1
    }

    /// One decrement attempt; `Ok(None)` when the slot was observed zero.
    pub fn try_decrement(&self) -> Result<Option<u64>, Raced> {
        let cur = self.value.load(Ordering::Acquire);
        if cur == 0 {
            return Ok(None);
        }
        match self.value.compare_exchange(
            cur,
            cur - 1,
            Ordering::AcqRel,
            Ordering::Acquire,
        ) {
            Ok(_) => Ok(Some(cur - 1)),
            Err(_) => Err(Raced),
        }
    }

    pub fn value(&self) -> u64 {
        self.value.load(Ordering::Acquire)
    }
}
