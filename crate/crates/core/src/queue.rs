//! Relaxed FIFO queue: `width` Michael-Scott-style sub-queues with
//! decoupled enqueue/dequeue windows. Each sub-queue keeps a permanent
//! sentinel so head and tail handles are never absent; an enqueue
//! linearizes at the next-link CAS and the tail descriptor is advanced in
//! a second, helpable step.

use std::cell::UnsafeCell;
use std::mem::MaybeUninit;
use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Atomic, Guard, Shared};
use crossbeam_utils::CachePadded;

use crate::config::{ConfigError, StructureConfig};
use crate::oracle::{End, Instrument, Untracked};
use crate::rng::Rng64;
use crate::window::{
    decoupled_select, DecoupledWindow, DescriptorCell, OpKind, Selection, SlotView, ThreadContext,
};

struct Node<T> {
    value: UnsafeCell<MaybeUninit<T>>,
    next: Atomic<Node<T>>,
}

impl<T> Node<T> {
    fn sentinel() -> *const Node<T> {
        Box::into_raw(Box::new(Node {
            value: UnsafeCell::new(MaybeUninit::uninit()),
            next: Atomic::null(),
        }))
    }

    fn alloc(value: T) -> *const Node<T> {
        Box::into_raw(Box::new(Node {
            value: UnsafeCell::new(MaybeUninit::new(value)),
            next: Atomic::null(),
        }))
    }
}

/// Tail descriptor: tail handle plus monotone enqueue count.
#[derive(Clone, Copy)]
struct PutDesc<T> {
    tail: *const Node<T>,
    puts: u64,
}

/// Head descriptor: head (sentinel) handle plus monotone dequeue count.
#[derive(Clone, Copy)]
struct GetDesc<T> {
    head: *const Node<T>,
    gets: u64,
}

/// Decoupled-window relaxed FIFO queue. Every dequeue returns one of the
/// `k_bound() + 1` oldest items of the ideal sequential queue, with
/// `k = depth * (width - 1)`.
pub struct DecoupledQueue<T> {
    cfg: StructureConfig,
    put_window: DecoupledWindow,
    get_window: DecoupledWindow,
    puts: Box<[CachePadded<DescriptorCell<PutDesc<T>>>]>,
    gets: Box<[CachePadded<DescriptorCell<GetDesc<T>>>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

unsafe impl<T: Send> Send for DecoupledQueue<T> {}
unsafe impl<T: Send> Sync for DecoupledQueue<T> {}

struct PutView<'a, T> {
    cells: &'a [CachePadded<DescriptorCell<PutDesc<T>>>],
}

impl<'a, T> SlotView for PutView<'a, T> {
    type Snap<'g>
        = crate::window::Snap<'g, PutDesc<T>>
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g> {
        self.cells[index].load(guard)
    }
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64 {
        snap.puts
    }
    fn absent<'g>(&'g self, _: &Self::Snap<'g>, _: &'g Guard) -> bool {
        // Enqueues never test emptiness.
        false
    }
}

struct GetView<'a, T> {
    cells: &'a [CachePadded<DescriptorCell<GetDesc<T>>>],
}

impl<'a, T> SlotView for GetView<'a, T> {
    type Snap<'g>
        = crate::window::Snap<'g, GetDesc<T>>
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g> {
        self.cells[index].load(guard)
    }
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64 {
        snap.gets
    }
    fn absent<'g>(&'g self, snap: &Self::Snap<'g>, guard: &'g Guard) -> bool {
        // Empty sub-queue: the sentinel has no successor. The head pointer
        // itself is never null.
        unsafe { (*snap.head).next.load(Ordering::Acquire, guard).is_null() }
    }
}

impl<T: Send> DecoupledQueue<T> {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut puts = Vec::with_capacity(cfg.width);
        let mut gets = Vec::with_capacity(cfg.width);
        for _ in 0..cfg.width {
            let sentinel = Node::sentinel();
            puts.push(CachePadded::new(DescriptorCell::new(PutDesc {
                tail: sentinel,
                puts: 0,
            })));
            gets.push(CachePadded::new(DescriptorCell::new(GetDesc {
                head: sentinel,
                gets: 0,
            })));
        }
        Ok(DecoupledQueue {
            puts: puts.into_boxed_slice(),
            gets: gets.into_boxed_slice(),
            put_window: DecoupledWindow::new(&cfg),
            get_window: DecoupledWindow::new(&cfg),
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    /// k for the decoupled queue: `depth * (width - 1)`.
    pub fn k_bound_for(cfg: &StructureConfig) -> u64 {
        cfg.depth * (cfg.width as u64 - 1)
    }

    pub fn k_bound(&self) -> u64 {
        Self::k_bound_for(&self.cfg)
    }

    pub fn config(&self) -> &StructureConfig {
        &self.cfg
    }

    pub fn thread_context(&self) -> ThreadContext {
        let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
        ThreadContext::new(&self.cfg, 2, self.cfg.depth, Rng64::from_seed(self.seed, id))
    }

    pub fn enqueue(&self, ctx: &mut ThreadContext, value: T) {
        self.enqueue_with(ctx, value, &Untracked)
    }

    /// Appends `value` to a valid sub-queue. Linearizes at the successful
    /// next-link CAS; the tail descriptor advance afterwards is best-effort
    /// (a helper may have done it already) and its failure only sets the
    /// contention hint.
    pub fn enqueue_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = Node::alloc(value);
        let label = unsafe { (*node).value.get() as *const T };
        let view = PutView { cells: &self.puts };
        loop {
            match decoupled_select(
                OpKind::Put,
                &view,
                &self.put_window,
                &self.cfg,
                ctx,
                0,
                guard,
            ) {
                Selection::Slot { index, snap } => {
                    let tail = snap.tail;
                    let next = unsafe { (*tail).next.load(Ordering::Acquire, guard) };
                    if next.is_null() {
                        let linked = instr.insert(label, End::Back, || unsafe {
                            (*tail)
                                .next
                                .compare_exchange(
                                    Shared::null(),
                                    Shared::from(node),
                                    Ordering::AcqRel,
                                    Ordering::Acquire,
                                    guard,
                                )
                                .is_ok()
                        });
                        if linked {
                            let new = PutDesc {
                                tail: node,
                                puts: snap.puts + 1,
                            };
                            if self.puts[index].publish(snap, new, guard).is_none() {
                                ctx.record_contention();
                            }
                            ctx.record_success(index);
                            return;
                        }
                        ctx.record_contention();
                    } else {
                        // Lagging tail: help advance the descriptor past the
                        // pending link, then retry the search.
                        let new = PutDesc {
                            tail: next.as_raw(),
                            puts: snap.puts + 1,
                        };
                        if self.puts[index].publish(snap, new, guard).is_none() {
                            ctx.record_contention();
                        }
                    }
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    pub fn dequeue(&self, ctx: &mut ThreadContext) -> Option<T> {
        self.dequeue_with(ctx, &Untracked)
    }

    /// Removes the head item of a valid sub-queue; helps complete a pending
    /// enqueue when head meets a lagging tail. `None` only under the
    /// full-scan emptiness rule.
    pub fn dequeue_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let view = GetView { cells: &self.gets };
        loop {
            match decoupled_select(
                OpKind::Get,
                &view,
                &self.get_window,
                &self.cfg,
                ctx,
                1,
                guard,
            ) {
                Selection::Slot { index, snap } => {
                    let head = snap.head;
                    let pdes = self.puts[index].load(guard);
                    let tail = pdes.tail;
                    if head == tail {
                        let next = unsafe { (*head).next.load(Ordering::Acquire, guard) };
                        if next.is_null() {
                            // Drained since selection: rescan from a random
                            // index.
                            ctx.record_contention();
                        } else {
                            // Pending enqueue: complete it before retrying.
                            let new = PutDesc {
                                tail: next.as_raw(),
                                puts: pdes.puts + 1,
                            };
                            let _ = self.puts[index].publish(pdes, new, guard);
                        }
                        continue;
                    }
                    let next = unsafe { (*head).next.load(Ordering::Acquire, guard) };
                    debug_assert!(!next.is_null(), "tail descriptor never trails the head");
                    let new = GetDesc {
                        head: next.as_raw(),
                        gets: snap.gets + 1,
                    };
                    let taken = instr.remove(End::Front, || {
                        if self.gets[index].publish(snap, new, guard).is_some() {
                            // The successor becomes the new sentinel; its
                            // value is ours alone now.
                            let value =
                                unsafe { (*(*next.as_raw()).value.get()).assume_init_read() };
                            unsafe { guard.defer_destroy(Shared::from(head)) };
                            Some(value)
                        } else {
                            None
                        }
                    });
                    match taken {
                        Some(value) => {
                            ctx.record_success(index);
                            return Some(value);
                        }
                        None => ctx.record_contention(),
                    }
                }
                Selection::Empty => {
                    ctx.stats.ops += 1;
                    return None;
                }
            }
        }
    }

    /// Per-slot ((tail id, putcount), (head id, getcount)) snapshot for
    /// state audits.
    #[allow(clippy::type_complexity)]
    pub fn slot_states(&self) -> Vec<((usize, u64), (usize, u64))> {
        let guard = &epoch::pin();
        self.puts
            .iter()
            .zip(self.gets.iter())
            .map(|(p, g)| {
                let p = p.load(guard);
                let g = g.load(guard);
                ((p.tail as usize, p.puts), (g.head as usize, g.gets))
            })
            .collect()
    }

    pub fn window_maxes(&self) -> (u64, u64) {
        (self.put_window.max(), self.get_window.max())
    }

    /// Values of one sub-queue in FIFO order; only meaningful at quiescence.
    #[doc(hidden)]
    pub fn chain_values(&self, index: usize) -> Vec<T>
    where
        T: Clone,
    {
        let guard = &epoch::pin();
        let mut out = Vec::new();
        // The sentinel's value slot is logically empty; items start after it.
        let mut cur = unsafe {
            (*self.gets[index].load(guard).head)
                .next
                .load(Ordering::Acquire, guard)
        };
        while !cur.is_null() {
            unsafe {
                out.push((*(*cur.as_raw()).value.get()).assume_init_ref().clone());
                cur = (*cur.as_raw()).next.load(Ordering::Acquire, guard);
            }
        }
        out
    }
}

impl<T> Drop for DecoupledQueue<T> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        for cell in self.gets.iter() {
            let head = cell.load(guard).head;
            // The sentinel's payload is already gone; free it, then drop the
            // rest with their payloads.
            unsafe {
                let mut cur = (*head).next.load(Ordering::Relaxed, guard).as_raw();
                drop(Box::from_raw(head as *mut Node<T>));
                while !cur.is_null() {
                    let mut boxed = Box::from_raw(cur as *mut Node<T>);
                    boxed.value.get_mut().assume_init_drop();
                    cur = boxed.next.load(Ordering::Relaxed, guard).as_raw();
                }
            }
        }
    }
}
