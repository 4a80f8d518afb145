//! Relaxed LIFO structures: `width` Treiber-style sub-stacks whose heads
//! are descriptors (top pointer + operation counter(s)) replaced in one
//! atomic step, coordinated by a coupled or decoupled window.

use std::cell::UnsafeCell;
use std::mem::ManuallyDrop;
use std::ptr;
use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Guard, Shared};
use crossbeam_utils::CachePadded;

use crate::config::{ConfigError, StructureConfig};
use crate::oracle::{End, Instrument, Untracked};
use crate::rng::Rng64;
use crate::window::{
    coupled_select, decoupled_select, CoupledWindow, DecoupledWindow, DescriptorCell, OpKind,
    Selection, SlotView, ThreadContext,
};

struct Node<T> {
    value: UnsafeCell<ManuallyDrop<T>>,
    next: *const Node<T>,
}

impl<T> Node<T> {
    fn alloc(value: T, next: *const Node<T>) -> *const Node<T> {
        Box::into_raw(Box::new(Node {
            value: UnsafeCell::new(ManuallyDrop::new(value)),
            next,
        }))
    }
}

/// Moves the value out of a node whose pop CAS this thread just won.
///
/// Safety: the winning CAS makes this thread the unique owner of the
/// node's payload; the node memory itself stays valid under `guard`.
unsafe fn take_value<T>(node: *const Node<T>) -> T {
    ManuallyDrop::take(&mut *(*node).value.get())
}

/// Frees every node in a chain, dropping the payloads. Only for exclusive
/// access (structure drop / drain).
unsafe fn free_chain<T>(mut cur: *const Node<T>) {
    while !cur.is_null() {
        let mut boxed = Box::from_raw(cur as *mut Node<T>);
        ManuallyDrop::drop(boxed.value.get_mut());
        cur = boxed.next;
    }
}

#[derive(Clone, Copy)]
struct CoupledDesc<T> {
    top: *const Node<T>,
    count: u32,
    version: u32,
}

#[derive(Clone, Copy)]
struct DecoupledDesc<T> {
    top: *const Node<T>,
    puts: u64,
    gets: u64,
}

/// Coupled-window relaxed stack. One counter per sub-stack counts net
/// pushes minus pops (equal to the sub-stack size); the shared window
/// moves both ways. Every pop returns one of the `k_bound() + 1` topmost
/// items of the ideal sequential stack.
pub struct CoupledStack<T> {
    cfg: StructureConfig,
    window: CoupledWindow,
    slots: Box<[CachePadded<DescriptorCell<CoupledDesc<T>>>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

unsafe impl<T: Send> Send for CoupledStack<T> {}
unsafe impl<T: Send> Sync for CoupledStack<T> {}

struct CoupledView<'a, T> {
    slots: &'a [CachePadded<DescriptorCell<CoupledDesc<T>>>],
}

impl<'a, T> SlotView for CoupledView<'a, T> {
    type Snap<'g>
        = crate::window::Snap<'g, CoupledDesc<T>>
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g> {
        self.slots[index].load(guard)
    }
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64 {
        snap.count as u64
    }
    fn absent<'g>(&'g self, snap: &Self::Snap<'g>, _: &'g Guard) -> bool {
        snap.top.is_null()
    }
}

impl<T: Send> CoupledStack<T> {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(CoupledStack {
            slots: (0..cfg.width)
                .map(|_| {
                    CachePadded::new(DescriptorCell::new(CoupledDesc {
                        top: ptr::null(),
                        count: 0,
                        version: 0,
                    }))
                })
                .collect(),
            window: CoupledWindow::new(&cfg),
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    /// k such that every pop removes one of the k+1 topmost items:
    /// `(2 * shift + depth) * (width - 1)`, with `shift` the larger of the
    /// two shift amounts when the split is asymmetric.
    pub fn k_bound_for(cfg: &StructureConfig) -> u64 {
        (2 * cfg.max_shift() + cfg.depth) * (cfg.width as u64 - 1)
    }

    pub fn k_bound(&self) -> u64 {
        Self::k_bound_for(&self.cfg)
    }

    pub fn config(&self) -> &StructureConfig {
        &self.cfg
    }

    pub fn thread_context(&self) -> ThreadContext {
        let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
        ThreadContext::new(&self.cfg, 0, self.cfg.depth, Rng64::from_seed(self.seed, id))
    }

    fn view(&self) -> CoupledView<'_, T> {
        CoupledView { slots: &self.slots }
    }

    pub fn push(&self, ctx: &mut ThreadContext, value: T) {
        self.push_with(ctx, value, &Untracked)
    }

    /// Inserts `value` atop some valid sub-stack; linearizes at the
    /// descriptor publish.
    pub fn push_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = Node::alloc(value, ptr::null());
        let label = unsafe { (*node).value.get() as *const T };
        let view = self.view();
        loop {
            match coupled_select(OpKind::Put, &view, &self.window, &self.cfg, ctx, guard) {
                Selection::Slot { index, snap } => {
                    unsafe { (*(node as *mut Node<T>)).next = snap.top };
                    let new = CoupledDesc {
                        top: node,
                        count: snap.count + 1,
                        version: snap.version.wrapping_add(1),
                    };
                    let ok = instr.insert(label, End::Front, || {
                        self.slots[index].publish(snap, new, guard).is_some()
                    });
                    if ok {
                        ctx.record_success(index);
                        return;
                    }
                    ctx.record_contention();
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    pub fn pop(&self, ctx: &mut ThreadContext) -> Option<T> {
        self.pop_with(ctx, &Untracked)
    }

    /// Removes and returns the top of some valid sub-stack; `None` only
    /// under the window emptiness rule.
    pub fn pop_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let view = self.view();
        loop {
            match coupled_select(OpKind::Get, &view, &self.window, &self.cfg, ctx, guard) {
                Selection::Slot { index, snap } => {
                    let top = snap.top;
                    debug_assert!(!top.is_null());
                    let new = CoupledDesc {
                        top: unsafe { (*top).next },
                        count: snap.count - 1,
                        version: snap.version.wrapping_add(1),
                    };
                    let taken = instr.remove(End::Front, || {
                        if self.slots[index].publish(snap, new, guard).is_some() {
                            let value = unsafe { take_value(top) };
                            unsafe { guard.defer_destroy(Shared::from(top)) };
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

    /// Per-slot (top identity, count, version) snapshot for state audits.
    pub fn slot_states(&self) -> Vec<(usize, u64, u32)> {
        let guard = &epoch::pin();
        self.slots
            .iter()
            .map(|cell| {
                let d = cell.load(guard);
                (d.top as usize, d.count as u64, d.version)
            })
            .collect()
    }

    /// Current (window max, version).
    pub fn window_state(&self) -> (u64, u32) {
        let w = self.window.load();
        (w.max, w.version)
    }

    /// Walks one sub-stack chain; only meaningful at quiescence.
    #[doc(hidden)]
    pub fn chain_len(&self, index: usize) -> usize {
        let guard = &epoch::pin();
        let mut cur = self.slots[index].load(guard).top;
        let mut n = 0;
        while !cur.is_null() {
            n += 1;
            cur = unsafe { (*cur).next };
        }
        n
    }
}

impl<T> Drop for CoupledStack<T> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        for cell in self.slots.iter() {
            unsafe { free_chain(cell.load(guard).top) };
        }
    }
}

/// Decoupled-window relaxed stack: independent monotone push/pop counters
/// per sub-stack and one monotone window per direction; the counter pair
/// never repeats, which replaces the version tag for ABA protection.
pub struct DecoupledStack<T> {
    cfg: StructureConfig,
    put_window: DecoupledWindow,
    get_window: DecoupledWindow,
    slots: Box<[CachePadded<DescriptorCell<DecoupledDesc<T>>>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

unsafe impl<T: Send> Send for DecoupledStack<T> {}
unsafe impl<T: Send> Sync for DecoupledStack<T> {}

struct DecoupledView<'a, T> {
    slots: &'a [CachePadded<DescriptorCell<DecoupledDesc<T>>>],
    dir: OpKind,
}

impl<'a, T> SlotView for DecoupledView<'a, T> {
    type Snap<'g>
        = crate::window::Snap<'g, DecoupledDesc<T>>
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g> {
        self.slots[index].load(guard)
    }
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64 {
        match self.dir {
            OpKind::Put => snap.puts,
            OpKind::Get => snap.gets,
        }
    }
    fn absent<'g>(&'g self, snap: &Self::Snap<'g>, _: &'g Guard) -> bool {
        snap.top.is_null()
    }
}

impl<T: Send> DecoupledStack<T> {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(DecoupledStack {
            slots: (0..cfg.width)
                .map(|_| {
                    CachePadded::new(DescriptorCell::new(DecoupledDesc {
                        top: ptr::null(),
                        puts: 0,
                        gets: 0,
                    }))
                })
                .collect(),
            put_window: DecoupledWindow::new(&cfg),
            get_window: DecoupledWindow::new(&cfg),
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    /// k for the decoupled stack: `3 * depth * (width - 1)`.
    pub fn k_bound_for(cfg: &StructureConfig) -> u64 {
        3 * cfg.depth * (cfg.width as u64 - 1)
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

    pub fn push(&self, ctx: &mut ThreadContext, value: T) {
        self.push_with(ctx, value, &Untracked)
    }

    pub fn push_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, value: T, instr: &I) {
        let guard = &epoch::pin();
        let node = Node::alloc(value, ptr::null());
        let label = unsafe { (*node).value.get() as *const T };
        let view = DecoupledView {
            slots: &self.slots,
            dir: OpKind::Put,
        };
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
                    unsafe { (*(node as *mut Node<T>)).next = snap.top };
                    let new = DecoupledDesc {
                        top: node,
                        puts: snap.puts + 1,
                        gets: snap.gets,
                    };
                    let ok = instr.insert(label, End::Front, || {
                        self.slots[index].publish(snap, new, guard).is_some()
                    });
                    if ok {
                        ctx.record_success(index);
                        return;
                    }
                    ctx.record_contention();
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    pub fn pop(&self, ctx: &mut ThreadContext) -> Option<T> {
        self.pop_with(ctx, &Untracked)
    }

    pub fn pop_with<I: Instrument<T>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<T> {
        let guard = &epoch::pin();
        let view = DecoupledView {
            slots: &self.slots,
            dir: OpKind::Get,
        };
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
                    let top = snap.top;
                    debug_assert!(!top.is_null());
                    let new = DecoupledDesc {
                        top: unsafe { (*top).next },
                        puts: snap.puts,
                        gets: snap.gets + 1,
                    };
                    let taken = instr.remove(End::Front, || {
                        if self.slots[index].publish(snap, new, guard).is_some() {
                            let value = unsafe { take_value(top) };
                            unsafe { guard.defer_destroy(Shared::from(top)) };
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

    /// Per-slot (top identity, putcount, getcount) snapshot for audits.
    pub fn slot_states(&self) -> Vec<(usize, u64, u64)> {
        let guard = &epoch::pin();
        self.slots
            .iter()
            .map(|cell| {
                let d = cell.load(guard);
                (d.top as usize, d.puts, d.gets)
            })
            .collect()
    }

    pub fn window_maxes(&self) -> (u64, u64) {
        (self.put_window.max(), self.get_window.max())
    }
}

impl<T> Drop for DecoupledStack<T> {
    fn drop(&mut self) {
        let guard = unsafe { epoch::unprotected() };
        for cell in self.slots.iter() {
            unsafe { free_chain(cell.load(guard).top) };
        }
    }
}
