//! Relaxed shared counters: `width` non-negative sub-counters behind a
//! coupled or decoupled window. A successful update returns the operated
//! slot's fresh sub-count scaled by `width` as the observed global value,
//! which stays within `2 * depth * (width - 1)` of the exact total.

use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::{self as epoch, Guard};
use crossbeam_utils::CachePadded;

use crate::config::{ConfigError, StructureConfig};
use crate::oracle::CounterInstrument;
use crate::rng::Rng64;
use crate::window::{
    coupled_select, decoupled_select, CoupledWindow, DecoupledWindow, OpKind, PackedCell,
    Selection, SlotView, ThreadContext,
};

/// k for both counter variants: `2 * depth * (width - 1)`.
pub fn k_bound(cfg: &StructureConfig) -> u64 {
    2 * cfg.depth * (cfg.width as u64 - 1)
}

#[inline]
fn pack_coupled(value: u32, version: u32) -> u64 {
    ((version as u64) << 32) | value as u64
}

#[inline]
fn unpack_coupled(bits: u64) -> (u32, u32) {
    (bits as u32, (bits >> 32) as u32)
}

/// Coupled-window counter: one sub-count per slot moving both ways, tagged
/// with a version that increases on every successful update.
pub struct CoupledCounter {
    cfg: StructureConfig,
    window: CoupledWindow,
    slots: Box<[CachePadded<PackedCell>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

struct CoupledView<'a> {
    slots: &'a [CachePadded<PackedCell>],
}

impl SlotView for CoupledView<'_> {
    type Snap<'g>
        = u64
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, _: &'g Guard) -> u64 {
        self.slots[index].load()
    }
    fn count(&self, snap: &u64) -> u64 {
        unpack_coupled(*snap).0 as u64
    }
    fn absent<'g>(&'g self, snap: &u64, _: &'g Guard) -> bool {
        unpack_coupled(*snap).0 == 0
    }
}

impl CoupledCounter {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(CoupledCounter {
            slots: (0..cfg.width)
                .map(|_| CachePadded::new(PackedCell::new(0)))
                .collect(),
            window: CoupledWindow::new(&cfg),
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &StructureConfig {
        &self.cfg
    }

    pub fn k_bound(&self) -> u64 {
        k_bound(&self.cfg)
    }

    pub fn thread_context(&self) -> ThreadContext {
        let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
        ThreadContext::new(&self.cfg, 0, self.cfg.depth, Rng64::from_seed(self.seed, id))
    }

    fn view(&self) -> CoupledView<'_> {
        CoupledView { slots: &self.slots }
    }

    pub fn increment(&self, ctx: &mut ThreadContext) -> u64 {
        self.increment_with(ctx, &crate::oracle::Untracked)
    }

    /// Bumps one valid slot and returns its new sub-count times width.
    pub fn increment_with<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        let guard = &epoch::pin();
        loop {
            match coupled_select(OpKind::Put, &self.view(), &self.window, &self.cfg, ctx, guard) {
                Selection::Slot { index, snap } => {
                    let (value, version) = unpack_coupled(snap);
                    let new = pack_coupled(value + 1, version.wrapping_add(1));
                    let observed = instr.apply(1, || {
                        self.slots[index]
                            .publish(snap, new)
                            .then(|| (value as u64 + 1) * self.cfg.width as u64)
                    });
                    match observed {
                        Some(global) => {
                            ctx.record_success(index);
                            return global;
                        }
                        None => ctx.record_contention(),
                    }
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    pub fn decrement(&self, ctx: &mut ThreadContext) -> u64 {
        self.decrement_with(ctx, &crate::oracle::Untracked)
    }

    /// Decrements one valid slot and returns its new sub-count times width;
    /// a fully zero state returns 0 under the emptiness rule and no slot
    /// ever goes negative.
    pub fn decrement_with<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        let guard = &epoch::pin();
        loop {
            match coupled_select(OpKind::Get, &self.view(), &self.window, &self.cfg, ctx, guard) {
                Selection::Slot { index, snap } => {
                    let (value, version) = unpack_coupled(snap);
                    debug_assert!(value > 0, "get validity excludes zero slots");
                    let new = pack_coupled(value - 1, version.wrapping_add(1));
                    let observed = instr.apply(-1, || {
                        self.slots[index]
                            .publish(snap, new)
                            .then(|| (value as u64 - 1) * self.cfg.width as u64)
                    });
                    match observed {
                        Some(global) => {
                            ctx.record_success(index);
                            return global;
                        }
                        None => ctx.record_contention(),
                    }
                }
                Selection::Empty => {
                    ctx.stats.ops += 1;
                    return 0;
                }
            }
        }
    }

    /// Sum of all sub-counts. Only meaningful at quiescence.
    pub fn exact_total(&self) -> u64 {
        self.slots
            .iter()
            .map(|s| unpack_coupled(s.load()).0 as u64)
            .sum()
    }

    /// Per-slot (sub-count, version) snapshot for state audits.
    pub fn slot_states(&self) -> Vec<(u64, u32)> {
        self.slots
            .iter()
            .map(|s| {
                let (value, version) = unpack_coupled(s.load());
                (value as u64, version)
            })
            .collect()
    }

    /// Current window max, for containment audits.
    pub fn window_state(&self) -> (u64, u32) {
        let w = self.window.load();
        (w.max, w.version)
    }
}

#[inline]
fn pack_decoupled(inc: u32, dec: u32) -> u64 {
    ((dec as u64) << 32) | inc as u64
}

#[inline]
fn unpack_decoupled(bits: u64) -> (u32, u32) {
    (bits as u32, (bits >> 32) as u32)
}

/// Decoupled-window counter: monotone increment/decrement counts per slot;
/// the pair never repeats, which replaces the version tag.
pub struct DecoupledCounter {
    cfg: StructureConfig,
    put_window: DecoupledWindow,
    get_window: DecoupledWindow,
    slots: Box<[CachePadded<PackedCell>]>,
    seed: u64,
    next_ctx: AtomicU64,
}

struct DecoupledView<'a> {
    slots: &'a [CachePadded<PackedCell>],
    dir: OpKind,
}

impl SlotView for DecoupledView<'_> {
    type Snap<'g>
        = u64
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, _: &'g Guard) -> u64 {
        self.slots[index].load()
    }
    fn count(&self, snap: &u64) -> u64 {
        let (inc, dec) = unpack_decoupled(*snap);
        match self.dir {
            OpKind::Put => inc as u64,
            OpKind::Get => dec as u64,
        }
    }
    fn absent<'g>(&'g self, snap: &u64, _: &'g Guard) -> bool {
        let (inc, dec) = unpack_decoupled(*snap);
        inc == dec
    }
}

impl DecoupledCounter {
    pub fn new(cfg: StructureConfig) -> Result<Self, ConfigError> {
        Self::with_seed(cfg, 0)
    }

    pub fn with_seed(cfg: StructureConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(DecoupledCounter {
            slots: (0..cfg.width)
                .map(|_| CachePadded::new(PackedCell::new(0)))
                .collect(),
            put_window: DecoupledWindow::new(&cfg),
            get_window: DecoupledWindow::new(&cfg),
            cfg,
            seed,
            next_ctx: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &StructureConfig {
        &self.cfg
    }

    pub fn k_bound(&self) -> u64 {
        k_bound(&self.cfg)
    }

    pub fn thread_context(&self) -> ThreadContext {
        let id = self.next_ctx.fetch_add(1, Ordering::Relaxed);
        ThreadContext::new(&self.cfg, 2, self.cfg.depth, Rng64::from_seed(self.seed, id))
    }

    pub fn increment(&self, ctx: &mut ThreadContext) -> u64 {
        self.increment_with(ctx, &crate::oracle::Untracked)
    }

    pub fn increment_with<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        let guard = &epoch::pin();
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
                    let (inc, dec) = unpack_decoupled(snap);
                    let new = pack_decoupled(inc + 1, dec);
                    let observed = instr.apply(1, || {
                        self.slots[index]
                            .publish(snap, new)
                            .then(|| (inc as u64 + 1 - dec as u64) * self.cfg.width as u64)
                    });
                    match observed {
                        Some(global) => {
                            ctx.record_success(index);
                            return global;
                        }
                        None => ctx.record_contention(),
                    }
                }
                Selection::Empty => unreachable!("puts never observe emptiness"),
            }
        }
    }

    pub fn decrement(&self, ctx: &mut ThreadContext) -> u64 {
        self.decrement_with(ctx, &crate::oracle::Untracked)
    }

    pub fn decrement_with<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
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
                    let (inc, dec) = unpack_decoupled(snap);
                    debug_assert!(inc > dec, "get validity excludes empty slots");
                    let new = pack_decoupled(inc, dec + 1);
                    let observed = instr.apply(-1, || {
                        self.slots[index]
                            .publish(snap, new)
                            .then(|| (inc as u64 - dec as u64 - 1) * self.cfg.width as u64)
                    });
                    match observed {
                        Some(global) => {
                            ctx.record_success(index);
                            return global;
                        }
                        None => ctx.record_contention(),
                    }
                }
                Selection::Empty => {
                    ctx.stats.ops += 1;
                    return 0;
                }
            }
        }
    }

    /// Net total (increments minus decrements). Only meaningful at
    /// quiescence.
    pub fn exact_total(&self) -> u64 {
        self.slots
            .iter()
            .map(|s| {
                let (inc, dec) = unpack_decoupled(s.load());
                inc as u64 - dec as u64
            })
            .sum()
    }

    /// Per-slot (increment count, decrement count) snapshot for audits.
    pub fn slot_states(&self) -> Vec<(u64, u64)> {
        self.slots
            .iter()
            .map(|s| {
                let (inc, dec) = unpack_decoupled(s.load());
                (inc as u64, dec as u64)
            })
            .collect()
    }

    pub fn window_maxes(&self) -> (u64, u64) {
        (self.put_window.max(), self.get_window.max())
    }
}
