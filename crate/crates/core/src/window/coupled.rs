//! Coupled window: one shared `(max, version)` pair for both operation
//! directions, with per-slot counters that move both ways.

use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::Guard;

use super::{OpKind, Selection, SlotView, ThreadContext};
use crate::config::StructureConfig;

/// Observed window state. The version bumps on every successful shift, so
/// equality of two snapshots certifies the window did not move in between.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSnapshot {
    pub max: u64,
    pub version: u32,
}

/// The shared coupled window, packed into one word so a shift is a single
/// CAS. `max` moves up by `shift_up` and down by `shift_down`, never below 1.
pub struct CoupledWindow {
    state: AtomicU64,
}

#[inline]
fn pack(max: u64, version: u32) -> u64 {
    debug_assert!(max <= u32::MAX as u64);
    ((version as u64) << 32) | max
}

#[inline]
fn unpack(bits: u64) -> WindowSnapshot {
    WindowSnapshot {
        max: bits & 0xffff_ffff,
        version: (bits >> 32) as u32,
    }
}

impl CoupledWindow {
    /// Fresh window with `max = depth`, so the first window's floor is 0.
    pub fn new(cfg: &StructureConfig) -> Self {
        CoupledWindow {
            state: AtomicU64::new(pack(cfg.depth, 0)),
        }
    }

    #[inline]
    pub fn load(&self) -> WindowSnapshot {
        unpack(self.state.load(Ordering::Acquire))
    }

    fn try_replace(&self, expected: WindowSnapshot, max: u64) -> bool {
        self.state
            .compare_exchange(
                pack(expected.max, expected.version),
                pack(max, expected.version.wrapping_add(1)),
                Ordering::AcqRel,
                Ordering::Acquire,
            )
            .is_ok()
    }
}

/// One shift attempt against the caller's cached window. A Put moves the
/// window up by `shift_up`; a Get moves it down by `shift_down` unless the
/// window already sits at its floor (`max <= depth`), in which case nothing
/// happens and the caller rescans. Returns whether this caller's CAS won;
/// on a lost race the caller adopts the concurrent shift instead of
/// retrying its own.
pub(crate) fn coupled_try_shift(
    op: OpKind,
    win: &CoupledWindow,
    cfg: &StructureConfig,
    expected: WindowSnapshot,
) -> bool {
    let new_max = match op {
        OpKind::Put => expected.max + cfg.shift_up,
        OpKind::Get => {
            if expected.max <= cfg.depth {
                return false;
            }
            expected.max - cfg.shift_down
        }
    };
    win.try_replace(expected, new_max)
}

/// Window search for the coupled engine. Scans from the thread's start
/// index (or a fresh random one after contention), taking `random_jumps`
/// random probes before settling into round-robin. Returns a slot valid for
/// `op`, or `Empty` for a Get whose full-width scan under one unchanged
/// window saw only absent items. When a scan finds no valid slot the window
/// is shifted and the scan restarts; any observed window change also
/// restarts it.
pub(crate) fn coupled_select<'g, V: SlotView>(
    op: OpKind,
    view: &'g V,
    win: &CoupledWindow,
    cfg: &StructureConfig,
    ctx: &mut ThreadContext,
    guard: &'g Guard,
) -> Selection<V::Snap<'g>> {
    let width = cfg.width;
    let mut index = ctx.scan_start(width);
    let mut lwin = win.load();
    let mut searched = 0usize;
    let mut random_left = cfg.random_jumps;
    let mut notempty = false;

    loop {
        if searched == width {
            if op == OpKind::Get && !notempty {
                return Selection::Empty;
            }
            if win.load() == lwin && coupled_try_shift(op, win, cfg, lwin) {
                ctx.stats.shifts += 1;
            }
            lwin = win.load();
            searched = 0;
            notempty = false;
        }

        let snap = view.load(index, guard);
        ctx.stats.probes += 1;
        let live = win.load();
        let count = view.count(&snap);
        let valid = match op {
            OpKind::Put => count < live.max,
            OpKind::Get => {
                count as i64 > live.max as i64 - cfg.depth as i64 && !view.absent(&snap, guard)
            }
        };
        if valid {
            return Selection::Slot { index, snap };
        }

        if live == lwin {
            if random_left > 0 {
                index = ctx.rng.below(width);
                random_left -= 1;
            } else {
                if op == OpKind::Get && !view.absent(&snap, guard) {
                    notempty = true;
                }
                index = if index + 1 == width { 0 } else { index + 1 };
                searched += 1;
            }
        } else {
            lwin = live;
            searched = 0;
            notempty = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::Selection;
    use crossbeam_epoch as epoch;
    use std::sync::atomic::AtomicU64;

    /// Stack-like test slots: counter equals the number of items, absent
    /// means zero items.
    struct FakeSlots {
        counts: Vec<AtomicU64>,
    }

    impl FakeSlots {
        fn new(counts: &[u64]) -> Self {
            FakeSlots {
                counts: counts.iter().map(|&c| AtomicU64::new(c)).collect(),
            }
        }
    }

    impl SlotView for FakeSlots {
        type Snap<'g>
            = u64
        where
            Self: 'g;
        fn load<'g>(&'g self, index: usize, _: &'g Guard) -> u64 {
            self.counts[index].load(Ordering::Acquire)
        }
        fn count(&self, snap: &u64) -> u64 {
            *snap
        }
        fn absent<'g>(&'g self, snap: &u64, _: &'g Guard) -> bool {
            *snap == 0
        }
    }

    fn ctx_for(cfg: &StructureConfig) -> ThreadContext {
        ThreadContext::new(cfg, 0, cfg.depth, crate::rng::Rng64::from_seed(1, 0))
    }

    #[test]
    fn shift_up_adds_shift_and_bumps_version() {
        let cfg = StructureConfig::with_shifts(2, 4, 2, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let seen = win.load();
        assert_eq!(seen.max, 4);
        assert!(coupled_try_shift(OpKind::Put, &win, &cfg, seen));
        let after = win.load();
        assert_eq!(after.max, 6);
        assert_eq!(after.version, seen.version + 1);
    }

    #[test]
    fn shift_down_subtracts_shift() {
        let cfg = StructureConfig::with_shifts(2, 2, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let seen = win.load();
        assert!(coupled_try_shift(OpKind::Put, &win, &cfg, seen)); // max = 3
        let seen = win.load();
        assert!(coupled_try_shift(OpKind::Put, &win, &cfg, seen)); // max = 4
        let seen = win.load();
        assert_eq!(seen.max, 4);
        assert!(coupled_try_shift(OpKind::Get, &win, &cfg, seen));
        assert_eq!(win.load().max, 3);
    }

    #[test]
    fn shift_down_at_floor_is_a_noop() {
        let cfg = StructureConfig::with_shifts(2, 2, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let seen = win.load();
        assert_eq!(seen.max, 2);
        assert!(!coupled_try_shift(OpKind::Get, &win, &cfg, seen));
        assert_eq!(win.load(), seen);
    }

    #[test]
    fn stale_shift_loses_to_concurrent_one() {
        let cfg = StructureConfig::with_shifts(2, 4, 2, 2).unwrap();
        let win = CoupledWindow::new(&cfg);
        let stale = win.load();
        assert!(coupled_try_shift(OpKind::Put, &win, &cfg, stale));
        assert!(!coupled_try_shift(OpKind::Put, &win, &cfg, stale));
        assert_eq!(win.load().max, 6);
    }

    #[test]
    fn put_selects_the_only_valid_index() {
        // width=2, depth=1, max=1, counts=[0,1]: index 1 is full, 0 valid.
        let cfg = StructureConfig::with_shifts(2, 1, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let slots = FakeSlots::new(&[0, 1]);
        let mut ctx = ctx_for(&cfg);
        let guard = &epoch::pin();
        match coupled_select(OpKind::Put, &slots, &win, &cfg, &mut ctx, guard) {
            Selection::Slot { index, snap } => {
                assert_eq!(index, 0);
                assert_eq!(snap, 0);
            }
            Selection::Empty => panic!("put can never come back empty"),
        }
    }

    #[test]
    fn full_window_shifts_up_then_any_index_is_valid() {
        let cfg = StructureConfig::with_shifts(2, 1, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let slots = FakeSlots::new(&[1, 1]);
        let mut ctx = ctx_for(&cfg);
        let guard = &epoch::pin();
        let before = win.load();
        match coupled_select(OpKind::Put, &slots, &win, &cfg, &mut ctx, guard) {
            Selection::Slot { snap, .. } => {
                let after = win.load();
                assert_eq!(after.max, before.max + cfg.shift_up);
                assert_eq!(after.version, before.version + 1);
                assert!(snap < after.max);
            }
            Selection::Empty => panic!("put can never come back empty"),
        }
    }

    #[test]
    fn get_on_all_absent_slots_reports_empty() {
        let cfg = StructureConfig::with_shifts(3, 2, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        let slots = FakeSlots::new(&[0, 0, 0]);
        let mut ctx = ctx_for(&cfg);
        let guard = &epoch::pin();
        match coupled_select(OpKind::Get, &slots, &win, &cfg, &mut ctx, guard) {
            Selection::Empty => {}
            Selection::Slot { .. } => panic!("nothing to get"),
        }
    }

    #[test]
    fn get_picks_a_slot_above_the_floor() {
        let cfg = StructureConfig::with_shifts(2, 2, 1, 1).unwrap();
        let win = CoupledWindow::new(&cfg);
        // max=2, floor=0: slot 0 empty, slot 1 has one item (count 1 > 0).
        let slots = FakeSlots::new(&[0, 1]);
        let mut ctx = ctx_for(&cfg);
        let guard = &epoch::pin();
        match coupled_select(OpKind::Get, &slots, &win, &cfg, &mut ctx, guard) {
            Selection::Slot { index, snap } => {
                assert_eq!(index, 1);
                assert_eq!(snap, 1);
            }
            Selection::Empty => panic!("slot 1 holds an item"),
        }
    }

    #[test]
    fn contention_hint_randomizes_and_clears() {
        let cfg = StructureConfig::with_shifts(4, 2, 1, 1).unwrap();
        let mut ctx = ctx_for(&cfg);
        ctx.start_index = 3;
        ctx.record_contention();
        let first = ctx.scan_start(cfg.width);
        assert!(first < cfg.width);
        assert!(!ctx.contended);
        assert_eq!(ctx.scan_start(cfg.width), 3);
    }
}
