//! Decoupled window: independent monotone windows per operation direction.
//! Counters only grow, which both removes the ABA problem and lets threads
//! memoize slots they have already seen full under the current window.

use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam_epoch::Guard;

use super::{OpKind, Selection, SlotView, ThreadContext};
use crate::config::StructureConfig;

/// A monotone window. `max` starts at `depth` and only ever moves up, in
/// steps of `depth`, so it stays congruent to 0 modulo depth relative to
/// its initial value.
pub struct DecoupledWindow {
    max: AtomicU64,
}

impl DecoupledWindow {
    pub fn new(cfg: &StructureConfig) -> Self {
        DecoupledWindow {
            max: AtomicU64::new(cfg.depth),
        }
    }

    #[inline]
    pub fn max(&self) -> u64 {
        self.max.load(Ordering::Acquire)
    }

    /// One shift attempt: `max -> max + depth`. Monotonicity makes the plain
    /// value CAS ABA-free.
    fn try_shift(&self, expected: u64, depth: u64) -> bool {
        self.max
            .compare_exchange(
                expected,
                expected + depth,
                Ordering::AcqRel,
                Ordering::Acquire,
            )
            .is_ok()
    }
}

/// Window search for the decoupled engine. Same scan discipline as the
/// coupled one, with two additions from the memo-map optimization: a slot
/// whose cached counter already reached the cached window's max is skipped
/// without touching shared memory, and once `width` distinct slots are
/// recorded full a shift is attempted early. `dir` picks the per-direction
/// thread state (and therefore the memo map) to use.
pub(crate) fn decoupled_select<'g, V: SlotView>(
    op: OpKind,
    view: &'g V,
    win: &DecoupledWindow,
    cfg: &StructureConfig,
    ctx: &mut ThreadContext,
    dir: usize,
    guard: &'g Guard,
) -> Selection<V::Snap<'g>> {
    let width = cfg.width;
    let mut index = ctx.scan_start(width);
    let mut searched = 0usize;
    let mut random_left = cfg.random_jumps;

    {
        let live = win.max();
        let state = &mut ctx.dirs[dir];
        if state.lwin_max != live {
            state.sync(live);
        }
    }

    loop {
        if searched == width || ctx.dirs[dir].full_slots == width {
            if op == OpKind::Get && !ctx.dirs[dir].notempty {
                return Selection::Empty;
            }
            let cached = ctx.dirs[dir].lwin_max;
            if win.max() == cached && win.try_shift(cached, cfg.depth) {
                ctx.stats.shifts += 1;
            }
            ctx.dirs[dir].sync(win.max());
            searched = 0;
        }

        let skip = ctx.dirs[dir].full[index] >= ctx.dirs[dir].lwin_max;
        if !skip {
            let snap = view.load(index, guard);
            ctx.stats.probes += 1;
            let live_max = win.max();
            let count = view.count(&snap);
            match op {
                OpKind::Put => {
                    if count < live_max {
                        return Selection::Slot { index, snap };
                    }
                    let state = &mut ctx.dirs[dir];
                    state.full[index] = count;
                    state.full_slots += 1;
                }
                OpKind::Get => {
                    let absent = view.absent(&snap, guard);
                    if count < live_max && !absent {
                        return Selection::Slot { index, snap };
                    }
                    if !absent {
                        // Exhausted but not empty: it stays non-empty for
                        // the rest of this window, so memoizing is sound.
                        let state = &mut ctx.dirs[dir];
                        state.notempty = true;
                        state.full[index] = count;
                        state.full_slots += 1;
                    }
                }
            }
        }

        let live = win.max();
        if live == ctx.dirs[dir].lwin_max {
            if random_left > 0 {
                index = ctx.rng.below(width);
                random_left -= 1;
            } else {
                index = if index + 1 == width { 0 } else { index + 1 };
                searched += 1;
            }
        } else {
            ctx.dirs[dir].sync(live);
            searched = 0;
        }
    }
}
