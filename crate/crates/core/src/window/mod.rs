//! The window engines: search, hopping, shifting and emptiness detection
//! shared by all relaxed structures.
//!
//! A window bounds every sub-structure's operation counter inside
//! `[max - depth, max]`. Operations search for a slot whose counter is
//! valid for them, sticking to the slot of their last success for
//! locality; when no slot is valid the window shifts. The coupled engine
//! keeps one window and one bidirectional counter per slot, the decoupled
//! engine one monotone window/counter pair per operation direction.

mod cell;
mod coupled;
mod decoupled;

pub use cell::{DescriptorCell, PackedCell, Snap};
pub(crate) use coupled::coupled_select;
pub use coupled::{CoupledWindow, WindowSnapshot};
pub(crate) use decoupled::decoupled_select;
pub use decoupled::DecoupledWindow;

use crate::config::StructureConfig;
use crate::rng::Rng64;
use crossbeam_epoch::Guard;

/// Direction of an operation from the window's point of view: `Put`
/// inserts (counter moves toward `max`), `Get` removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Put,
    Get,
}

/// Outcome of a window search.
pub enum Selection<S> {
    /// A slot whose descriptor satisfied the operation's validity predicate
    /// under a window observed unchanged since the scan segment began.
    Slot { index: usize, snap: S },
    /// Only returned for `Get`: a full-width scan within one unchanged
    /// window observed every slot's item absent.
    Empty,
}

/// How a slot array presents itself to the window search. `count` must
/// report the counter relevant to the operation the view is bound to, and
/// `absent` whether the slot currently holds no item. Snapshots may borrow
/// the guard they were loaded under.
pub(crate) trait SlotView {
    type Snap<'g>: Copy
    where
        Self: 'g;
    fn load<'g>(&'g self, index: usize, guard: &'g Guard) -> Self::Snap<'g>;
    fn count<'g>(&'g self, snap: &Self::Snap<'g>) -> u64;
    fn absent<'g>(&'g self, snap: &Self::Snap<'g>, guard: &'g Guard) -> bool;
}

/// Per-operation-direction thread state for the decoupled engine: the
/// locally synced window plus the memo map of slots already seen full
/// under it. The map holds observed counter values; entries only count as
/// "full" while `>= lwin_max`, so resyncing to a fresh window invalidates
/// the lot.
#[derive(Clone, Debug)]
pub(crate) struct DirState {
    pub lwin_max: u64,
    pub full: Box<[u64]>,
    pub full_slots: usize,
    pub notempty: bool,
}

impl DirState {
    fn new(width: usize, initial_max: u64) -> Self {
        DirState {
            lwin_max: initial_max,
            full: vec![0; width].into_boxed_slice(),
            full_slots: 0,
            notempty: false,
        }
    }

    /// Adopts a freshly observed window and drops everything recorded
    /// under the old one.
    pub fn sync(&mut self, live_max: u64) {
        self.lwin_max = live_max;
        self.full.fill(0);
        self.full_slots = 0;
        self.notempty = false;
    }
}

/// Counters a thread accumulates while operating; `probes` counts every
/// shared slot read during window searches, `shifts` the window shifts this
/// thread's CAS won.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpStats {
    pub ops: u64,
    pub probes: u64,
    pub shifts: u64,
}

impl OpStats {
    pub fn merge(&mut self, other: &OpStats) {
        self.ops += other.ops;
        self.probes += other.probes;
        self.shifts += other.shifts;
    }

    /// Slot probes beyond the first per completed operation.
    pub fn hops_per_op(&self) -> f64 {
        if self.ops == 0 {
            0.0
        } else {
            (self.probes.saturating_sub(self.ops)) as f64 / self.ops as f64
        }
    }

    pub fn shifts_per_op(&self) -> f64 {
        if self.ops == 0 {
            0.0
        } else {
            self.shifts as f64 / self.ops as f64
        }
    }
}

/// Strictly thread-private operation state: search start index, contention
/// hint, per-direction window memos, RNG and statistics. Obtain one per
/// thread from the owning structure and never share it.
pub struct ThreadContext {
    pub(crate) start_index: usize,
    pub(crate) contended: bool,
    pub(crate) rng: Rng64,
    pub(crate) dirs: Box<[DirState]>,
    pub stats: OpStats,
}

impl ThreadContext {
    pub(crate) fn new(cfg: &StructureConfig, dirs: usize, initial_max: u64, rng: Rng64) -> Self {
        ThreadContext {
            start_index: 0,
            contended: false,
            rng,
            dirs: (0..dirs)
                .map(|_| DirState::new(cfg.width, initial_max))
                .collect(),
            stats: OpStats::default(),
        }
    }

    /// Remembers a successful operation's slot as the next search start.
    #[inline]
    pub(crate) fn record_success(&mut self, index: usize) {
        self.start_index = index;
        self.stats.ops += 1;
    }

    #[inline]
    pub(crate) fn record_contention(&mut self) {
        self.contended = true;
    }

    /// Index the next search should begin at, honoring the contention hint.
    #[inline]
    pub(crate) fn scan_start(&mut self, width: usize) -> usize {
        if self.contended {
            self.contended = false;
            self.rng.below(width)
        } else {
            debug_assert!(self.start_index < width);
            self.start_index
        }
    }
}
