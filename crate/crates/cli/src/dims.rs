//! Width/depth derivation from a target relaxation bound.
//!
//! Width follows the per-structure multiplier schedule (1x/3x/6x the thread
//! count by k band), capped by the largest width that can realize the bound
//! at depth 1; depth is then the largest value whose realized bound stays
//! at or below the target. A target of 0 (or a width forced down to 1)
//! degenerates to the exact structure.

use relax2d::baselines::stack_k_bound;

use crate::ids::StructureId;

/// Multiplier schedule bands: k in (0,100], (100,200], (200,400],
/// (400,1000], (1000,2000], (2000, inf).
fn band(k: u64) -> usize {
    match k {
        0..=100 => 0,
        101..=200 => 1,
        201..=400 => 2,
        401..=1000 => 3,
        1001..=2000 => 4,
        _ => 5,
    }
}

fn multiplier(structure: StructureId, k: u64) -> u64 {
    let bands: [u64; 6] = match structure {
        StructureId::StackCoupled | StructureId::StackDecoupled => [3, 3, 3, 3, 3, 3],
        StructureId::QueueDecoupled => [1, 3, 3, 3, 6, 6],
        StructureId::CounterCoupled => [3, 3, 3, 6, 6, 6],
        StructureId::CounterDecoupled => [3, 3, 3, 3, 3, 6],
        // No schedule column exists for the deque; use the dominant 3x.
        StructureId::DequeDecoupled => [3, 3, 3, 3, 3, 3],
        _ => [1, 1, 1, 1, 1, 1],
    };
    bands[band(k)]
}

/// Largest width that can realize bound <= k at depth 1 (with the smallest
/// legal shift for the coupled stack).
fn width_cap(structure: StructureId, k: u64) -> u64 {
    match structure {
        StructureId::StackCoupled | StructureId::StackDecoupled => k / 3 + 1,
        StructureId::QueueDecoupled => k + 1,
        StructureId::CounterCoupled | StructureId::CounterDecoupled => k / 2 + 1,
        StructureId::DequeDecoupled => k / 8 + 1,
        _ => u64::MAX,
    }
}

/// Realized k for a windowed structure under the default shift split, or
/// the round-robin stack bound; `None` for structures without a proven
/// bound (Random, Random-C2, round-robin queue/counter).
pub fn realized_k_bound(
    structure: StructureId,
    width: usize,
    depth: u64,
    shift_up: u64,
    shift_down: u64,
    threads: usize,
) -> Option<u64> {
    let w = width as u64;
    match structure {
        StructureId::StackCoupled => Some((2 * shift_up.max(shift_down) + depth) * (w - 1)),
        StructureId::StackDecoupled => Some(3 * depth * (w - 1)),
        StructureId::QueueDecoupled => Some(depth * (w - 1)),
        StructureId::DequeDecoupled => Some(8 * depth * (w - 1)),
        StructureId::CounterCoupled | StructureId::CounterDecoupled => Some(2 * depth * (w - 1)),
        StructureId::Treiber | StructureId::MsQueue | StructureId::Faa => Some(0),
        StructureId::StackRobin => Some(stack_k_bound(threads, width)),
        _ => None,
    }
}

/// Picks `(width, depth)` for a target bound `k`. Windowed structures get a
/// real depth; baselines report depth 0.
pub fn derive_dimensions(structure: StructureId, k: u64, threads: usize) -> (usize, u64) {
    let threads = threads.max(1) as u64;
    match structure {
        StructureId::Treiber | StructureId::MsQueue | StructureId::Faa => (1, 0),
        StructureId::StackRandom
        | StructureId::StackRandomC2
        | StructureId::QueueRandom
        | StructureId::QueueRandomC2
        | StructureId::CounterRandom
        | StructureId::CounterRandomC2 => ((3 * threads) as usize, 0),
        StructureId::StackRobin | StructureId::CounterRobin => {
            ((k / (2 * threads) + 1) as usize, 0)
        }
        StructureId::QueueRobin => ((k / threads + 1) as usize, 0),
        windowed => {
            if k == 0 {
                return (1, 1);
            }
            let width = (multiplier(windowed, k) * threads)
                .min(width_cap(windowed, k))
                .max(1);
            if width == 1 {
                return (1, 1);
            }
            let depth = max_depth_within(windowed, width as usize, k);
            (width as usize, depth)
        }
    }
}

/// Largest depth whose realized bound stays <= k; the bound is monotone in
/// depth, so a binary search suffices.
fn max_depth_within(structure: StructureId, width: usize, k: u64) -> u64 {
    let bound = |d: u64| -> u64 {
        let shift = (d / 2).max(1);
        realized_k_bound(structure, width, d, shift, shift, 1)
            .expect("windowed structures have bounds")
    };
    debug_assert!(bound(1) <= k, "width cap guarantees depth 1 fits");
    let mut lo = 1u64;
    let mut hi = k.max(2);
    while bound(hi) <= k {
        hi = hi.saturating_mul(2);
        if hi >= u32::MAX as u64 {
            break;
        }
    }
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if bound(mid) <= k {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}
