//! Concurrent stress checks: k-bound safety under the measurement oracle,
//! conservation, window containment and descriptor-state audits.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;

use relax2d::baselines::RobinStack;
use relax2d::{
    CoupledCounter, CoupledStack, CounterOracle, DecoupledDeque, DecoupledQueue, DecoupledStack,
    Rng64, SequenceOracle, StructureConfig,
};

fn label(tid: u64, seq: u64) -> u64 {
    (tid << 32) | seq
}

/// Mixed measured stress on a coupled stack; returns (pushed, popped) label
/// multisets and the oracle.
fn stress_coupled_stack(
    stack: &CoupledStack<u64>,
    oracle: &SequenceOracle<u64>,
    threads: u64,
    ops: u64,
    put_rate: f64,
) -> (Vec<u64>, Vec<u64>) {
    let barrier = Barrier::new(threads as usize);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|tid| {
                let stack = &stack;
                let oracle = &oracle;
                let barrier = &barrier;
                s.spawn(move || {
                    let mut rng = Rng64::from_seed(1000 + tid, tid);
                    let mut ctx = stack.thread_context();
                    let mut pushed = Vec::new();
                    let mut popped = Vec::new();
                    let mut seq = 0;
                    barrier.wait();
                    for _ in 0..ops {
                        if rng.chance(put_rate) {
                            let value = label(tid, seq);
                            seq += 1;
                            stack.push_with(&mut ctx, value, *oracle);
                            pushed.push(value);
                        } else if let Some(v) = stack.pop_with(&mut ctx, *oracle) {
                            popped.push(v);
                        }
                    }
                    (pushed, popped)
                })
            })
            .collect();
        let mut pushed = Vec::new();
        let mut popped = Vec::new();
        for h in handles {
            let (pu, po) = h.join().unwrap();
            pushed.extend(pu);
            popped.extend(po);
        }
        (pushed, popped)
    })
}

#[test]
fn coupled_stack_respects_its_bound_and_conserves() {
    let cfg = StructureConfig::with_shifts(3, 2, 1, 1).unwrap();
    let stack = CoupledStack::new(cfg).unwrap();
    let oracle = SequenceOracle::new();
    let mut ctx = stack.thread_context();
    for i in 0..512u64 {
        stack.push_with(&mut ctx, label(99, i), &oracle);
    }
    let (mut pushed, mut popped) =
        stress_coupled_stack(&stack, &oracle, 8, 20_000, 0.5);
    pushed.extend((0..512u64).map(|i| label(99, i)));

    let summary = oracle.summary();
    assert!(summary.count > 0);
    assert!(
        summary.max <= stack.k_bound(),
        "rank error {} exceeded k = {}",
        summary.max,
        stack.k_bound()
    );
    assert!(summary.max > 0, "a relaxed run should show some error");

    // Shadow agreement + conservation: shadow contents == structure
    // contents == pushed minus popped.
    let mut shadow = oracle.remaining();
    let mut remaining = Vec::new();
    while let Some(v) = stack.pop(&mut ctx) {
        remaining.push(v);
    }
    shadow.sort_unstable();
    remaining.sort_unstable();
    assert_eq!(shadow, remaining);
    popped.extend(remaining);
    popped.sort_unstable();
    pushed.sort_unstable();
    assert_eq!(pushed, popped);
}

#[test]
fn decoupled_queue_bound_under_stress() {
    let cfg = StructureConfig::new(4, 2).unwrap();
    let queue = DecoupledQueue::new(cfg).unwrap();
    let oracle = SequenceOracle::new();
    let mut ctx = queue.thread_context();
    for i in 0..512u64 {
        queue.enqueue_with(&mut ctx, label(99, i), &oracle);
    }
    let barrier = Barrier::new(8);
    std::thread::scope(|s| {
        for tid in 0..8u64 {
            let queue = &queue;
            let oracle = &oracle;
            let barrier = &barrier;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(7, tid);
                let mut ctx = queue.thread_context();
                barrier.wait();
                for seq in 0..15_000u64 {
                    if rng.chance(0.5) {
                        queue.enqueue_with(&mut ctx, label(tid, seq), oracle);
                    } else {
                        let _ = queue.dequeue_with(&mut ctx, oracle);
                    }
                }
            });
        }
    });
    let summary = oracle.summary();
    assert!(summary.count > 0);
    assert!(
        summary.max <= queue.k_bound(),
        "rank error {} exceeded k = {}",
        summary.max,
        queue.k_bound()
    );
}

#[test]
fn deque_bound_under_four_sided_stress() {
    let cfg = StructureConfig::new(2, 2).unwrap();
    let deque = DecoupledDeque::new(cfg).unwrap();
    let oracle = SequenceOracle::new();
    let mut ctx = deque.thread_context();
    for i in 0..256u64 {
        deque.push_right_with(&mut ctx, label(99, i), &oracle);
    }
    let barrier = Barrier::new(4);
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let deque = &deque;
            let oracle = &oracle;
            let barrier = &barrier;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(21, tid);
                let mut ctx = deque.thread_context();
                barrier.wait();
                for seq in 0..10_000u64 {
                    match rng.below(4) {
                        0 => deque.push_right_with(&mut ctx, label(tid, seq), oracle),
                        1 => deque.push_left_with(&mut ctx, label(tid, seq), oracle),
                        2 => {
                            let _ = deque.pop_right_with(&mut ctx, oracle);
                        }
                        _ => {
                            let _ = deque.pop_left_with(&mut ctx, oracle);
                        }
                    }
                }
            });
        }
    });
    let summary = oracle.summary();
    assert!(summary.count > 0);
    assert!(
        summary.max <= deque.k_bound(),
        "rank error {} exceeded k = {}",
        summary.max,
        deque.k_bound()
    );
}

#[test]
fn counter_error_stays_within_bound() {
    let cfg = StructureConfig::new(3, 1).unwrap();
    let counter = CoupledCounter::new(cfg).unwrap();
    let oracle = CounterOracle::new();
    let barrier = Barrier::new(4);
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let counter = &counter;
            let oracle = &oracle;
            let barrier = &barrier;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(33, tid);
                let mut ctx = counter.thread_context();
                barrier.wait();
                for _ in 0..10_000 {
                    if rng.chance(0.7) {
                        counter.increment_with(&mut ctx, oracle);
                    } else {
                        counter.decrement_with(&mut ctx, oracle);
                    }
                }
            });
        }
    });
    let summary = oracle.summary();
    assert!(summary.count > 0);
    assert!(
        summary.max <= counter.k_bound(),
        "counter error {} exceeded k = {}",
        summary.max,
        counter.k_bound()
    );
    assert_eq!(counter.exact_total() as i64, oracle.twin_value());
}

#[test]
fn no_overshoot_under_unchanged_window_samples() {
    // No-overshoot: any count sampled while the window provably
    // did not change lies in [max - depth - shift_down, max + shift_up].
    let cfg = StructureConfig::with_shifts(4, 4, 2, 2).unwrap();
    let stack = CoupledStack::new(cfg).unwrap();
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let stack = &stack;
            let stop = &stop;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(5, tid);
                let mut ctx = stack.thread_context();
                let mut seq = 0;
                while !stop.load(Ordering::Relaxed) {
                    if rng.chance(0.55) {
                        stack.push(&mut ctx, label(tid, seq));
                        seq += 1;
                    } else {
                        let _ = stack.pop(&mut ctx);
                    }
                }
            });
        }
        let stack = &stack;
        let stop = &stop;
        s.spawn(move || {
            let mut valid_samples = 0;
            while valid_samples < 2_000 {
                let before = stack.window_state();
                let counts = stack.slot_states();
                let after = stack.window_state();
                if before == after {
                    valid_samples += 1;
                    let (max, _) = before;
                    let floor = max as i64 - 4 - 2; // depth + shift_down
                    let ceil = max as i64 + 2; // shift_up
                    for &(_, count, _) in &counts {
                        assert!(
                            count as i64 >= floor && count as i64 <= ceil,
                            "count {count} outside [{floor}, {ceil}] at max {max}"
                        );
                    }
                }
            }
            stop.store(true, Ordering::Relaxed);
        });
    });
}

#[test]
fn quiescent_containment_spans_two_windows() {
    // At quiescence there is an i with every count inside
    // [i*shift - depth, (i+1)*shift].
    let cfg = StructureConfig::with_shifts(5, 3, 1, 1).unwrap();
    let stack = CoupledStack::new(cfg).unwrap();
    std::thread::scope(|s| {
        for tid in 0..6u64 {
            let stack = &stack;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(17, tid);
                let mut ctx = stack.thread_context();
                for seq in 0..30_000u64 {
                    if rng.chance(0.6) {
                        stack.push(&mut ctx, label(tid, seq));
                    } else {
                        let _ = stack.pop(&mut ctx);
                    }
                }
            });
        }
    });
    let counts: Vec<i64> = stack
        .slot_states()
        .iter()
        .map(|&(_, c, _)| c as i64)
        .collect();
    let shift = 1i64;
    let depth = 3i64;
    let lo = *counts.iter().min().unwrap();
    let hi = *counts.iter().max().unwrap();
    let found = (lo - depth - 1..=hi + 1).any(|i| {
        counts
            .iter()
            .all(|&c| c >= i * shift - depth && c <= (i + 1) * shift)
    });
    assert!(found, "containment violated: counts {counts:?}");
}

#[test]
fn decoupled_state_sampling_finds_no_aba() {
    let cfg = StructureConfig::new(3, 2).unwrap();
    let stack = DecoupledStack::new(cfg).unwrap();
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let stack = &stack;
            let stop = &stop;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(29, tid);
                let mut ctx = stack.thread_context();
                let mut seq = 0;
                while !stop.load(Ordering::Relaxed) {
                    if rng.chance(0.5) {
                        stack.push(&mut ctx, label(tid, seq));
                        seq += 1;
                    } else {
                        let _ = stack.pop(&mut ctx);
                    }
                }
            });
        }
        let stack = &stack;
        let stop = &stop;
        s.spawn(move || {
            let mut prev = stack.slot_states();
            let mut prev_windows = stack.window_maxes();
            for _ in 0..30_000 {
                let cur = stack.slot_states();
                let windows = stack.window_maxes();
                assert!(windows.0 >= prev_windows.0 && windows.1 >= prev_windows.1);
                for (slot, (p, c)) in prev.iter().zip(cur.iter()).enumerate() {
                    assert!(
                        c.1 >= p.1 && c.2 >= p.2,
                        "slot {slot} counters decreased: {p:?} -> {c:?}"
                    );
                    if (c.1, c.2) == (p.1, p.2) {
                        assert_eq!(
                            c.0, p.0,
                            "slot {slot} item changed without a counter bump"
                        );
                    }
                }
                prev = cur;
                prev_windows = windows;
            }
            stop.store(true, Ordering::Relaxed);
        });
    });
}

#[test]
fn robin_stack_bound_under_stress() {
    // S-robin: k = (2 * threads - 1) * (width - 1).
    let threads = 2;
    let width = 3;
    let stack: RobinStack<u64> = RobinStack::new(width);
    let oracle = SequenceOracle::new();
    let mut ctx = stack.thread_context();
    for i in 0..600u64 {
        stack.push_with(&mut ctx, label(99, i), &oracle);
    }
    let barrier = Barrier::new(threads);
    std::thread::scope(|s| {
        for tid in 0..threads as u64 {
            let stack = &stack;
            let oracle = &oracle;
            let barrier = &barrier;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(41, tid);
                let mut ctx = stack.thread_context();
                barrier.wait();
                for seq in 0..20_000u64 {
                    if rng.chance(0.5) {
                        stack.push_with(&mut ctx, label(tid, seq), oracle);
                    } else {
                        let _ = stack.pop_with(&mut ctx, oracle);
                    }
                }
            });
        }
    });
    let summary = oracle.summary();
    let bound = relax2d::baselines::stack_k_bound(threads, width);
    assert!(summary.count > 0);
    assert!(
        summary.max <= bound,
        "round-robin error {} exceeded {}",
        summary.max,
        bound
    );
}

#[test]
fn exactness_reduction_at_width_one() {
    let cfg = StructureConfig::new(1, 1).unwrap();
    let stack = CoupledStack::new(cfg).unwrap();
    let oracle = SequenceOracle::new();
    let barrier = Barrier::new(4);
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let stack = &stack;
            let oracle = &oracle;
            let barrier = &barrier;
            s.spawn(move || {
                let mut rng = Rng64::from_seed(3, tid);
                let mut ctx = stack.thread_context();
                barrier.wait();
                for seq in 0..10_000u64 {
                    if rng.chance(0.5) {
                        stack.push_with(&mut ctx, label(tid, seq), oracle);
                    } else {
                        let _ = stack.pop_with(&mut ctx, oracle);
                    }
                }
            });
        }
    });
    let summary = oracle.summary();
    assert!(summary.count > 0);
    assert_eq!(summary.max, 0, "width 1 must behave exactly");
}

#[test]
fn conservation_trie_for_mixed_multiset_values() {
    // Duplicate values across threads: conservation must hold as multisets.
    let cfg = StructureConfig::new(4, 3).unwrap();
    let queue = DecoupledQueue::new(cfg).unwrap();
    std::thread::scope(|s| {
        for tid in 0..4u64 {
            let queue = &queue;
            s.spawn(move || {
                let mut ctx = queue.thread_context();
                for i in 0..2_000u64 {
                    queue.enqueue(&mut ctx, i % 17);
                    if tid % 2 == 0 {
                        let _ = queue.dequeue(&mut ctx);
                    }
                }
            });
        }
    });
    let mut ctx = queue.thread_context();
    let mut histogram: BTreeMap<u64, i64> = BTreeMap::new();
    while let Some(v) = queue.dequeue(&mut ctx) {
        *histogram.entry(v).or_default() += 1;
    }
    // Whatever remains is a sub-multiset of what was enqueued: every value
    // in 0..17, with non-negative count.
    assert!(histogram.keys().all(|&v| v < 17));
}
