//! Property tests: the shadow oracle against a naive sequential model,
//! summary arithmetic, and single-threaded structure invariants over
//! arbitrary operation mixes.

use proptest::prelude::*;
use relax2d::{
    summarize, DecoupledStack, End, ErrorRecord, Instrument, SequenceOracle, StructureConfig,
};

#[derive(Clone, Debug)]
enum ShadowOp {
    Insert(bool),     // front?
    Remove(bool, u8), // from front? which existing element (index seed)
}

fn shadow_ops() -> impl Strategy<Value = Vec<ShadowOp>> {
    prop::collection::vec(
        prop_oneof![
            any::<bool>().prop_map(ShadowOp::Insert),
            (any::<bool>(), any::<u8>()).prop_map(|(e, t)| ShadowOp::Remove(e, t)),
        ],
        1..120,
    )
}

proptest! {
    /// The oracle's rank for every removal equals the distance from the
    /// queried end in a plain Vec model of the same history.
    #[test]
    fn oracle_ranks_match_naive_model(ops in shadow_ops()) {
        let oracle = SequenceOracle::<u64>::new();
        let mut model: Vec<u64> = Vec::new(); // front at index 0
        let mut expected_ranks = Vec::new();
        let mut next_label = 0u64;
        for op in ops {
            match op {
                ShadowOp::Insert(front) => {
                    let label = next_label;
                    next_label += 1;
                    let end = if front { End::Front } else { End::Back };
                    prop_assert!(oracle.insert(&label, end, || true));
                    if front {
                        model.insert(0, label);
                    } else {
                        model.push(label);
                    }
                }
                ShadowOp::Remove(front, pick) => {
                    if model.is_empty() {
                        continue;
                    }
                    let idx = pick as usize % model.len();
                    let label = model.remove(idx);
                    let end = if front { End::Front } else { End::Back };
                    let rank = if front {
                        idx as u64
                    } else {
                        (model.len() - idx) as u64
                    };
                    expected_ranks.push(rank);
                    prop_assert_eq!(oracle.remove(end, || Some(label)), Some(label));
                }
            }
        }
        let got: Vec<u64> = oracle.records().iter().map(|r| r.rank).collect();
        prop_assert_eq!(got, expected_ranks);
        let mut remaining = oracle.remaining();
        remaining.sort_unstable();
        let mut model_sorted = model;
        model_sorted.sort_unstable();
        prop_assert_eq!(remaining, model_sorted);
    }

    /// summarize agrees with first-principles arithmetic.
    #[test]
    fn summary_matches_naive(ranks in prop::collection::vec(0u64..1000, 0..50)) {
        let records: Vec<ErrorRecord> = ranks
            .iter()
            .enumerate()
            .map(|(op, &rank)| ErrorRecord { op: op as u64, rank })
            .collect();
        let s = summarize(&records);
        prop_assert_eq!(s.count, ranks.len() as u64);
        if ranks.is_empty() {
            prop_assert_eq!(s.mean, 0.0);
            prop_assert_eq!(s.max, 0);
        } else {
            prop_assert_eq!(s.max, *ranks.iter().max().unwrap());
            let mean = ranks.iter().sum::<u64>() as f64 / ranks.len() as f64;
            prop_assert!((s.mean - mean).abs() < 1e-9);
        }
    }

    /// Single-threaded decoupled stack: counters monotone, pops never
    /// exceed pushes, conservation holds for any operation mix.
    #[test]
    fn decoupled_stack_invariants_hold(
        width in 1usize..5,
        depth in 1u64..5,
        ops in prop::collection::vec(any::<bool>(), 1..200),
    ) {
        let cfg = StructureConfig::new(width, depth).unwrap();
        let stack = DecoupledStack::new(cfg).unwrap();
        let mut ctx = stack.thread_context();
        let mut pushed = Vec::new();
        let mut popped = Vec::new();
        let mut prev = stack.slot_states();
        for (i, &is_push) in ops.iter().enumerate() {
            if is_push {
                stack.push(&mut ctx, i as u64);
                pushed.push(i as u64);
            } else if let Some(v) = stack.pop(&mut ctx) {
                popped.push(v);
            }
            let cur = stack.slot_states();
            for (p, c) in prev.iter().zip(cur.iter()) {
                prop_assert!(c.1 >= p.1 && c.2 >= p.2);
                prop_assert!(c.2 <= c.1);
            }
            prev = cur;
        }
        while let Some(v) = stack.pop(&mut ctx) {
            popped.push(v);
        }
        pushed.sort_unstable();
        popped.sort_unstable();
        prop_assert_eq!(pushed, popped);
    }
}
