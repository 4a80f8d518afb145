//! Workload helpers shared by the criterion benchmarks.

use std::sync::Barrier;

/// Runs `threads` copies of `work` (worker index passed in) after a common
/// barrier and returns once all finish.
pub fn fan_out<F: Fn(usize) + Sync>(threads: usize, work: F) {
    let barrier = Barrier::new(threads);
    std::thread::scope(|s| {
        for t in 0..threads {
            let work = &work;
            let barrier = &barrier;
            s.spawn(move || {
                barrier.wait();
                work(t);
            });
        }
    });
}
