//! Experiment driver: spawns workers mixing puts and gets at a given rate
//! over one structure, prefills before timing, repeats and averages, and
//! audits conservation on op-budget runs.
//!
//! Workers share only the structure under test (plus the oracle in
//! measurement mode); every thread keeps its own context and statistics,
//! aggregated after all workers join.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use relax2d::baselines::{
    FaaCounter, MsQueue, RandomContext, RandomCounter, RandomQueue, RandomStack, RobinContext,
    RobinCounter, RobinQueue, RobinStack, TreiberStack,
};
use relax2d::{
    CounterInstrument, CounterOracle, CoupledCounter, CoupledStack, DecoupledCounter,
    DecoupledDeque, DecoupledQueue, DecoupledStack, ErrorSummary, Instrument, OpStats, Rng64,
    SequenceOracle, StructureConfig, ThreadContext, Untracked,
};

use crate::affinity::{pin_current, Affinity};
use crate::csvio::ResultRow;
use crate::dims::{derive_dimensions, realized_k_bound};
use crate::error::BenchError;
use crate::ids::StructureId;

/// How long each repeat runs: wall-clock seconds or a fixed per-thread
/// operation budget (the deterministic mode used by the acceptance suite).
#[derive(Clone, Copy, Debug)]
pub enum Workload {
    DurationSecs(f64),
    OpsPerThread(u64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub structure: StructureId,
    pub threads: usize,
    pub width: Option<usize>,
    pub depth: Option<u64>,
    pub shift_up: Option<u64>,
    pub shift_down: Option<u64>,
    /// Derive width/depth from this bound via the multiplier schedule when
    /// no explicit dimensions are given.
    pub target_k: Option<u64>,
    pub put_rate: f64,
    pub workload: Workload,
    pub repeats: usize,
    pub prefill: u64,
    pub seed: u64,
    pub measure: bool,
    pub affinity: Affinity,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 1-second runs, 3 repeats, 2^17 prefill.
    pub fn new(structure: StructureId, threads: usize) -> Self {
        ExperimentConfig {
            structure,
            threads,
            width: None,
            depth: None,
            shift_up: None,
            shift_down: None,
            target_k: None,
            put_rate: 0.5,
            workload: Workload::DurationSecs(1.0),
            repeats: 3,
            prefill: 1 << 17,
            seed: 1,
            measure: false,
            affinity: Affinity::None,
        }
    }
}

struct Resolved {
    structure: StructureId,
    threads: usize,
    width: usize,
    depth: u64,
    shift_up: u64,
    shift_down: u64,
    k_bound: Option<u64>,
    put_rate: f64,
    workload: Workload,
    prefill: u64,
    seed: u64,
    measure: bool,
    affinity: Affinity,
    /// Conservation audits need complete label books; only feasible with an
    /// op budget.
    audit: bool,
}

impl Resolved {
    fn windowed_config(&self) -> Result<StructureConfig, BenchError> {
        Ok(StructureConfig::with_shifts(
            self.width,
            self.depth,
            self.shift_up,
            self.shift_down,
        )?)
    }
}

fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, BenchError> {
    if cfg.threads == 0 {
        return Err(BenchError::InvalidConfig("threads must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.put_rate) {
        return Err(BenchError::InvalidConfig(format!(
            "put rate {} outside [0, 1]",
            cfg.put_rate
        )));
    }
    if cfg.repeats == 0 {
        return Err(BenchError::InvalidConfig("repeats must be >= 1".into()));
    }
    if let Workload::DurationSecs(s) = cfg.workload {
        if s.is_nan() || s <= 0.0 {
            return Err(BenchError::InvalidConfig("duration must be positive".into()));
        }
    }

    let (mut width, mut depth) = match (cfg.width, cfg.target_k) {
        (Some(w), _) => (w, cfg.depth.unwrap_or(1)),
        (None, Some(k)) => derive_dimensions(cfg.structure, k, cfg.threads),
        (None, None) => derive_dimensions(cfg.structure, 0, cfg.threads),
    };
    if let Some(d) = cfg.depth {
        depth = d;
    }
    if cfg.structure.is_windowed() {
        depth = depth.max(1);
    }
    width = width.max(1);

    let shift_up = cfg.shift_up.unwrap_or((depth / 2).max(1));
    let shift_down = cfg.shift_down.unwrap_or((depth / 2).max(1));
    let k_bound = realized_k_bound(
        cfg.structure,
        width,
        depth,
        shift_up,
        shift_down,
        cfg.threads,
    );
    if let (Some(target), Some(real)) = (cfg.target_k, k_bound) {
        if real > target {
            return Err(BenchError::InvalidConfig(format!(
                "dimensions ({width}, {depth}) realize k = {real} > target {target}"
            )));
        }
    }

    Ok(Resolved {
        structure: cfg.structure,
        threads: cfg.threads,
        width,
        depth,
        shift_up,
        shift_down,
        k_bound,
        put_rate: cfg.put_rate,
        workload: cfg.workload,
        prefill: cfg.prefill,
        seed: cfg.seed,
        measure: cfg.measure,
        affinity: cfg.affinity,
        audit: matches!(cfg.workload, Workload::OpsPerThread(_)),
    })
}

/// Unique operation label: worker id in the high bits (0 = prefill).
fn label(worker: u64, seq: u64) -> u64 {
    (worker << 40) | seq
}

/// Uniform put/get surface the workers drive.
trait SeqDriver: Sync + Sized {
    type Ctx: Send;
    fn new_ctx(&self, worker: u64) -> Self::Ctx;
    fn put<I: Instrument<u64>>(&self, ctx: &mut Self::Ctx, value: u64, instr: &I);
    fn get<I: Instrument<u64>>(&self, ctx: &mut Self::Ctx, instr: &I) -> Option<u64>;
    fn stats(&self, _ctx: &Self::Ctx) -> OpStats {
        OpStats::default()
    }
}

impl SeqDriver for CoupledStack<u64> {
    type Ctx = ThreadContext;
    fn new_ctx(&self, _worker: u64) -> ThreadContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, value: u64, instr: &I) {
        self.push_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<u64> {
        self.pop_with(ctx, instr)
    }
    fn stats(&self, ctx: &ThreadContext) -> OpStats {
        ctx.stats
    }
}

impl SeqDriver for DecoupledStack<u64> {
    type Ctx = ThreadContext;
    fn new_ctx(&self, _worker: u64) -> ThreadContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, value: u64, instr: &I) {
        self.push_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<u64> {
        self.pop_with(ctx, instr)
    }
    fn stats(&self, ctx: &ThreadContext) -> OpStats {
        ctx.stats
    }
}

impl SeqDriver for DecoupledQueue<u64> {
    type Ctx = ThreadContext;
    fn new_ctx(&self, _worker: u64) -> ThreadContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, value: u64, instr: &I) {
        self.enqueue_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut ThreadContext, instr: &I) -> Option<u64> {
        self.dequeue_with(ctx, instr)
    }
    fn stats(&self, ctx: &ThreadContext) -> OpStats {
        ctx.stats
    }
}

/// The deque is driven with all four operation types: every put/get picks
/// a side at random.
struct DequeDriver(DecoupledDeque<u64>);

impl SeqDriver for DequeDriver {
    type Ctx = (ThreadContext, Rng64);
    fn new_ctx(&self, worker: u64) -> Self::Ctx {
        (self.0.thread_context(), Rng64::from_seed(0xD0_0E, worker))
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut Self::Ctx, value: u64, instr: &I) {
        if ctx.1.chance(0.5) {
            self.0.push_right_with(&mut ctx.0, value, instr)
        } else {
            self.0.push_left_with(&mut ctx.0, value, instr)
        }
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut Self::Ctx, instr: &I) -> Option<u64> {
        if ctx.1.chance(0.5) {
            self.0.pop_right_with(&mut ctx.0, instr)
        } else {
            self.0.pop_left_with(&mut ctx.0, instr)
        }
    }
    fn stats(&self, ctx: &Self::Ctx) -> OpStats {
        ctx.0.stats
    }
}

impl SeqDriver for TreiberStack<u64> {
    type Ctx = ();
    fn new_ctx(&self, _worker: u64) {}
    fn put<I: Instrument<u64>>(&self, _: &mut (), value: u64, instr: &I) {
        self.push_with(value, instr)
    }
    fn get<I: Instrument<u64>>(&self, _: &mut (), instr: &I) -> Option<u64> {
        self.pop_with(instr)
    }
}

impl SeqDriver for MsQueue<u64> {
    type Ctx = ();
    fn new_ctx(&self, _worker: u64) {}
    fn put<I: Instrument<u64>>(&self, _: &mut (), value: u64, instr: &I) {
        self.enqueue_with(value, instr)
    }
    fn get<I: Instrument<u64>>(&self, _: &mut (), instr: &I) -> Option<u64> {
        self.dequeue_with(instr)
    }
}

impl SeqDriver for RandomStack<u64> {
    type Ctx = RandomContext;
    fn new_ctx(&self, _worker: u64) -> RandomContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut RandomContext, value: u64, instr: &I) {
        self.push_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut RandomContext, instr: &I) -> Option<u64> {
        self.pop_with(ctx, instr)
    }
}

impl SeqDriver for RandomQueue<u64> {
    type Ctx = RandomContext;
    fn new_ctx(&self, _worker: u64) -> RandomContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut RandomContext, value: u64, instr: &I) {
        self.enqueue_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut RandomContext, instr: &I) -> Option<u64> {
        self.dequeue_with(ctx, instr)
    }
}

impl SeqDriver for RobinStack<u64> {
    type Ctx = RobinContext;
    fn new_ctx(&self, _worker: u64) -> RobinContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut RobinContext, value: u64, instr: &I) {
        self.push_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut RobinContext, instr: &I) -> Option<u64> {
        self.pop_with(ctx, instr)
    }
}

impl SeqDriver for RobinQueue<u64> {
    type Ctx = RobinContext;
    fn new_ctx(&self, _worker: u64) -> RobinContext {
        self.thread_context()
    }
    fn put<I: Instrument<u64>>(&self, ctx: &mut RobinContext, value: u64, instr: &I) {
        self.enqueue_with(ctx, value, instr)
    }
    fn get<I: Instrument<u64>>(&self, ctx: &mut RobinContext, instr: &I) -> Option<u64> {
        self.dequeue_with(ctx, instr)
    }
}

/// Increment/decrement surface for counter structures.
trait CounterDriver: Sync + Sized {
    type Ctx: Send;
    fn new_ctx(&self, worker: u64) -> Self::Ctx;
    fn inc<I: CounterInstrument>(&self, ctx: &mut Self::Ctx, instr: &I) -> u64;
    fn dec<I: CounterInstrument>(&self, ctx: &mut Self::Ctx, instr: &I) -> u64;
    fn total(&self) -> i64;
    fn stats(&self, _ctx: &Self::Ctx) -> OpStats {
        OpStats::default()
    }
}

impl CounterDriver for CoupledCounter {
    type Ctx = ThreadContext;
    fn new_ctx(&self, _worker: u64) -> ThreadContext {
        self.thread_context()
    }
    fn inc<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        self.increment_with(ctx, instr)
    }
    fn dec<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        self.decrement_with(ctx, instr)
    }
    fn total(&self) -> i64 {
        self.exact_total() as i64
    }
    fn stats(&self, ctx: &ThreadContext) -> OpStats {
        ctx.stats
    }
}

impl CounterDriver for DecoupledCounter {
    type Ctx = ThreadContext;
    fn new_ctx(&self, _worker: u64) -> ThreadContext {
        self.thread_context()
    }
    fn inc<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        self.increment_with(ctx, instr)
    }
    fn dec<I: CounterInstrument>(&self, ctx: &mut ThreadContext, instr: &I) -> u64 {
        self.decrement_with(ctx, instr)
    }
    fn total(&self) -> i64 {
        self.exact_total() as i64
    }
    fn stats(&self, ctx: &ThreadContext) -> OpStats {
        ctx.stats
    }
}

impl CounterDriver for FaaCounter {
    type Ctx = ();
    fn new_ctx(&self, _worker: u64) {}
    fn inc<I: CounterInstrument>(&self, _: &mut (), instr: &I) -> u64 {
        instr
            .apply(1, || Some(self.add(1) as u64))
            .expect("faa increments always apply")
    }
    fn dec<I: CounterInstrument>(&self, _: &mut (), instr: &I) -> u64 {
        instr
            .apply(-1, || self.decrement_nonneg().map(|v| v as u64))
            .unwrap_or(0)
    }
    fn total(&self) -> i64 {
        self.value()
    }
}

impl CounterDriver for RandomCounter {
    type Ctx = RandomContext;
    fn new_ctx(&self, _worker: u64) -> RandomContext {
        self.thread_context()
    }
    fn inc<I: CounterInstrument>(&self, ctx: &mut RandomContext, instr: &I) -> u64 {
        self.increment_with(ctx, instr)
    }
    fn dec<I: CounterInstrument>(&self, ctx: &mut RandomContext, instr: &I) -> u64 {
        self.decrement_with(ctx, instr)
    }
    fn total(&self) -> i64 {
        self.exact_total() as i64
    }
}

impl CounterDriver for RobinCounter {
    type Ctx = RobinContext;
    fn new_ctx(&self, _worker: u64) -> RobinContext {
        self.thread_context()
    }
    fn inc<I: CounterInstrument>(&self, ctx: &mut RobinContext, instr: &I) -> u64 {
        self.increment_with(ctx, instr)
    }
    fn dec<I: CounterInstrument>(&self, ctx: &mut RobinContext, instr: &I) -> u64 {
        self.decrement_with(ctx, instr)
    }
    fn total(&self) -> i64 {
        self.exact_total() as i64
    }
}

struct RepeatOutcome {
    ops: u64,
    elapsed: f64,
    stats: OpStats,
    summary: Option<ErrorSummary>,
}

fn seq_repeat<D: SeqDriver>(driver: D, r: &Resolved, rep_seed: u64) -> Result<RepeatOutcome, BenchError> {
    if r.measure {
        let oracle = SequenceOracle::new();
        seq_repeat_inner(&driver, &oracle, Some(&oracle), r, rep_seed)
    } else {
        seq_repeat_inner(&driver, &Untracked, None, r, rep_seed)
    }
}

fn seq_repeat_inner<D: SeqDriver, I: Instrument<u64>>(
    driver: &D,
    instr: &I,
    oracle: Option<&SequenceOracle<u64>>,
    r: &Resolved,
    rep_seed: u64,
) -> Result<RepeatOutcome, BenchError> {
    // Prefill outside the timed region, worker id 0.
    let mut prefill_ctx = driver.new_ctx(0);
    let mut book_pushed: Vec<u64> = Vec::new();
    for i in 0..r.prefill {
        let v = label(0, i);
        driver.put(&mut prefill_ctx, v, instr);
        if r.audit {
            book_pushed.push(v);
        }
    }

    let stop = AtomicBool::new(false);
    let barrier = Barrier::new(r.threads + 1);
    let (ops, elapsed, stats, mut pushed, mut popped) = std::thread::scope(|s| {
        let handles: Vec<_> = (0..r.threads)
            .map(|w| {
                let driver = &driver;
                let stop = &stop;
                let barrier = &barrier;
                s.spawn(move || {
                    pin_current(r.affinity, w, r.threads);
                    let worker = w as u64 + 1;
                    let mut ctx = driver.new_ctx(worker);
                    let mut rng = Rng64::from_seed(rep_seed, worker);
                    let mut pushed = Vec::new();
                    let mut popped = Vec::new();
                    let mut ops = 0u64;
                    let mut seq = 0u64;
                    barrier.wait();
                    let start = Instant::now();
                    loop {
                        match r.workload {
                            Workload::OpsPerThread(budget) => {
                                if ops >= budget {
                                    break;
                                }
                            }
                            Workload::DurationSecs(_) => {
                                if stop.load(Ordering::Relaxed) {
                                    break;
                                }
                            }
                        }
                        if rng.chance(r.put_rate) {
                            let v = label(worker, seq);
                            seq += 1;
                            driver.put(&mut ctx, v, instr);
                            if r.audit {
                                pushed.push(v);
                            }
                        } else if let Some(v) = driver.get(&mut ctx, instr) {
                            if r.audit {
                                popped.push(v);
                            }
                        }
                        ops += 1;
                    }
                    (
                        ops,
                        start.elapsed(),
                        driver.stats(&ctx),
                        pushed,
                        popped,
                    )
                })
            })
            .collect();
        barrier.wait();
        if let Workload::DurationSecs(secs) = r.workload {
            std::thread::sleep(Duration::from_secs_f64(secs));
            stop.store(true, Ordering::Relaxed);
        }
        let mut total_ops = 0;
        let mut max_elapsed = Duration::ZERO;
        let mut stats = OpStats::default();
        let mut pushed = Vec::new();
        let mut popped = Vec::new();
        for h in handles {
            let (ops, elapsed, st, pu, po) = h.join().expect("worker panicked");
            total_ops += ops;
            max_elapsed = max_elapsed.max(elapsed);
            stats.merge(&st);
            pushed.extend(pu);
            popped.extend(po);
        }
        (total_ops, max_elapsed.as_secs_f64(), stats, pushed, popped)
    });

    let summary = oracle.map(|o| o.summary());

    if r.audit {
        // Drain at quiescence and check multiset conservation:
        // prefill + pushed == popped + remaining.
        let mut drain_ctx = driver.new_ctx(u64::MAX >> 42);
        let mut remaining = Vec::new();
        while let Some(v) = driver.get(&mut drain_ctx, &Untracked) {
            remaining.push(v);
        }
        if let Some(o) = oracle {
            let mut shadow = o.remaining();
            shadow.sort_unstable();
            let mut drained = remaining.clone();
            drained.sort_unstable();
            if shadow != drained {
                return Err(BenchError::Conservation(format!(
                    "shadow holds {} labels, structure {}",
                    shadow.len(),
                    drained.len()
                )));
            }
        }
        pushed.extend(book_pushed);
        popped.extend(remaining);
        pushed.sort_unstable();
        popped.sort_unstable();
        if pushed != popped {
            return Err(BenchError::Conservation(format!(
                "inserted {} items, accounted for {}",
                pushed.len(),
                popped.len()
            )));
        }
    }

    Ok(RepeatOutcome {
        ops,
        elapsed,
        stats,
        summary,
    })
}

fn counter_repeat<D: CounterDriver>(
    driver: D,
    r: &Resolved,
    rep_seed: u64,
) -> Result<RepeatOutcome, BenchError> {
    if r.measure {
        let oracle = CounterOracle::new();
        counter_repeat_inner(&driver, &oracle, Some(&oracle), r, rep_seed)
    } else {
        counter_repeat_inner(&driver, &Untracked, None, r, rep_seed)
    }
}

fn counter_repeat_inner<D: CounterDriver, I: CounterInstrument>(
    driver: &D,
    instr: &I,
    oracle: Option<&CounterOracle>,
    r: &Resolved,
    rep_seed: u64,
) -> Result<RepeatOutcome, BenchError> {
    let mut prefill_ctx = driver.new_ctx(0);
    for _ in 0..r.prefill {
        driver.inc(&mut prefill_ctx, instr);
    }

    let stop = AtomicBool::new(false);
    let barrier = Barrier::new(r.threads + 1);
    let (ops, elapsed, stats) = std::thread::scope(|s| {
        let handles: Vec<_> = (0..r.threads)
            .map(|w| {
                let driver = &driver;
                let stop = &stop;
                let barrier = &barrier;
                s.spawn(move || {
                    pin_current(r.affinity, w, r.threads);
                    let worker = w as u64 + 1;
                    let mut ctx = driver.new_ctx(worker);
                    let mut rng = Rng64::from_seed(rep_seed, worker);
                    let mut ops = 0u64;
                    barrier.wait();
                    let start = Instant::now();
                    loop {
                        match r.workload {
                            Workload::OpsPerThread(budget) => {
                                if ops >= budget {
                                    break;
                                }
                            }
                            Workload::DurationSecs(_) => {
                                if stop.load(Ordering::Relaxed) {
                                    break;
                                }
                            }
                        }
                        if rng.chance(r.put_rate) {
                            driver.inc(&mut ctx, instr);
                        } else {
                            driver.dec(&mut ctx, instr);
                        }
                        ops += 1;
                    }
                    (ops, start.elapsed(), driver.stats(&ctx))
                })
            })
            .collect();
        barrier.wait();
        if let Workload::DurationSecs(secs) = r.workload {
            std::thread::sleep(Duration::from_secs_f64(secs));
            stop.store(true, Ordering::Relaxed);
        }
        let mut total_ops = 0;
        let mut max_elapsed = Duration::ZERO;
        let mut stats = OpStats::default();
        for h in handles {
            let (ops, elapsed, st) = h.join().expect("worker panicked");
            total_ops += ops;
            max_elapsed = max_elapsed.max(elapsed);
            stats.merge(&st);
        }
        (total_ops, max_elapsed.as_secs_f64(), stats)
    });

    let summary = oracle.map(|o| o.summary());
    if let Some(o) = oracle {
        // The twin counted every linearized update; at quiescence it must
        // equal the structure's exact total.
        if o.twin_value() != driver.total() {
            return Err(BenchError::Conservation(format!(
                "twin {} != exact total {}",
                o.twin_value(),
                driver.total()
            )));
        }
    }

    Ok(RepeatOutcome {
        ops,
        elapsed,
        stats,
        summary,
    })
}

fn repeat_once(r: &Resolved, rep: u64) -> Result<RepeatOutcome, BenchError> {
    let seed = r
        .seed
        .wrapping_add(rep.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    match r.structure {
        StructureId::StackCoupled => {
            seq_repeat(CoupledStack::with_seed(r.windowed_config()?, seed)?, r, seed)
        }
        StructureId::StackDecoupled => {
            seq_repeat(DecoupledStack::with_seed(r.windowed_config()?, seed)?, r, seed)
        }
        StructureId::QueueDecoupled => {
            seq_repeat(DecoupledQueue::with_seed(r.windowed_config()?, seed)?, r, seed)
        }
        StructureId::DequeDecoupled => seq_repeat(
            DequeDriver(DecoupledDeque::with_seed(r.windowed_config()?, seed)?),
            r,
            seed,
        ),
        StructureId::CounterCoupled => {
            counter_repeat(CoupledCounter::with_seed(r.windowed_config()?, seed)?, r, seed)
        }
        StructureId::CounterDecoupled => {
            counter_repeat(DecoupledCounter::with_seed(r.windowed_config()?, seed)?, r, seed)
        }
        StructureId::Treiber => seq_repeat(TreiberStack::<u64>::new(), r, seed),
        StructureId::MsQueue => seq_repeat(MsQueue::<u64>::new(), r, seed),
        StructureId::Faa => counter_repeat(FaaCounter::new(), r, seed),
        StructureId::StackRandom => seq_repeat(RandomStack::new(r.width, seed), r, seed),
        StructureId::StackRandomC2 => seq_repeat(RandomStack::new_c2(r.width, seed), r, seed),
        StructureId::QueueRandom => seq_repeat(RandomQueue::new(r.width, seed), r, seed),
        StructureId::QueueRandomC2 => seq_repeat(RandomQueue::new_c2(r.width, seed), r, seed),
        StructureId::CounterRandom => counter_repeat(RandomCounter::new(r.width, seed), r, seed),
        StructureId::CounterRandomC2 => {
            counter_repeat(RandomCounter::new_c2(r.width, seed), r, seed)
        }
        StructureId::StackRobin => seq_repeat(RobinStack::new(r.width), r, seed),
        StructureId::QueueRobin => seq_repeat(RobinQueue::new(r.width), r, seed),
        StructureId::CounterRobin => counter_repeat(RobinCounter::new(r.width), r, seed),
    }
}

/// Runs the experiment: `repeats` independent runs on fresh structures,
/// averaged into one result row. In measurement mode the row additionally
/// carries the oracle's error summary, and any configuration with a defined
/// bound is checked against it (a violation is an internal error).
pub fn run(cfg: &ExperimentConfig) -> Result<ResultRow, BenchError> {
    let r = resolve(cfg)?;
    let mut ops_per_sec = 0.0;
    let mut stats = OpStats::default();
    let mut error_count = 0u64;
    let mut error_sum = 0.0;
    let mut error_max: Option<u64> = None;

    for rep in 0..cfg.repeats {
        let outcome = repeat_once(&r, rep as u64)?;
        ops_per_sec += outcome.ops as f64 / outcome.elapsed.max(1e-9) / cfg.repeats as f64;
        stats.merge(&outcome.stats);
        if let Some(summary) = outcome.summary {
            error_sum += summary.mean * summary.count as f64;
            error_count += summary.count;
            error_max = Some(error_max.unwrap_or(0).max(summary.max));
        }
    }

    let mean_error = if error_count > 0 {
        Some(error_sum / error_count as f64)
    } else if r.measure {
        Some(0.0)
    } else {
        None
    };
    let max_error = if r.measure {
        Some(error_max.unwrap_or(0))
    } else {
        None
    };

    if let (Some(k), Some(max)) = (r.k_bound, max_error) {
        if max > k {
            return Err(BenchError::Conservation(format!(
                "observed error {max} above the structure's bound {k}"
            )));
        }
    }

    Ok(ResultRow {
        structure: r.structure.as_str().to_string(),
        threads: r.threads as u64,
        width: r.width as u64,
        depth: if r.structure.is_windowed() { r.depth } else { 0 },
        shift_up: if r.structure.is_windowed() { r.shift_up } else { 0 },
        shift_down: if r.structure.is_windowed() { r.shift_down } else { 0 },
        k_bound: r.k_bound,
        put_rate: r.put_rate,
        prefill: r.prefill,
        ops_per_sec,
        hops_per_op: stats.hops_per_op(),
        shifts_per_op: stats.shifts_per_op(),
        mean_error,
        max_error,
        seed: r.seed,
    }
    .quantized())
}
