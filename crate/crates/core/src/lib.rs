//! Lock-free data structures with two-dimensional out-of-order semantic
//! relaxation.
//!
//! A relaxed structure is `width` copies of an exact structure (Treiber
//! sub-stacks, MS sub-queues, doubly-linked sub-deques, sub-counters)
//! coordinated by a *window*: a global counter interval of height `depth`
//! that every sub-structure's operation counter must stay inside. Operations
//! stick to the slot of their last success while it stays valid, hop when it
//! does not, and shift the window when nothing is valid. The two dimensions
//! trade relaxation for throughput with a deterministic k-out-of-order
//! bound: each operation acts on one of the k+1 extremal items of the ideal
//! sequential structure, with k given per structure by [`k_bound`-style
//! functions](stack::CoupledStack::k_bound).
//!
//! The crate also ships exact and randomized baselines for comparison, a
//! rank-error measurement oracle, and an analytic/simulated model of the
//! window dynamics.

pub mod baselines;
pub mod config;
pub mod counter;
pub mod deque;
pub mod markov;
pub mod oracle;
pub mod queue;
mod rng;
pub mod stack;
pub mod window;

pub use config::{ConfigError, Progress, StructureConfig};
pub use counter::{CoupledCounter, DecoupledCounter};
pub use deque::DecoupledDeque;
pub use markov::{ChainModel, ChainVariant, ModelError, SimulationReport, StationaryVector};
pub use oracle::{
    summarize, CounterInstrument, CounterOracle, End, ErrorRecord, ErrorSummary, Instrument,
    SequenceOracle, Untracked,
};
pub use queue::DecoupledQueue;
pub use rng::Rng64;
pub use stack::{CoupledStack, DecoupledStack};
pub use window::{OpStats, ThreadContext};
