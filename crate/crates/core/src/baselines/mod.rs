//! Comparison structures: exact single-instance designs (Treiber stack,
//! MS queue, fetch-and-add counter) and the Random / Random-C2 /
//! Round-Robin multi-instance relaxation schemes built from them.

mod exact;
mod random;
mod robin;

pub use exact::{FaaCounter, MsQueue, Raced, SubCounter, TreiberStack};
pub use random::{RandomContext, RandomCounter, RandomQueue, RandomStack};
pub use robin::{stack_k_bound, RobinContext, RobinCounter, RobinQueue, RobinStack};
