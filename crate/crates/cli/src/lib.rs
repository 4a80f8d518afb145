//! Experiment driver for the relaxed data structures: structure selection,
//! dimension derivation from a target bound, timed or op-budget worker
//! runs with optional accuracy measurement, and CSV emission. The `bench`
//! binary exposes it as `bench run` / `bench analyze`.

pub mod affinity;
pub mod csvio;
pub mod dims;
pub mod error;
pub mod ids;
pub mod runner;

pub use affinity::Affinity;
pub use csvio::{emit_csv, format_csv, parse_csv, read_csv, ResultRow, CSV_HEADER};
pub use dims::{derive_dimensions, realized_k_bound};
pub use error::BenchError;
pub use ids::StructureId;
pub use runner::{run, ExperimentConfig, Workload};
