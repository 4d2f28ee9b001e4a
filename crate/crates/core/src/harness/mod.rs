//! Reproducible Monte Carlo experiments.
//!
//! Every replication draws its randomness from the stream
//! `FNV-1a(cell key # replication)` under the configured base seed, so
//! results depend neither on the number of worker threads nor on the order
//! of the grid cells. Replications run in parallel and are aggregated
//! sequentially in replication order.

mod config;
mod negbias;
mod runner;

pub use config::{fnv1a, ExperimentConfig, ExperimentKind, Regime, SimulatorChoice};
pub use negbias::{negbias_curve, NegBiasPoint, NEGBIAS_STEP};
pub use runner::{run_experiment, run_experiment_with_workers, AcfRow, ExperimentTable, McSummary};
