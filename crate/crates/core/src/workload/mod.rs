//! Mock-semester scenarios and the benchmark harness that runs them.
//!
//! [`generate_scenario`] turns a [`ScenarioSpec`] into an ordered list of
//! steps (pure, seeded); [`run_benchmark`] executes those steps on a fresh
//! engine and emits a [`BenchReport`] as JSON and CSV next to the ledger
//! dump.

mod bench;
mod pricing;
mod scenario;
mod stats;

pub use bench::{linearity_check, linearity_check_by, report_csv, run_benchmark, run_benchmark_with, BenchOptions, BenchReport, ModuleBreakdown, Timing};
pub use pricing::{estimate_storage, estimate_storage_with, price_gas, Cost, PricingConfig, StorageEstimate, SSTORE_NEW_GAS};
pub use scenario::{
    expected_tx_counts, generate_scenario, Fraction, RoleGrants, Scenario, ScenarioSpec, ScriptsPerExam, Step,
};
pub use stats::{linear_fit, LinearFit};

use crate::blob_store::BlobError;
use crate::engine::EngineError;
use crate::ledger::LedgerError;

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error("invalid pricing: {0}")]
    InvalidPricing(&'static str),
    #[error("linear fit needs at least 3 points over 2 distinct x values (got {points} points, {distinct_x} distinct)")]
    TooFewPoints { points: usize, distinct_x: usize },
    #[error("step {step}: {source}")]
    Engine { step: usize, source: EngineError },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
