//! Discrete-event simulation of the request-to-order procurement process.
//!
//! A fleet of vessels raises purchase requisitions for spare parts. Each
//! requisition is handled, optionally sent out for spot quotes, and turned
//! into purchase orders by an allocation policy that trades off contract
//! prices, spot prices and a per-order overhead. Replications are keyed
//! random streams, so batches are reproducible at any parallelism.
//!
//! ```
//! use rto_sim_core::{presets, run_batch, summarize_batch, RunOptions};
//!
//! let scenario = presets::reference_scenario();
//! let batch = run_batch(&scenario, 8, 42, 2, &RunOptions::default()).unwrap();
//! let summary = summarize_batch(&batch.runs, &scenario, 10);
//! assert_eq!(summary[0].0, "terminal_cost");
//! ```

pub mod demand;
pub mod domain;
pub mod engine;
pub mod hazards;
pub mod market;
pub mod metrics;
pub mod policy;
pub mod presets;

pub use domain::*;
pub use engine::{
    audit_log, run_batch, run_once, run_once_with, AuditViolation, BatchError, BatchResult, DelayConfig, DelaySampling,
    DemandSource, EngineConfig, EngineError, RunOptions,
};
pub use hazards::{Baseline, HazardSpec, PeriodicCovariate};
pub use market::{CompetitionBasis, ContractTerms, Quote, SpotModel, SpotPrice};
pub use metrics::{summarize_batch, Histogram, RunResult, Summary, SupplierCompliance};
pub use policy::{allocate_min_cost, Allocation, Assignment, PolicyConfig, PolicyKind, Provenance};
