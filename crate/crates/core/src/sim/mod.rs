//! Seeded Monte Carlo comparison of estimators.

mod builtin;
mod config;
mod run;
mod summary;

pub use builtin::{builtin, builtin_names};
pub use config::{ModelTemplate, SimulationConfig};
pub use run::{replicate_rng, run_simulation, run_simulation_with_threads, THREADS_ENV};
pub use summary::{
    median, summarize, ComponentSample, MethodTotals, Metrics, SimulationSummary, SummaryRow,
};
