//! Benchmark harness for the TenonOS simulator.
//!
//! A [`BenchmarkSuite`] lists scenarios (generated workloads or scenario
//! files), the profile and deployment shape to run each one under, and which
//! bundled reference values each emitted metric sits next to. [`run_bench`]
//! executes the suite and returns a [`Report`]; [`run_boot`],
//! [`run_colocate`] and [`run_orchestrate`] back the other subcommands of
//! the `tenonos` binary.
//!
//! Reference values are comparison columns only. Simulated cycle counts come
//! from cost profiles and are never asserted equal to hardware numbers.

pub mod boot;
pub mod colocate;
pub mod orchestrate;
pub mod reference;
pub mod report;
pub mod run;
pub mod suite;

pub use boot::{run_boot, BootReport};
pub use colocate::{run_colocate, run_deployed, ColocateConfig, ColocateReport, NeighborConfig};
pub use orchestrate::{resolve_objective, run_orchestrate, OrchestrateOptions, OrchestrateOutcome, TreeSource};
pub use reference::{ReferenceData, ReferenceEntry};
pub use report::{Format, Report, ReportRow};
pub use run::{load_profile, run_bench, BenchOptions};
pub use suite::{BenchmarkSuite, Deploy, SuiteEntry, Workload};

use std::path::PathBuf;

use tenonos_core::SimError;
use tenonos_libgraph::GraphError;
use tenonos_mortise::MortiseError;
use tenonos_rt::RtError;
use thiserror::Error;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status when a scenario or pipeline stage fails at run time.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for unreadable or malformed input.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("suite: {0}")]
    SuiteParse(String),
    #[error("scenario `{name}`: {reason}")]
    ScenarioParse { name: String, reason: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("reference `{0}` is not in the reference data")]
    UnknownReference(String),
    #[error("scenario `{scenario}` asks for unknown metric `{metric}`")]
    UnknownMetric { scenario: String, metric: String },
    #[error("scenario `{scenario}` produced no value for `{metric}`")]
    MissingMetric { scenario: String, metric: String },
    #[error("scenario `{name}` failed: {source}")]
    Scenario {
        name: String,
        #[source]
        source: RtError,
    },
    #[error(transparent)]
    Mortise(#[from] MortiseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("report is empty (pass --allow-empty to write it anyway)")]
    EmptyReport,
    #[error("csv: {0}")]
    Csv(String),
    #[error("config: {0}")]
    Config(String),
}

impl From<SimError> for BenchError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnknownProfile(name) => BenchError::UnknownProfile(name),
            other => BenchError::Config(other.to_string()),
        }
    }
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Scenario { .. }
            | BenchError::MissingMetric { .. }
            | BenchError::Mortise(_)
            | BenchError::Graph(
                GraphError::ConstraintConflict(_)
                | GraphError::SearchBudget(_)
                | GraphError::InvalidSelection(_)
                | GraphError::SchemaViolation(_),
            ) => EXIT_FAILURE,
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }
}
