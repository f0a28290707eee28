//! Covariate-shift importance estimation and importance-weighted error
//! estimation.
//!
//! The pipeline: inject a controlled shift ([`inject`]), map covariates through
//! a φ-transform ([`phi`]), estimate importance weights ([`estimators`]),
//! weight cross-validated errors ([`evaluate`]), and compare methods by
//! Friedman rank ([`stats`]).

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluate;
pub mod inject;
pub mod kernels;
pub mod learners;
mod linalg;
pub mod phi;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod toy;

pub use data::{Dataset, DatasetManifest, ScalingRecord, Task};
pub use error::{Error, Result};
pub use estimators::{estimate, EnsembleAxis, EstimatorSpec, ImportanceVector, Method};
pub use evaluate::{EvalResult, ErrorEstimate, TrainBaseline};
pub use kernels::{KernelConfig, KernelFamily};
pub use learners::{LearnerConfig, LinearModel};
pub use phi::{PhiMapper, PhiMode};
pub use rng::RngStream;
pub use solver::SolverReport;
pub use stats::RankTable;
