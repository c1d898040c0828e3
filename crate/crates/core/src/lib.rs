//! Dynamic prediction of a terminal event from several intermediate events under
//! dependent censoring, using nested Archimedean copulas.
//!
//! Pipeline: [`marginal`] estimates the terminal law, the pairwise association of
//! every intermediate event with the terminal event, and copula-adjusted marginals;
//! [`likelihood`] estimates the association among intermediate events by a
//! pseudo-likelihood; [`prediction`] turns a fitted model and an event history into
//! a conditional survival curve; [`evaluation`] scores predictions; [`simulation`]
//! generates data from the model.

pub mod components;
pub mod config;
pub mod copula;
pub mod error;
pub mod evaluation;
pub mod fit;
pub mod io;
pub mod likelihood;
pub mod marginal;
mod optimize;
pub mod prediction;
pub mod record;
pub mod rng;
pub mod simulation;
pub mod survival;

pub use copula::{ArchimedeanCopula, Family};
pub use error::{CopulaError, DataError, EstimationError, PredictionError};
pub use fit::{fit_joint_model, FitSettings, FittedJointModel};
pub use record::{Dataset, ObservedRecord};
pub use survival::{kaplan_meier, StepSurvival};
