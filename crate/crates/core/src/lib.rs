//! Performance models of configurable systems over discrete configuration
//! spaces, and four strategies for carrying such a model into a new
//! environment under a measurement budget:
//!
//! * `dm`: reuse the source model unchanged,
//! * `lms`: learn a linear map from source predictions to target measurements,
//! * `nlms`: learn that map with a random forest,
//! * `gs`: screen influential options on source data with stepwise
//!   regression and spend the target budget on them.
//!
//! The [`evaluation`] module runs strategy x learner x environment matrices
//! and reports mean absolute percentage error.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod space;
pub mod synthetic;
pub mod terms;
pub mod transfer;

pub use dataset::{EnvironmentId, MeasurementDataset, MeasurementRecord, Metric, Oracle};
pub use error::{Error, Result};
pub use learners::{LearnerKind, PerformanceModel};
pub use space::{Configuration, ConfigurationSpace, OptionSpec};
pub use terms::{Influence, Term};
