//! Regularized heteroskedastic ordered probit (HETOP) estimation for
//! assessing differential item functioning of a single ordinal item across
//! many groups.

pub mod dif;
pub mod error;
pub mod estimator;
pub mod icc;
pub mod likelihood;
pub mod model;
pub mod normal;
pub mod optim;
pub mod penalty;
pub mod simulate;

pub use dif::{DifClass, DifReport, DifThresholds, PathDifReport};
pub use error::{HetopError, Result};
pub use estimator::{FitConfig, FitResult, PathResult, StandardErrors};
pub use model::{CategoryCountTable, Constraint, EmptyCellPolicy, FreeParameterVector, GroupParams, IdentificationScheme};
pub use penalty::{PenaltyKind, PenaltySpec};
