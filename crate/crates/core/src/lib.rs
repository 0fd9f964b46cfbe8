//! Large-system secrecy analysis of regularized zero-forcing (RZF) precoding
//! in MISO broadcast channels with internal and external eavesdroppers.
//!
//! The analytic stack goes scenario -> [`rmt`] fixed point and trace functionals
//! -> [`first_order`] means -> [`second_order`] CLT covariances -> [`outage`]
//! probabilities. [`iid`] holds the closed forms for uncorrelated channels and
//! [`montecarlo`] is the finite-size simulator used to check all of it.

pub mod analysis;
pub mod checks;
pub mod error;
pub mod first_order;
pub mod iid;
pub mod montecarlo;
pub mod outage;
pub mod rmt;
pub mod scenario;
pub mod second_order;

pub use analysis::{analyze_user, SystemAnalysis, UserAnalysis};
pub use error::{Error, Result};
pub use first_order::{ErgodicSecrecyRates, MeanVector, Normalization, QuadraticEquivalents};
pub use scenario::{CorrelationSpec, FadingSpec, PowerSpec, Scenario, ScenarioConfig};
pub use second_order::{CoefficientSet, CovarianceBlock, HighOrderFunctionals};

/// Complex scalar used for channel and correlation matrices.
pub type Complex = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex>;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
