//! Local times of transient random walks on Z^d.
//!
//! The crate simulates finite-support walks and their local-time fields,
//! computes escape and return probabilities by dynamic programming, series
//! and Monte Carlo, evaluates the closed-form limit predictions for the
//! local-time functionals, and checks all of them against an exact
//! path-enumeration oracle.

pub mod error;
pub mod gamma;
pub mod harness;
pub mod mass;
pub mod oracle;
pub mod path;
pub mod pmf;
pub mod seed;
pub mod steps;
pub mod theory;

pub use error::{Error, Result};
pub use gamma::{GammaEstimate, GammaMethod, ReturnLaw};
pub use mass::Mass;
pub use path::{CheckpointSeries, LocalTimeField, QHistogram};
pub use pmf::PmfField;
pub use steps::{LatticePoint, LawSpec, StepLaw};
pub use theory::Prediction;
