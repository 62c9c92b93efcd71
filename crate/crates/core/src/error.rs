use thiserror::Error;

use crate::steps::LatticePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a probability law: {0}")]
    NotAProbability(String),
    #[error("support spans rank {rank} but the walk lives in d = {d}")]
    DegenerateDimension { rank: usize, d: usize },
    #[error("duplicate atom at {0}")]
    DuplicateAtom(LatticePoint),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown step family `{0}`")]
    UnknownFamily(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("resource limit: {what} needs {needed}, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        needed: u128,
        budget: u128,
    },
    #[error("suspected recurrence at N = {horizon}: relative change {change:.3e} exceeds {threshold:.1e}")]
    SuspectedRecurrence {
        horizon: usize,
        change: f64,
        threshold: f64,
    },
    #[error("escape probability {0} outside (0, 1]")]
    BadGamma(f64),
    #[error("return law horizon {have} is shorter than the requested {need}")]
    HorizonTooShort { have: usize, need: usize },
    #[error("enumeration of {paths} paths exceeds the budget of {budget}")]
    BudgetExceeded { paths: u128, budget: u128 },
    #[error("exact arithmetic requires a law with rational masses")]
    FloatLawRejected,
    #[error("not a law: {0}")]
    NotALaw(String),
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-log fit needs positive values, got {0}")]
    NonPositiveValue(f64),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
