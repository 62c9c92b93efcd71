//! Shared fixtures for the criterion benches.

use rwlocal::steps::{bernoulli, srw};
use rwlocal::StepLaw;

pub fn laws() -> Vec<(&'static str, StepLaw)> {
    vec![
        ("bernoulli(0.7)", bernoulli(0.7).expect("valid")),
        ("srw3", srw(3)),
        ("srw5", srw(5)),
    ]
}
