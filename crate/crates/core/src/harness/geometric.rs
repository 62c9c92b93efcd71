//! Law of ℓ(n, Y_n) for a uniformly chosen visited site against Geom(γ).

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde_json::json;

use super::stats::{chi_square_geometric, empirical_law, tally, tv_distance, RefLaw};
use super::{Check, ExperimentKind, ExperimentReport, Rule, Table};
use crate::error::{Error, Result};
use crate::gamma::GammaEstimate;
use crate::oracle::{enumerate_with_budget, exact_zn_law, DEFAULT_PATH_BUDGET};
use crate::path::{q_histogram, sample_visited_local_time, simulate};
use crate::seed::replica_rng;
use crate::steps::StepLaw;
use crate::theory::geometric_pmf;

/// Range, tallied draws and the exhaustive site-count histogram of one path.
type PathDraws = (u64, BTreeMap<u64, u64>, BTreeMap<u64, u64>);

/// Horizon of the exact finite-n comparison attached to each report.
pub const ORACLE_HORIZON: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct GeometricTolerances {
    pub tv: f64,
    pub p_value: f64,
}

impl Default for GeometricTolerances {
    fn default() -> Self {
        GeometricTolerances { tv: 0.02, p_value: 1e-4 }
    }
}

/// TV distance between the exact law of ℓ(n, Y_n) and Geom(γ). Recorded
/// only; the finite-n law differs from the limit.
pub fn oracle_tv(law: &StepLaw, n: usize, gamma: f64) -> Result<f64> {
    let summary = enumerate_with_budget(law, n, &[], DEFAULT_PATH_BUDGET)?;
    let zn: BTreeMap<u64, f64> = exact_zn_law(&summary)
        .into_iter()
        .map(|(u, p)| (u, p.to_f64().unwrap_or(0.0)))
        .collect();
    tv_distance(&zn, &RefLaw::Geometric(gamma))
}

/// One path of length n per seed; Y_n is resampled `m` times from the
/// visited sites with the stream `replica_rng(seed, 1)`.
pub fn run_geometric(
    law: &StepLaw,
    label: &str,
    n: u64,
    m: usize,
    seeds: &[u64],
    gamma: &GammaEstimate,
    tol: GeometricTolerances,
) -> Result<ExperimentReport> {
    if m == 0 {
        return Err(Error::BadParam("M must be positive".into()));
    }
    let g = gamma.value;
    let samples: Vec<PathDraws> = seeds
        .par_iter()
        .map(|&s| {
            let field = simulate(law, n, s)?;
            let draws = sample_visited_local_time(&field, &mut replica_rng(s, 1), m);
            Ok((field.range(), tally(&draws), q_histogram(&field).buckets))
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(ExperimentKind::Geometric, label.to_string(), seeds);
    report.param("n", n);
    report.param("M", m);
    report.param("tv_threshold", tol.tv);
    report.param("p_value_threshold", tol.p_value);
    report.gamma = Some(gamma.clone());

    let mut table = Table::new(&["seed", "u", "observed", "empirical", "geometric"]);
    let mut per_seed = Vec::new();
    for (&seed, (range, counts, sites)) in seeds.iter().zip(&samples) {
        let emp = empirical_law(counts);
        for (&u, &c) in counts {
            table.push(vec![json!(seed), json!(u), json!(c), json!(emp[&u]), json!(geometric_pmf(g, u)?)]);
        }
        let tv = tv_distance(&emp, &RefLaw::Geometric(g))?;
        let chi = chi_square_geometric(counts, g)?;
        report.check(Check::new("TV to Geom(gamma)", Some(seed), tv, Rule::LessThan, tol.tv));
        report.check(Check::new("chi-square p-value", Some(seed), chi.p_value, Rule::GreaterThan, tol.p_value));
        // Diagnostics only. The draws are iid from this path's site-count
        // law, whose own deviation from Geom(γ) is scaled by M/R in the
        // resampled statistic.
        let site_chi = chi_square_geometric(sites, g)?;
        per_seed.push(json!({
            "seed": seed,
            "range": range,
            "tv": tv,
            "chi_square": chi,
            "site_chi_square": {"statistic": site_chi.statistic, "dof": site_chi.dof, "p_value": site_chi.p_value},
            "draws_per_site": m as f64 / *range as f64,
        }));
    }
    report.stat("per_seed", per_seed);
    if law.is_exact() {
        match oracle_tv(law, ORACLE_HORIZON, g) {
            Ok(tv) => report.stat("oracle_tv", json!({"n": ORACLE_HORIZON, "tv": tv})),
            Err(Error::BudgetExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    report.tables.insert("law".into(), table);
    Ok(report.finish())
}
