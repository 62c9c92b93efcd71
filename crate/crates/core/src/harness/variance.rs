//! Replica variance of L_n(α) on a dyadic grid against the growth envelopes
//! n^{3/2} log n (d = 1), n log² n (d = 2), n^{3/2} (d = 3), n log n (d = 4)
//! and n (d ≥ 5).

use rayon::prelude::*;
use serde_json::json;

use super::stats::{fit_exponent, sample_variance, VarianceEstimate};
use super::{Check, ExperimentKind, ExperimentReport, Rule, Table};
use crate::error::{Error, Result};
use crate::path::{simulate_series_with_rng, DEFAULT_KEY_BUDGET, MAX_EXACT_ALPHA};
use crate::seed::replica_rng;
use crate::steps::StepLaw;

pub const SAFETY_FACTOR: f64 = 10.0;

pub fn envelope(d: usize, n: f64) -> f64 {
    match d {
        1 => n.powf(1.5) * n.ln(),
        2 => n * n.ln().powi(2),
        3 => n.powf(1.5),
        4 => n * n.ln(),
        _ => n,
    }
}

pub fn envelope_name(d: usize) -> &'static str {
    match d {
        1 => "n^1.5 log n",
        2 => "n log^2 n",
        3 => "n^1.5",
        4 => "n log n",
        _ => "n",
    }
}

/// Per-n variance estimates and the envelope calibration for one master seed.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub seed: u64,
    pub estimates: Vec<VarianceEstimate>,
}

fn scan_seed(law: &StepLaw, alpha: u32, grid: &[u64], m: usize, seed: u64) -> Result<ScanResult> {
    let values: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let series = simulate_series_with_rng(law, grid, &[alpha as f64], &mut replica_rng(seed, r), DEFAULT_KEY_BUDGET)?;
            Ok(series
                .records
                .iter()
                .map(|rec| rec.l_exact[0].map_or(rec.l[0], |v| v as f64))
                .collect())
        })
        .collect::<Result<_>>()?;
    let estimates = (0..grid.len())
        .map(|k| sample_variance(&values.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(ScanResult { seed, estimates })
}

/// For each seed, M replica paths (replica r uses `replica_rng(seed, r)`)
/// give the sample variance of L_n(α) at each grid point. The envelope
/// constant is calibrated at the first grid point and every point must lie
/// under `safety` times the calibrated envelope.
#[allow(clippy::too_many_arguments)]
pub fn variance_scan(
    law: &StepLaw,
    label: &str,
    alpha: u32,
    grid: &[u64],
    m: usize,
    seeds: &[u64],
    safety: f64,
    max_slope: Option<f64>,
) -> Result<ExperimentReport> {
    if alpha > MAX_EXACT_ALPHA {
        return Err(Error::BadParam(format!("alpha must be an integer <= {MAX_EXACT_ALPHA}")));
    }
    if grid.len() < 2 || grid[0] < 2 {
        return Err(Error::BadParam("variance grid needs at least two points, all >= 2".into()));
    }
    let d = law.dim();
    let mut report = ExperimentReport::new(ExperimentKind::VarianceScan, label.to_string(), seeds);
    report.param("alpha", alpha);
    report.param("grid", grid);
    report.param("M", m);
    report.param("safety_factor", safety);
    report.param("envelope", envelope_name(d));
    if let Some(s) = max_slope {
        report.param("max_slope", s);
    }

    let mut table = Table::new(&["seed", "n", "mean", "variance", "jackknife_se", "envelope", "bound"]);
    let mut fits = Vec::new();
    for &seed in seeds {
        let scan = scan_seed(law, alpha, grid, m, seed)?;
        let c = scan.estimates[0].variance / envelope(d, grid[0] as f64);
        for (&n, est) in grid.iter().zip(&scan.estimates) {
            let env = envelope(d, n as f64);
            let bound = safety * c * env;
            table.push(vec![
                json!(seed),
                json!(n),
                json!(est.mean),
                json!(est.variance),
                json!(est.jackknife_se),
                json!(env),
                json!(bound),
            ]);
            report.check(Check::new(format!("V(L_{n}) under envelope"), Some(seed), est.variance, Rule::AtMost, bound));
        }
        let points: Vec<(f64, f64)> = grid.iter().zip(&scan.estimates).map(|(&n, e)| (n as f64, e.variance)).collect();
        let fit = match fit_exponent(&points) {
            Ok(f) => Some(f),
            Err(Error::NonPositiveValue(_)) | Err(Error::TooFewPoints(_)) => None,
            Err(e) => return Err(e),
        };
        if let (Some(limit), Some(f)) = (max_slope, fit) {
            report.check(Check::new("fitted slope", Some(seed), f.slope, Rule::AtMost, limit));
        }
        fits.push(json!({"seed": seed, "calibration": c, "fit": fit}));
    }
    report.stat("fits", fits);
    report.tables.insert("variance".into(), table);
    Ok(report.finish())
}
