//! Law of large numbers for L_n(α)/n and R(n)/n along single paths.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{Check, ExperimentKind, ExperimentReport, Rule, Table};
use crate::error::Result;
use crate::gamma::GammaEstimate;
use crate::path::{simulate_series, CheckpointSeries};
use crate::steps::StepLaw;
use crate::theory::moment_limit;

pub const MOMENT_TOL: f64 = 1e-12;

/// Simulates one path per seed and compares the final L_n(α)/n with the
/// limit at the supplied γ. `band` is a relative tolerance.
pub fn run_slln(
    law: &StepLaw,
    label: &str,
    alphas: &[f64],
    checkpoints: &[u64],
    seeds: &[u64],
    gamma: &GammaEstimate,
    band: f64,
) -> Result<ExperimentReport> {
    let theory = alphas
        .iter()
        .map(|&a| moment_limit(a, gamma.value, MOMENT_TOL))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<CheckpointSeries> = seeds
        .par_iter()
        .map(|&s| simulate_series(law, checkpoints, alphas, s))
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(ExperimentKind::Slln, label.to_string(), seeds);
    report.param("alphas", alphas);
    report.param("checkpoints", checkpoints);
    report.param("band", band);
    report.gamma = Some(gamma.clone());

    let mut table = Table::new(&["seed", "n", "alpha", "L", "L_over_n", "R", "R_over_n", "theory"]);
    for (&seed, series) in seeds.iter().zip(&runs) {
        for rec in &series.records {
            let n = rec.n as f64;
            for (i, &a) in alphas.iter().enumerate() {
                let l = rec.l_exact[i].map_or(json!(rec.l[i]), |v| json!(v as f64));
                table.push(vec![
                    json!(seed),
                    json!(rec.n),
                    json!(a),
                    l,
                    json!(rec.l[i] / n),
                    json!(rec.range),
                    json!(rec.range as f64 / n),
                    json!(theory[i].value),
                ]);
            }
        }
        let last = series.last().expect("validated checkpoints are nonempty");
        let n = last.n as f64;
        for (i, &a) in alphas.iter().enumerate() {
            let ratio = last.l[i] / n;
            let rel = (ratio - theory[i].value).abs() / theory[i].value;
            report.check(Check::new(format!("L_n({a})/n within band of limit"), Some(seed), rel, Rule::AtMost, band));
        }
        let r = last.range as f64 / n;
        let rel = (r - gamma.value).abs() / gamma.value;
        report.check(Check::new("R(n)/n within band of gamma", Some(seed), rel, Rule::AtMost, band));
    }
    report.theory = theory;
    report.tables.insert("series".into(), table);
    let finals: Vec<Value> = seeds
        .iter()
        .zip(&runs)
        .map(|(&s, series)| {
            let last = series.last().expect("nonempty");
            json!({"seed": s, "n": last.n, "L_over_n": last.l.iter().map(|l| l / last.n as f64).collect::<Vec<_>>(), "R_over_n": last.range as f64 / last.n as f64})
        })
        .collect();
    report.stat("final", finals);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steps::{bernoulli, deterministic};

    #[test]
    fn deterministic_passes() {
        let law = deterministic(vec![1]).unwrap();
        let g = GammaEstimate::fixed(1.0).unwrap();
        let r = run_slln(&law, "det", &[0.0, 1.0, 2.5], &[10, 1000], &[1, 2], &g, 0.05).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.checks.len(), 8);
    }

    #[test]
    fn alpha_one_and_range_column() {
        let law = bernoulli(0.7).unwrap();
        let g = GammaEstimate::fixed(0.4).unwrap();
        let r = run_slln(&law, "b", &[0.0, 1.0], &[1000, 20_000], &[3], &g, 0.05).unwrap();
        let t = &r.tables["series"];
        for row in &t.rows {
            if row[2] == json!(0.0) {
                assert_eq!(row[3].as_f64(), row[5].as_f64());
                assert_eq!(row[4], row[6]);
            } else {
                assert_eq!(row[3].as_f64().unwrap(), row[1].as_f64().unwrap() + 1.0);
            }
        }
    }
}
