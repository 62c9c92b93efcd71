//! Distances, goodness of fit, log-log fits and replica variances.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::theory::geometric_pmf;

pub const LAW_SUM_TOL: f64 = 1e-9;
/// Geometric tail mass left out of the explicit chi-square buckets.
pub const CHI_TAIL_MASS: f64 = 1e-3;
pub const CHI_MIN_EXPECTED: f64 = 5.0;

/// Reference law for distance computations.
#[derive(Clone, Debug, PartialEq)]
pub enum RefLaw {
    Finite(BTreeMap<u64, f64>),
    Geometric(f64),
}

impl RefLaw {
    fn mass(&self, u: u64) -> f64 {
        match self {
            RefLaw::Finite(m) => m.get(&u).copied().unwrap_or(0.0),
            RefLaw::Geometric(g) => geometric_pmf(*g, u).unwrap_or(0.0),
        }
    }
}

fn check_law(p: &BTreeMap<u64, f64>) -> Result<()> {
    if let Some((u, v)) = p.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::NotALaw(format!("mass {v} at {u}")));
    }
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > LAW_SUM_TOL {
        return Err(Error::NotALaw(format!("masses sum to {total}")));
    }
    Ok(())
}

/// Total variation distance. Mass of `q` outside the support of `p` counts
/// in full.
pub fn tv_distance(p: &BTreeMap<u64, f64>, q: &RefLaw) -> Result<f64> {
    check_law(p)?;
    let tv = match q {
        RefLaw::Finite(qm) => {
            check_law(qm)?;
            let keys: std::collections::BTreeSet<u64> = p.keys().chain(qm.keys()).copied().collect();
            keys.iter().map(|&u| (p.get(&u).copied().unwrap_or(0.0) - q.mass(u)).abs()).sum::<f64>()
        }
        RefLaw::Geometric(_) => {
            let mut sum = 0.0;
            let mut covered = 0.0;
            for (&u, &pu) in p {
                let qu = q.mass(u);
                covered += qu;
                sum += (pu - qu).abs();
            }
            sum + (1.0 - covered).max(0.0)
        }
    };
    Ok((tv / 2.0).clamp(0.0, 1.0))
}

pub fn empirical_law(counts: &BTreeMap<u64, u64>) -> BTreeMap<u64, f64> {
    let total: u64 = counts.values().sum();
    counts.iter().map(|(&u, &c)| (u, c as f64 / total as f64)).collect()
}

pub fn tally(samples: &[u64]) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    for &s in samples {
        *out.entry(s).or_insert(0) += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub lo: u64,
    /// Inclusive upper end; `None` for the open tail bucket.
    pub hi: Option<u64>,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Largest explicit value before the tail bucket.
    pub cutoff: u64,
    pub buckets: Vec<Bucket>,
}

/// Smallest U with (1−γ)^U < `tail`.
pub fn geometric_cutoff(gamma: f64, tail: f64) -> u64 {
    if gamma >= 1.0 {
        return 1;
    }
    let q = 1.0 - gamma;
    let mut u = ((tail.ln() / q.ln()).floor().max(1.0)) as u64;
    while q.powi(u as i32) >= tail {
        u += 1;
    }
    while u > 1 && q.powi(u as i32 - 1) < tail {
        u -= 1;
    }
    u
}

/// Chi-square goodness of fit of observed counts to Geom(γ) over the
/// buckets {1}, …, {U}, {>U}. Adjacent buckets are merged left to right
/// until each expects at least five observations.
pub fn chi_square_geometric(counts: &BTreeMap<u64, u64>, gamma: f64) -> Result<ChiSquare> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::BadGamma(gamma));
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::NotALaw("no observations".into()));
    }
    let m = total as f64;
    let cutoff = geometric_cutoff(gamma, CHI_TAIL_MASS);
    let mut raw: Vec<Bucket> = (1..=cutoff)
        .map(|u| Bucket {
            lo: u,
            hi: Some(u),
            observed: counts.get(&u).copied().unwrap_or(0),
            expected: m * geometric_pmf(gamma, u).expect("checked gamma"),
        })
        .collect();
    let zero = counts.get(&0).copied().unwrap_or(0);
    raw[0].observed += zero;
    raw.push(Bucket {
        lo: cutoff + 1,
        hi: None,
        observed: counts.range(cutoff + 1..).map(|(_, c)| c).sum(),
        expected: m * (1.0 - gamma).powi(cutoff as i32),
    });

    let mut merged: Vec<Bucket> = Vec::new();
    for b in raw {
        match merged.last_mut() {
            Some(last) if last.expected < CHI_MIN_EXPECTED => {
                last.hi = b.hi;
                last.observed += b.observed;
                last.expected += b.expected;
            }
            _ => merged.push(b),
        }
    }
    if merged.len() > 1 && merged.last().is_some_and(|b| b.expected < CHI_MIN_EXPECTED) {
        let b = merged.pop().expect("nonempty");
        let last = merged.last_mut().expect("nonempty");
        last.hi = b.hi;
        last.observed += b.observed;
        last.expected += b.expected;
    }

    let statistic: f64 = merged
        .iter()
        .map(|b| {
            let diff = b.observed as f64 - b.expected;
            if b.expected > 0.0 {
                diff * diff / b.expected
            } else if b.observed == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .sum();
    let dof = merged.len() - 1;
    let p_value = if dof == 0 {
        if statistic == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if statistic.is_infinite() {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - dist.cdf(statistic)
    };
    Ok(ChiSquare { statistic, dof, p_value, cutoff, buckets: merged })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
}

/// Least squares line through (log n, log v).
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*n > 0.0 && *v > 0.0)) {
        return Err(Error::NonPositiveValue(if n > 0.0 { v } else { n }));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(FitResult { slope, intercept, residual_norm })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Jackknife standard error of `variance`.
    pub jackknife_se: f64,
}

/// Unbiased sample variance with a leave-one-out jackknife error.
pub fn sample_variance(xs: &[f64]) -> Result<VarianceEstimate> {
    let m = xs.len();
    if m < 3 {
        return Err(Error::TooFewPoints(m));
    }
    let mf = m as f64;
    let mean = xs.iter().sum::<f64>() / mf;
    // centred sums keep the cancellation small
    let ds: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let s1: f64 = ds.iter().sum();
    let s2: f64 = ds.iter().map(|d| d * d).sum();
    let variance = (s2 - s1 * s1 / mf) / (mf - 1.0);
    let loo: Vec<f64> = ds
        .iter()
        .map(|d| {
            let (a, b) = (s1 - d, s2 - d * d);
            (b - a * a / (mf - 1.0)) / (mf - 2.0)
        })
        .collect();
    let bar = loo.iter().sum::<f64>() / mf;
    let jackknife_se = ((mf - 1.0) / mf * loo.iter().map(|v| (v - bar).powi(2)).sum::<f64>()).sqrt();
    Ok(VarianceEstimate { mean, variance, jackknife_se })
}
