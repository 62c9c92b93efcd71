//! Closed-form predictions for local-time functionals and the exact finite-n
//! formulas they come from.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gamma::{return_probabilities, ReturnLaw};
use crate::mass::Mass;
use crate::pmf::{evolve_with, DEFAULT_CELL_BUDGET};
use crate::steps::{LatticePoint, StepLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    MomentLimit,
    QjLimit,
    GeometricPmf,
    QjExpectation,
    QjGenerating,
    GreenCross,
    SupPmf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub kind: PredictionKind,
    pub inputs: BTreeMap<String, Value>,
    pub value: f64,
    /// Truncation (plus accumulated rounding) bound on `value`.
    pub error: f64,
}

impl Prediction {
    fn new(kind: PredictionKind, inputs: &[(&str, Value)], value: f64, error: f64) -> Self {
        Prediction {
            kind,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            value,
            error,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::BadGamma(gamma))
    }
}

const MAX_TERMS: u64 = 100_000_000;

/// lim L_n(α)/n = Σ_{j≥1} j^α γ² (1−γ)^{j−1}, i.e. γ·E[Z^α] for Z ~ Geom(γ).
///
/// The series is summed until the tail bound drops below `tol`. Once the
/// term ratio bound (1−γ)(1+1/(J+1))^α is at most 1 − γ/2, the tail after
/// term J is at most 2 (J+1)^α γ (1−γ)^J.
pub fn moment_limit(alpha: f64, gamma: f64, tol: f64) -> Result<Prediction> {
    check_gamma(gamma)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::BadParam(format!("alpha = {alpha} must be nonnegative")));
    }
    if !(tol > 0.0) {
        return Err(Error::BadParam(format!("tol = {tol} must be positive")));
    }
    let inputs = [("alpha", json!(alpha)), ("gamma", json!(gamma)), ("tol", json!(tol))];
    if gamma == 1.0 {
        return Ok(Prediction::new(PredictionKind::MomentLimit, &inputs, 1.0, 0.0));
    }
    let (lg, lq) = (gamma.ln(), (1.0 - gamma).ln());
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut j: u64 = 1;
    let tail = loop {
        let term = (alpha * (j as f64).ln() + 2.0 * lg + (j - 1) as f64 * lq).exp();
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        let next = (j + 1) as f64;
        let ratio = (1.0 - gamma) * (1.0 + 1.0 / next).powf(alpha);
        if ratio <= 1.0 - gamma / 2.0 {
            let bound = 2.0 * (alpha * next.ln() + lg + j as f64 * lq).exp();
            if bound < tol || j >= MAX_TERMS {
                break bound;
            }
        }
        j += 1;
    };
    let rounding = 4.0 * f64::EPSILON * sum;
    Ok(Prediction::new(PredictionKind::MomentLimit, &inputs, sum, tail + rounding))
}

/// Geom(γ) mass at u ≥ 1: γ (1−γ)^{u−1}.
pub fn geometric_pmf(gamma: f64, u: u64) -> Result<f64> {
    check_gamma(gamma)?;
    if u == 0 {
        return Err(Error::BadParam("u must be at least 1".into()));
    }
    Ok(gamma * (1.0 - gamma).powf((u - 1) as f64))
}

/// lim E(Q_j(n))/n = γ² (1−γ)^{j−1}.
pub fn qj_limit(gamma: f64, j: u64) -> Result<f64> {
    check_gamma(gamma)?;
    if j == 0 {
        return Err(Error::BadParam("j must be at least 1".into()));
    }
    Ok(gamma * gamma * (1.0 - gamma).powf((j - 1) as f64))
}

fn need_horizon<M: Mass>(ret: &ReturnLaw<M>, n: usize) -> Result<()> {
    if ret.horizon() < n {
        return Err(Error::HorizonTooShort {
            have: ret.horizon(),
            need: n,
        });
    }
    Ok(())
}

/// `a * b` truncated to indices `0..=n`.
fn convolve_truncated<M: Mass>(a: &[M], b: &[M], n: usize) -> Vec<M> {
    let mut out = vec![M::zero(); n + 1];
    for (i, x) in a.iter().enumerate().take(n + 1) {
        if x.is_zero() {
            continue;
        }
        for (k, y) in b.iter().enumerate().take(n + 1 - i) {
            if !y.is_zero() {
                out[i + k].add_scaled(x, y);
            }
        }
    }
    out
}

/// Σ_k a[k] γ(n−k).
fn close_with_gamma<M: Mass>(a: &[M], gammas: &[M], n: usize) -> M {
    let mut acc = M::zero();
    for k in 0..=n {
        if !a[k].is_zero() {
            acc.add_scaled(&a[k], &gammas[n - k]);
        }
    }
    acc
}

/// E(Q_j(n)) = Σ_{0≤k_1<…<k_j≤n} γ(k_1) Π P(τ = k_{i+1}−k_i) γ(n−k_j),
/// evaluated as the sequence convolution γ * τ^{*(j−1)} * γ at index n.
pub fn expected_qj_formula<M: Mass>(ret: &ReturnLaw<M>, j: usize, n: usize) -> Result<M> {
    need_horizon(ret, n)?;
    if j == 0 {
        return Err(Error::BadParam("j must be at least 1".into()));
    }
    let gammas = &ret.gammas()[..=n];
    let taus = &ret.taus()[..=n];
    let mut acc = gammas.to_vec();
    for _ in 1..j {
        acc = convolve_truncated(&acc, taus, n);
    }
    Ok(close_with_gamma(&acc, gammas, n))
}

/// E(Q_j(n)) for j = 1..=n+1 (index 0 of the result is j = 1).
pub fn expected_qj_all<M: Mass>(ret: &ReturnLaw<M>, n: usize) -> Result<Vec<M>> {
    need_horizon(ret, n)?;
    let gammas = &ret.gammas()[..=n];
    let taus = &ret.taus()[..=n];
    let mut acc = gammas.to_vec();
    let mut out = Vec::with_capacity(n + 1);
    for j in 1..=n + 1 {
        if j > 1 {
            acc = convolve_truncated(&acc, taus, n);
        }
        out.push(close_with_gamma(&acc, gammas, n));
    }
    Ok(out)
}

/// q_j(s) = (Σ s^n γ(n))² (Σ s^n P(τ=n))^{j−1}, both sums truncated at N.
///
/// With t = s^{N+1}/(1−s) bounding each omitted tail (γ(n) and P(τ=n) are
/// at most one), the untruncated value lies in
/// [A², (A+t)²(B+t)^{j−1}] · …, and the returned error is the width of that
/// interval.
pub fn qj_generating(ret: &ReturnLaw<f64>, j: usize, s: f64, horizon: usize) -> Result<Prediction> {
    need_horizon(ret, horizon)?;
    if j == 0 {
        return Err(Error::BadParam("j must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&s) {
        return Err(Error::BadParam(format!("s = {s} must lie in [0, 1)")));
    }
    let mut a = 0.0;
    let mut b = 0.0;
    let mut pow = 1.0;
    for n in 0..=horizon {
        a += pow * ret.gamma(n);
        if n >= 1 {
            b += pow * ret.tau(n);
        }
        pow *= s;
    }
    let t = pow / (1.0 - s);
    let e = (j - 1) as i32;
    let value = a * a * b.powi(e);
    let upper = (a + t).powi(2) * (b + t).powi(e);
    let inputs = [("j", json!(j)), ("s", json!(s)), ("N", json!(horizon))];
    Ok(Prediction::new(
        PredictionKind::QjGenerating,
        &inputs,
        value,
        upper - value + 4.0 * f64::EPSILON * upper,
    ))
}

/// Σ_{n>N} (n+1) s^n, which bounds the omitted tail of Σ s^n E(Q_j(n))
/// because Q_j(n) ≤ n + 1.
pub fn qj_series_tail_bound(s: f64, horizon: usize) -> f64 {
    let n = horizon as f64;
    s.powf(n + 1.0) * ((n + 2.0) - (n + 1.0) * s) / (1.0 - s).powi(2)
}

/// Σ_y G_n(0,y) G_n(0,−y) with G_n(0,y) = Σ_{m=1}^{n} P(S_m = y).
///
/// Summing over y first, Σ_y P(S_m = y) P(S_{m'} = −y) = P(S_{m+m'} = 0), so
/// the cross sum equals Σ_{k=2}^{2n} c_k P(S_k = 0) with
/// c_k = #{(m, m') ∈ [1,n]² : m + m' = k} = min(k−1, 2n−k+1). Only return
/// probabilities are needed, which keeps d = 5 tractable.
/// [`green_cross_sum_direct`] computes the same quantity from the fields.
pub fn green_cross_sum(law: &StepLaw, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let u = return_probabilities(law, 2 * n)?.u;
    Ok((2..=2 * n).map(|k| (k - 1).min(2 * n - k + 1) as f64 * u[k]).sum())
}

/// The cross sum evaluated literally: accumulate G_n(0, ·) from the law of
/// S_1, …, S_n and pair y with −y.
pub fn green_cross_sum_direct(law: &StepLaw, n: usize) -> Result<f64> {
    let mut green: FxHashMap<LatticePoint, f64> = FxHashMap::default();
    evolve_with::<f64>(law, n, DEFAULT_CELL_BUDGET, |f| {
        if f.step_index() == 0 {
            return;
        }
        for (p, m) in f.iter() {
            *green.entry(p).or_insert(0.0) += m;
        }
    })?;
    let mut keys: Vec<&LatticePoint> = green.keys().collect();
    keys.sort();
    Ok(keys
        .into_iter()
        .map(|y| green[y] * green.get(&y.neg()).copied().unwrap_or(0.0))
        .sum())
}

/// sup_x P(S_m = x).
pub fn sup_pmf(law: &StepLaw, m: usize) -> Result<f64> {
    Ok(sup_pmf_series(law, &[m])?[0])
}

/// sup_x P(S_m = x) for each requested m, from a single evolution.
pub fn sup_pmf_series(law: &StepLaw, ms: &[usize]) -> Result<Vec<f64>> {
    let top = ms.iter().copied().max().unwrap_or(0);
    let mut sup = vec![0.0; top + 1];
    evolve_with::<f64>(law, top, DEFAULT_CELL_BUDGET, |f| sup[f.step_index()] = f.max_mass())?;
    Ok(ms.iter().map(|&m| sup[m]).collect())
}
