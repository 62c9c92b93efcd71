//! Escape probability γ, the no-return sequence γ(n), and return-time laws.
//!
//! Three routes to γ are provided and are meant to be checked against each
//! other: the taboo dynamic program (exact in rational mode), the Green's
//! series at the origin with an extrapolated tail, and Monte Carlo.

use std::collections::BTreeMap;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mass::Mass;
use crate::pmf::{evolve_with, Kernel, PmfField, DEFAULT_CELL_BUDGET};
use crate::seed::replica_rng;
use crate::steps::{LatticePoint, StepLaw, StepSampler};

/// Relative change of the extrapolated Green's series between N/2 and N
/// above which the walk is flagged as possibly recurrent.
pub const RECURRENCE_THRESHOLD: f64 = 1e-3;

/// γ(0..=N) together with P(τ = n) = γ(n−1) − γ(n).
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnLaw<M> {
    gamma_seq: Vec<M>,
    /// Index 0 holds zero so that `tau_pmf[n]` is P(τ = n).
    tau_pmf: Vec<M>,
    prune_error: f64,
}

impl<M: Mass> ReturnLaw<M> {
    /// Builds the law from γ(0..=N); γ(0) must be one.
    pub fn from_gammas(gamma_seq: Vec<M>, prune_error: f64) -> Self {
        assert!(!gamma_seq.is_empty(), "gamma sequence needs gamma(0)");
        let mut tau_pmf = vec![M::zero()];
        for w in gamma_seq.windows(2) {
            let mut t = w[0].clone();
            t.sub(&w[1]);
            tau_pmf.push(t);
        }
        ReturnLaw {
            gamma_seq,
            tau_pmf,
            prune_error,
        }
    }

    /// Builds the law from P(τ = 1..=N).
    pub fn from_taus(taus: &[M], prune_error: f64) -> Self {
        let mut gamma_seq = vec![M::one()];
        let mut tau_pmf = vec![M::zero()];
        for t in taus {
            let mut g = gamma_seq.last().expect("nonempty").clone();
            g.sub(t);
            gamma_seq.push(g);
            tau_pmf.push(t.clone());
        }
        ReturnLaw {
            gamma_seq,
            tau_pmf,
            prune_error,
        }
    }

    pub fn horizon(&self) -> usize {
        self.gamma_seq.len() - 1
    }

    pub fn gamma(&self, n: usize) -> &M {
        &self.gamma_seq[n]
    }

    pub fn gammas(&self) -> &[M] {
        &self.gamma_seq
    }

    /// P(τ = n) for n ≥ 1; zero at n = 0.
    pub fn tau(&self, n: usize) -> &M {
        &self.tau_pmf[n]
    }

    /// P(τ = 0..=N), with a zero at index 0.
    pub fn taus(&self) -> &[M] {
        &self.tau_pmf
    }

    /// Mass dropped by float pruning; bounds |γ(n) − computed γ(n)|.
    pub fn prune_error(&self) -> f64 {
        self.prune_error
    }

    pub fn to_f64(&self) -> ReturnLaw<f64> {
        ReturnLaw {
            gamma_seq: self.gamma_seq.iter().map(M::to_f64).collect(),
            tau_pmf: self.tau_pmf.iter().map(M::to_f64).collect(),
            prune_error: self.prune_error,
        }
    }

    /// Truncated to horizon `n`.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.horizon() {
            return Err(Error::HorizonTooShort {
                have: self.horizon(),
                need: n,
            });
        }
        Ok(ReturnLaw {
            gamma_seq: self.gamma_seq[..=n].to_vec(),
            tau_pmf: self.tau_pmf[..=n].to_vec(),
            prune_error: self.prune_error,
        })
    }
}

/// Taboo dynamic program: evolve the law of S_m and delete the origin's mass
/// after every step. The surviving mass after n steps is γ(n) and the mass
/// deleted at step n is P(τ = n).
pub fn taboo_survival<M: Mass>(law: &StepLaw, horizon: usize) -> Result<ReturnLaw<M>> {
    taboo_survival_with_budget(law, horizon, DEFAULT_CELL_BUDGET)
}

pub fn taboo_survival_with_budget<M: Mass>(law: &StepLaw, horizon: usize, cell_budget: usize) -> Result<ReturnLaw<M>> {
    let kernel = Kernel::<M>::new(law)?;
    let mut field = PmfField::<M>::origin(law.dim());
    // The walk starts at the origin; S_0 = 0 is not a return.
    let mut taus = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        field = field.convolve(&kernel, cell_budget)?;
        taus.push(field.take_origin());
    }
    Ok(ReturnLaw::from_taus(&taus, field.pruned_mass()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnRoute {
    /// Origin mass of the full d-dimensional convolution power.
    Dense,
    /// Product over axis groups of one-dimensional return probabilities,
    /// mixed by binomial step allocation.
    AxisFactorized,
}

/// P(S_m = 0) for m = 0..=N.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnProbabilities {
    pub u: Vec<f64>,
    pub route: ReturnRoute,
    /// Float mass dropped while computing; each `u[m]` is low by at most this.
    pub pruned: f64,
}

struct AxisGroup {
    weight: f64,
    /// Conditional one-dimensional law; `None` for the zero step.
    line: Option<StepLaw>,
}

/// Splits a law whose atoms each move along at most one axis into per-axis
/// components. Returns `None` if some atom moves along two axes.
fn axis_groups(law: &StepLaw) -> Option<Vec<AxisGroup>> {
    let d = law.dim();
    let mut lazy = 0.0;
    let mut per_axis: Vec<Vec<(i64, f64)>> = vec![Vec::new(); d];
    for (p, m) in law.atoms() {
        let nz: Vec<usize> = (0..d).filter(|&k| p.coords()[k] != 0).collect();
        match nz.as_slice() {
            [] => lazy += m,
            [k] => per_axis[*k].push((p.coords()[*k], m)),
            _ => return None,
        }
    }
    let mut groups = Vec::new();
    if lazy > 0.0 {
        groups.push(AxisGroup { weight: lazy, line: None });
    }
    for atoms in per_axis {
        let w: f64 = atoms.iter().map(|a| a.1).sum();
        let mut cond: Vec<(LatticePoint, f64)> =
            atoms.iter().map(|&(c, m)| (LatticePoint::new(vec![c]), m / w)).collect();
        // Renormalise exactly to one for validation.
        let s: f64 = cond.iter().map(|a| a.1).sum();
        for a in &mut cond {
            a.1 /= s;
        }
        groups.push(AxisGroup {
            weight: w,
            line: Some(StepLaw::float(1, cond).ok()?),
        });
    }
    Some(groups)
}

fn dense_returns(law: &StepLaw, horizon: usize) -> Result<(Vec<f64>, f64)> {
    let mut u = Vec::with_capacity(horizon + 1);
    let last = evolve_with::<f64>(law, horizon, DEFAULT_CELL_BUDGET, |f| u.push(f.origin_mass()))?;
    Ok((u, last.pruned_mass()))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// P(S_m = 0), m = 0..=N, by the cheapest exact route available.
///
/// Laws whose atoms each move along a single axis (SRW and its reweightings,
/// optionally lazy) factor: given how many of the m steps fall in each axis
/// group, the coordinates are independent one-dimensional walks. Everything
/// else uses the dense d-dimensional convolution.
pub fn return_probabilities(law: &StepLaw, horizon: usize) -> Result<ReturnProbabilities> {
    let groups = match axis_groups(law) {
        Some(g) if law.dim() >= 2 => g,
        _ => {
            let (u, pruned) = dense_returns(law, horizon)?;
            return Ok(ReturnProbabilities {
                u,
                route: ReturnRoute::Dense,
                pruned,
            });
        }
    };
    let lnf = ln_factorials(horizon);
    let mut pruned = 0.0;
    let mut combined: Option<(f64, Vec<f64>)> = None;
    for g in groups {
        let p: Vec<f64> = match &g.line {
            None => vec![1.0; horizon + 1],
            Some(line) => {
                let (p, pr) = dense_returns(line, horizon)?;
                pruned += pr;
                p
            }
        };
        combined = Some(match combined {
            None => (g.weight, p),
            Some((w_acc, r)) => {
                let share = g.weight / (w_acc + g.weight);
                let (ls, lr) = (share.ln(), (1.0 - share).ln());
                let ln_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();
                let ln_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
                let mut next = vec![0.0; horizon + 1];
                for (j, out) in next.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..=j {
                        let (a, b) = (ln_p[i], ln_r[j - i]);
                        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                            continue;
                        }
                        let ln_binom = lnf[j] - lnf[i] - lnf[j - i] + i as f64 * ls + (j - i) as f64 * lr;
                        acc += (ln_binom + a + b).exp();
                    }
                    *out = acc;
                }
                (w_acc + g.weight, next)
            }
        });
    }
    let (_, u) = combined.expect("a law has at least one atom");
    Ok(ReturnProbabilities {
        u,
        route: ReturnRoute::AxisFactorized,
        pruned,
    })
}

/// First-return law from return probabilities via the renewal equation
/// u_n = Σ_{k=1}^{n} P(τ=k) u_{n−k}.
pub fn return_law_from_returns(returns: &ReturnProbabilities) -> ReturnLaw<f64> {
    let u = &returns.u;
    let n = u.len() - 1;
    let mut f = vec![0.0; n + 1];
    for m in 1..=n {
        let conv: f64 = (1..m).map(|k| f[k] * u[m - k]).sum();
        f[m] = u[m] - conv;
    }
    ReturnLaw::from_taus(&f[1..], returns.pruned * n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    McEscape,
    TabooDp,
    GreenSeries,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaEstimate {
    pub method: GammaMethod,
    pub value: f64,
    pub error: f64,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GammaEstimate {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::BadGamma(value));
        }
        Ok(GammaEstimate {
            method: GammaMethod::Fixed,
            value,
            error: 0.0,
            params: BTreeMap::new(),
            seed: None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// `Power` for centred laws in d ≥ 3, `Geometric` for laws with drift.
    #[default]
    Auto,
    /// C m^{−d/2} envelope.
    Power,
    /// C r^m, the decay of a walk with nonzero mean.
    Geometric,
    /// Partial sum only.
    None,
}

impl std::str::FromStr for TailMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TailMode::Auto),
            "power" => Ok(TailMode::Power),
            "geometric" => Ok(TailMode::Geometric),
            "none" => Ok(TailMode::None),
            _ => Err(Error::BadParam(format!("unknown tail mode `{s}`"))),
        }
    }
}

/// Extrapolated tail Σ_{m>N} P(S_m = 0).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub mode: TailMode,
    pub period: usize,
    pub constant: f64,
    /// Per-step decay ratio for the geometric model.
    pub rate: Option<f64>,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreenSeries {
    pub horizon: usize,
    pub partial_sum: f64,
    pub fit: TailFit,
    pub route: ReturnRoute,
    /// Relative change of the extrapolated sum between N/2 and N.
    pub cauchy_change: f64,
}

impl GreenSeries {
    pub fn total(&self) -> f64 {
        self.partial_sum + self.fit.tail
    }
}

/// Σ_{k ≥ k0} k^{−s} for s > 1, by the midpoint integral.
fn power_tail_sum(k0: f64, s: f64) -> f64 {
    (k0 - 0.5).powf(1.0 - s) / (s - 1.0)
}

fn resolve_mode(law: &StepLaw, mode: TailMode) -> TailMode {
    if mode != TailMode::Auto {
        return mode;
    }
    let centred = law.moments().mean.iter().all(|m| m.abs() < 1e-12);
    if centred {
        TailMode::Power
    } else {
        TailMode::Geometric
    }
}

/// Fits the tail on the nonzero terms of the last dyadic window (N/2, N].
fn fit_tail(u: &[f64], horizon: usize, d: usize, mode: TailMode) -> std::result::Result<TailFit, f64> {
    let period = (1..=horizon).filter(|&m| u[m] > 0.0).fold(0usize, |g, m| g.gcd(&m));
    let window: Vec<(f64, f64)> = ((horizon / 2 + 1)..=horizon)
        .filter(|&m| u[m] > 0.0)
        .map(|m| (m as f64, u[m].ln()))
        .collect();
    let none = TailFit {
        mode,
        period,
        constant: 0.0,
        rate: None,
        tail: 0.0,
    };
    if mode == TailMode::None || period == 0 || window.is_empty() {
        return Ok(none);
    }
    // First multiple of the period beyond N.
    let first = (horizon / period + 1) * period;
    match mode {
        TailMode::Power => {
            let s = d as f64 / 2.0;
            if s <= 1.0 {
                // m^{-d/2} is not summable: the walk is recurrent.
                return Err(f64::INFINITY);
            }
            let ln_c = window.iter().map(|(m, lu)| lu + s * m.ln()).sum::<f64>() / window.len() as f64;
            let constant = ln_c.exp();
            let p = period as f64;
            let tail = constant * p.powf(-s) * power_tail_sum((first / period) as f64, s);
            Ok(TailFit {
                mode,
                period,
                constant,
                rate: None,
                tail,
            })
        }
        TailMode::Geometric => {
            if window.len() < 2 {
                return Ok(none);
            }
            let k = window.len() as f64;
            let mx = window.iter().map(|w| w.0).sum::<f64>() / k;
            let my = window.iter().map(|w| w.1).sum::<f64>() / k;
            let sxx: f64 = window.iter().map(|w| (w.0 - mx).powi(2)).sum();
            let sxy: f64 = window.iter().map(|w| (w.0 - mx) * (w.1 - my)).sum();
            let slope = sxy / sxx;
            if !(slope < 0.0) {
                return Err(f64::INFINITY);
            }
            let intercept = my - slope * mx;
            let rate = slope.exp();
            let tail = (intercept + slope * first as f64).exp() / (1.0 - rate.powi(period as i32));
            Ok(TailFit {
                mode,
                period,
                constant: intercept.exp(),
                rate: Some(rate),
                tail,
            })
        }
        TailMode::Auto | TailMode::None => unreachable!("resolved above"),
    }
}

/// Green's function at the origin, G = Σ_{m≥0} P(S_m = 0), truncated at N
/// with an extrapolated tail.
pub fn green_series(law: &StepLaw, horizon: usize, mode: TailMode) -> Result<GreenSeries> {
    let returns = return_probabilities(law, horizon)?;
    green_series_from(law, &returns, mode)
}

pub fn green_series_from(law: &StepLaw, returns: &ReturnProbabilities, mode: TailMode) -> Result<GreenSeries> {
    let u = &returns.u;
    let horizon = u.len() - 1;
    let mode = resolve_mode(law, mode);
    let recurrent = |change: f64| Error::SuspectedRecurrence {
        horizon,
        change,
        threshold: RECURRENCE_THRESHOLD,
    };
    let fit = fit_tail(u, horizon, law.dim(), mode).map_err(recurrent)?;
    let partial_sum: f64 = u.iter().sum();
    let half = horizon / 2;
    let cauchy_change = if half >= 2 && mode != TailMode::None {
        let half_fit = fit_tail(u, half, law.dim(), mode).map_err(recurrent)?;
        let half_total: f64 = u[..=half].iter().sum::<f64>() + half_fit.tail;
        let total = partial_sum + fit.tail;
        (total - half_total).abs() / total
    } else {
        0.0
    };
    if cauchy_change > RECURRENCE_THRESHOLD {
        return Err(recurrent(cauchy_change));
    }
    Ok(GreenSeries {
        horizon,
        partial_sum,
        fit,
        route: returns.route,
        cauchy_change,
    })
}

/// γ = 1 / G via the renewal identity, with the tail's effect on γ as the
/// reported error.
pub fn green_at_origin(law: &StepLaw, horizon: usize, mode: TailMode) -> Result<GammaEstimate> {
    let returns = return_probabilities(law, horizon)?;
    let series = green_series_from(law, &returns, mode)?;
    let total = series.total();
    let value = 1.0 / total;
    let tail_effect = 1.0 / series.partial_sum - value;
    let prune_effect = value * value * returns.pruned * (horizon as f64 + 1.0);
    let mut params = BTreeMap::new();
    params.insert("N".into(), json!(horizon));
    params.insert("tail_mode".into(), json!(series.fit.mode));
    params.insert("partial_sum".into(), json!(series.partial_sum));
    params.insert("tail".into(), json!(series.fit.tail));
    params.insert("period".into(), json!(series.fit.period));
    params.insert("route".into(), json!(series.route));
    params.insert("cauchy_change".into(), json!(series.cauchy_change));
    Ok(GammaEstimate {
        method: GammaMethod::GreenSeries,
        value,
        error: tail_effect + prune_effect,
        params,
        seed: None,
    })
}

/// γ(N) from the taboo program, reported as an estimate of γ. It is biased
/// upward by γ(N) − γ.
pub fn taboo_estimate(law: &StepLaw, horizon: usize) -> Result<GammaEstimate> {
    let ret = taboo_survival::<f64>(law, horizon)?;
    let mut params = BTreeMap::new();
    params.insert("N".into(), json!(horizon));
    params.insert("estimates".into(), json!("gamma(N)"));
    Ok(GammaEstimate {
        method: GammaMethod::TabooDp,
        value: *ret.gamma(horizon),
        error: ret.prune_error(),
        params,
        seed: None,
    })
}

fn escapes<R: rand::Rng + ?Sized>(sampler: &StepSampler, n: u64, rng: &mut R) -> bool {
    let mut pos = vec![0i64; sampler.dim()];
    for _ in 0..n {
        let inc = sampler.step(sampler.sample_index(rng));
        let mut at_origin = true;
        for (x, dx) in pos.iter_mut().zip(inc) {
            *x += dx;
            at_origin &= *x == 0;
        }
        if at_origin {
            return false;
        }
    }
    true
}

/// Fraction of `replicas` independent n-step walks that never revisit the
/// origin. This estimates γ(n) ≥ γ; no bias correction is applied.
pub fn mc_escape(law: &StepLaw, n: u64, replicas: u64, seed: u64) -> Result<GammaEstimate> {
    if n == 0 || replicas == 0 {
        return Err(Error::BadParam("mc_escape needs n >= 1 and M >= 1".into()));
    }
    let sampler = law.sampler();
    let survivors: u64 = (0..replicas)
        .into_par_iter()
        .map(|i| u64::from(escapes(&sampler, n, &mut replica_rng(seed, i))))
        .sum();
    let v = survivors as f64 / replicas as f64;
    let mut params = BTreeMap::new();
    params.insert("n".into(), json!(n));
    params.insert("M".into(), json!(replicas));
    params.insert("estimates".into(), json!("gamma(n)"));
    Ok(GammaEstimate {
        method: GammaMethod::McEscape,
        value: v,
        error: (v * (1.0 - v) / replicas as f64).sqrt(),
        params,
        seed: Some(seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailWindow {
    pub from: usize,
    pub to: usize,
    /// Decay slope −log₂(T(to)/T(from)); infinite when T(to) underflows.
    pub slope: f64,
}

/// Partial tails T(k) = Σ_{j=k}^{N} P(S_j = 0) on a dyadic grid of starts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnTail {
    pub start: usize,
    pub horizon: usize,
    pub value: f64,
    /// Log-log decay exponent of T over the grid; infinite when the tail
    /// vanishes at float resolution.
    pub eta_hat: f64,
    pub infinite_decay: bool,
    pub grid: Vec<(usize, f64)>,
    pub windows: Vec<TailWindow>,
}

/// Diagnostic for the low-dimensional tail condition Σ_{k≥n} P(S_k=0) =
/// O(n^{−η}). Grid points stop at N/8 so truncation at N does not bend the
/// fitted slope.
pub fn return_tail(law: &StepLaw, start: usize, horizon: usize) -> Result<ReturnTail> {
    if start >= horizon {
        return Err(Error::BadParam(format!("tail start {start} must be below N = {horizon}")));
    }
    let u = return_probabilities(law, horizon)?.u;
    let mut suffix = vec![0.0; horizon + 2];
    for k in (0..=horizon).rev() {
        suffix[k] = suffix[k + 1] + u[k];
    }
    let first = start.max(1);
    let mut grid = vec![(first, suffix[first])];
    let mut k = first;
    while 2 * k <= horizon / 8 {
        k *= 2;
        grid.push((k, suffix[k]));
    }
    let windows: Vec<TailWindow> = grid
        .windows(2)
        .map(|w| TailWindow {
            from: w[0].0,
            to: w[1].0,
            slope: if w[1].1 > 0.0 && w[0].1 > 0.0 {
                -(w[1].1 / w[0].1).log2()
            } else {
                f64::INFINITY
            },
        })
        .collect();
    let infinite_decay = grid.iter().any(|g| g.1 <= 0.0);
    let eta_hat = if infinite_decay {
        f64::INFINITY
    } else if grid.len() >= 2 {
        let pts: Vec<(f64, f64)> = grid.iter().map(|&(k, t)| ((k as f64).ln(), t.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        -sxy / sxx
    } else {
        f64::NAN
    };
    Ok(ReturnTail {
        start,
        horizon,
        value: suffix[start],
        eta_hat,
        infinite_decay,
        grid,
        windows,
    })
}
