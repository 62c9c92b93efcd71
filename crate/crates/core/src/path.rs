//! Walk simulation and local-time accounting.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, WalkRng};
use crate::steps::{LatticePoint, StepLaw, StepSampler};

/// Default cap on the number of distinct visited sites kept in memory.
pub const DEFAULT_KEY_BUDGET: usize = 1 << 27;

/// Integer exponents up to this use exact 128-bit accumulation.
pub const MAX_EXACT_ALPHA: u32 = 8;

/// Visit counts ℓ(n, x) of one path up to horizon n.
#[derive(Clone, Debug)]
pub struct LocalTimeField {
    n: u64,
    d: usize,
    counts: FxHashMap<LatticePoint, u64>,
}

impl LocalTimeField {
    pub fn horizon(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// R(n), the number of distinct visited sites.
    pub fn range(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn count(&self, x: &[i64]) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&LatticePoint, u64)> + '_ {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn total_visits(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Builds a field from explicit counts; used to state small examples.
    /// The counts must sum to `n + 1` and include the origin.
    pub fn from_counts(n: u64, counts: Vec<(LatticePoint, u64)>) -> Result<Self> {
        let d = counts.first().map_or(0, |(p, _)| p.dim());
        let mut map = FxHashMap::default();
        for (p, c) in counts {
            if c == 0 || p.dim() != d || map.insert(p, c).is_some() {
                return Err(Error::BadParam("counts must be positive with distinct points".into()));
            }
        }
        let field = LocalTimeField { n, d, counts: map };
        if field.total_visits() != n + 1 || field.count(&vec![0; d]) == 0 {
            return Err(Error::BadParam("counts must sum to n + 1 and include the origin".into()));
        }
        Ok(field)
    }

    /// Visit counts in lexicographic order of their sites.
    pub fn snapshot(&self) -> VisitedSnapshot {
        let mut pairs: Vec<(&LatticePoint, u64)> = self.counts().collect();
        pairs.sort_unstable_by(|a, b| a.0.cmp(b.0));
        VisitedSnapshot {
            counts: pairs.into_iter().map(|(_, c)| c).collect(),
        }
    }
}

/// Indexable view of the visited sites used for uniform site sampling.
#[derive(Clone, Debug)]
pub struct VisitedSnapshot {
    counts: Vec<u64>,
}

impl VisitedSnapshot {
    pub fn range(&self) -> usize {
        self.counts.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.counts[rng.random_range(0..self.counts.len())]
    }
}

/// Steps a single path and keeps its local times.
struct Walker<'a> {
    sampler: &'a StepSampler,
    pos: Vec<i64>,
    counts: FxHashMap<LatticePoint, u64>,
    time: u64,
    key_budget: usize,
}

impl<'a> Walker<'a> {
    fn new(sampler: &'a StepSampler, key_budget: usize) -> Self {
        let d = sampler.dim();
        let mut counts = FxHashMap::default();
        counts.insert(LatticePoint::origin(d), 1);
        Walker {
            sampler,
            pos: vec![0; d],
            counts,
            time: 0,
            key_budget,
        }
    }

    /// Advances one step and returns the count of the new site before the
    /// visit.
    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u64> {
        let inc = self.sampler.step(self.sampler.sample_index(rng));
        for (x, dx) in self.pos.iter_mut().zip(inc) {
            *x += dx;
        }
        self.time += 1;
        if let Some(c) = self.counts.get_mut(self.pos.as_slice()) {
            let before = *c;
            *c += 1;
            return Ok(before);
        }
        if self.counts.len() >= self.key_budget {
            return Err(Error::ResourceLimit {
                what: "local-time field sites",
                needed: self.counts.len() as u128 + 1,
                budget: self.key_budget as u128,
            });
        }
        self.counts.insert(LatticePoint::new(self.pos.clone()), 1);
        Ok(0)
    }

    fn into_field(self) -> LocalTimeField {
        LocalTimeField {
            n: self.time,
            d: self.sampler.dim(),
            counts: self.counts,
        }
    }
}

pub fn simulate(law: &StepLaw, n: u64, seed: u64) -> Result<LocalTimeField> {
    simulate_with_rng(law, n, &mut rng_from_seed(seed), DEFAULT_KEY_BUDGET)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    law: &StepLaw,
    n: u64,
    rng: &mut R,
    key_budget: usize,
) -> Result<LocalTimeField> {
    let sampler = law.sampler();
    let mut walker = Walker::new(&sampler, key_budget);
    for _ in 0..n {
        walker.step(rng)?;
    }
    Ok(walker.into_field())
}

/// L_n(α) = Σ_x ℓ(n,x)^α over the visited sites. α = 0 gives the range.
pub fn l_alpha(field: &LocalTimeField, alpha: f64) -> f64 {
    assert!(alpha >= 0.0, "alpha must be nonnegative");
    if alpha == 0.0 {
        return field.range() as f64;
    }
    if let Some(k) = exact_exponent(alpha) {
        if let Some(v) = l_alpha_exact(field, k) {
            return v as f64;
        }
    }
    field.counts.values().map(|&c| (c as f64).powf(alpha)).sum()
}

/// Σ_x ℓ(n,x)^k in integer arithmetic; `None` on overflow.
pub fn l_alpha_exact(field: &LocalTimeField, k: u32) -> Option<u128> {
    field
        .counts
        .values()
        .try_fold(0u128, |acc, &c| acc.checked_add((c as u128).checked_pow(k)?))
}

fn exact_exponent(alpha: f64) -> Option<u32> {
    (alpha.fract() == 0.0 && alpha <= MAX_EXACT_ALPHA as f64).then_some(alpha as u32)
}

/// Q_j(n): number of sites visited exactly j times.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QHistogram {
    pub n: u64,
    pub buckets: BTreeMap<u64, u64>,
}

impl QHistogram {
    pub fn range(&self) -> u64 {
        self.buckets.values().sum()
    }

    pub fn visits(&self) -> u64 {
        self.buckets.iter().map(|(j, q)| j * q).sum()
    }

    pub fn get(&self, j: u64) -> u64 {
        self.buckets.get(&j).copied().unwrap_or(0)
    }

    /// Σ_j j^k Q_j(n), exact.
    pub fn moment(&self, k: u32) -> Option<u128> {
        self.buckets.iter().try_fold(0u128, |acc, (&j, &q)| {
            acc.checked_add((j as u128).checked_pow(k)?.checked_mul(q as u128)?)
        })
    }
}

pub fn q_histogram(field: &LocalTimeField) -> QHistogram {
    let mut buckets = BTreeMap::new();
    for &c in field.counts.values() {
        *buckets.entry(c).or_insert(0) += 1;
    }
    QHistogram {
        n: field.n,
        buckets,
    }
}

/// `m` independent draws of ℓ(n, Y_n) with Y_n uniform on the visited sites.
pub fn sample_visited_local_time<R: Rng + ?Sized>(field: &LocalTimeField, rng: &mut R, m: usize) -> Vec<u64> {
    let snap = field.snapshot();
    (0..m).map(|_| snap.draw(rng)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointRecord {
    pub n: u64,
    /// L_n(α) per requested α, in request order.
    pub l: Vec<f64>,
    /// Exact integer value where the exponent is an integer ≤ 8 and no
    /// overflow occurred.
    pub l_exact: Vec<Option<u128>>,
    pub range: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointSeries {
    pub alphas: Vec<f64>,
    pub records: Vec<CheckpointRecord>,
}

#[derive(Clone, Copy, Debug)]
enum Running {
    Exact(u32, u128),
    Float(f64, f64),
}

impl Running {
    fn new(alpha: f64) -> Self {
        // Origin visited once at time 0.
        match exact_exponent(alpha) {
            Some(k) => Running::Exact(k, 1),
            None => Running::Float(alpha, 1.0),
        }
    }

    /// A site's count rose from `before` to `before + 1`.
    #[inline]
    fn bump(&mut self, before: u64) {
        match self {
            Running::Exact(0, acc) => *acc += u128::from(before == 0),
            Running::Exact(k, acc) => {
                let up = (before as u128 + 1).checked_pow(*k);
                let down = (before as u128).checked_pow(*k);
                match (up, down) {
                    (Some(u), Some(dn)) if acc.checked_add(u - dn).is_some() => *acc += u - dn,
                    _ => {
                        let alpha = *k as f64;
                        let v = *acc as f64 + increment(alpha, before);
                        *self = Running::Float(alpha, v);
                    }
                }
            }
            Running::Float(alpha, acc) => *acc += increment(*alpha, before),
        }
    }

    fn value(&self) -> (f64, Option<u128>) {
        match *self {
            Running::Exact(_, v) => (v as f64, Some(v)),
            Running::Float(_, v) => (v, None),
        }
    }
}

#[inline]
fn increment(alpha: f64, before: u64) -> f64 {
    if alpha == 0.0 {
        return if before == 0 { 1.0 } else { 0.0 };
    }
    let c = before as f64;
    (c + 1.0).powf(alpha) - if before == 0 { 0.0 } else { c.powf(alpha) }
}

/// One path, evaluated at each checkpoint. L(α) is updated incrementally by
/// (c+1)^α − c^α whenever a site's count goes from c to c+1.
pub fn simulate_series(law: &StepLaw, checkpoints: &[u64], alphas: &[f64], seed: u64) -> Result<CheckpointSeries> {
    simulate_series_with_rng(law, checkpoints, alphas, &mut rng_from_seed(seed), DEFAULT_KEY_BUDGET)
}

pub fn simulate_series_with_rng(
    law: &StepLaw,
    checkpoints: &[u64],
    alphas: &[f64],
    rng: &mut WalkRng,
    key_budget: usize,
) -> Result<CheckpointSeries> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadParam("checkpoints must be strictly increasing".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(Error::BadParam(format!("alpha = {a} must be a finite nonnegative number")));
    }
    let sampler = law.sampler();
    let mut walker = Walker::new(&sampler, key_budget);
    let mut running: Vec<Running> = alphas.iter().map(|&a| Running::new(a)).collect();
    let mut records = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        while walker.time < target {
            let before = walker.step(rng)?;
            for r in &mut running {
                r.bump(before);
            }
        }
        let (l, l_exact) = running.iter().map(Running::value).unzip();
        records.push(CheckpointRecord {
            n: target,
            l,
            l_exact,
            range: walker.counts.len() as u64,
        });
    }
    Ok(CheckpointSeries {
        alphas: alphas.to_vec(),
        records,
    })
}

fn ratio(x: f64, n: u64) -> f64 {
    x / n as f64
}

impl CheckpointSeries {
    pub const CSV_HEADER: &'static str = "n,alpha,L,L_over_n,R,R_over_n";

    /// One row per (checkpoint, α).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for rec in &self.records {
            for (i, alpha) in self.alphas.iter().enumerate() {
                let l = match rec.l_exact[i] {
                    Some(v) => v.to_string(),
                    None => rec.l[i].to_string(),
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    rec.n,
                    alpha,
                    l,
                    ratio(rec.l[i], rec.n),
                    rec.range,
                    ratio(rec.range as f64, rec.n)
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn last(&self) -> Option<&CheckpointRecord> {
        self.records.last()
    }
}
