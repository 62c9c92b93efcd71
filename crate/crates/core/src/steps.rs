//! Finite-support step laws on Z^d.
//!
//! A [`StepLaw`] is validated on construction: masses are positive and sum
//! to one, and the support spans R^d. Because S_0 = 0, every support point is
//! itself a difference of reachable points, and every difference of reachable
//! points is an integer combination of support points. For finite support the
//! "genuinely d-dimensional" condition on the reachable-difference set is
//! therefore the same as the support having real rank d.
//!
//! Atoms are kept sorted lexicographically by coordinates. Sampling walks an
//! inverse CDF in that order, so a `(seed, law)` pair fixes the step stream
//! independently of how the law was written down.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::{format_rational, parse_rational, rational_from_f64, rational_to_f64};

/// Float laws must sum to one within this.
pub const FLOAT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn origin(d: usize) -> Self {
        LatticePoint(vec![0; d])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

impl Borrow<[i64]> for LatticePoint {
    fn borrow(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Masses {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// One unvalidated atom mass.
#[derive(Clone, Debug, PartialEq)]
pub enum RawMass {
    Exact(BigRational),
    Float(f64),
}

#[derive(Clone, Debug)]
pub struct RawLaw {
    pub d: usize,
    pub atoms: Vec<(LatticePoint, RawMass)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw {
    d: usize,
    points: Vec<LatticePoint>,
    masses: Masses,
}

/// Validates a raw atom list into a [`StepLaw`].
///
/// All masses must be of one kind; mixing rational and float atoms is
/// rejected rather than silently rounded.
pub fn validate(raw: RawLaw) -> Result<StepLaw> {
    let d = raw.d;
    if d == 0 {
        return Err(Error::BadParam("dimension must be at least 1".into()));
    }
    if raw.atoms.is_empty() {
        return Err(Error::NotAProbability("no atoms".into()));
    }
    let mut atoms = raw.atoms;
    for (p, _) in &atoms {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
    }
    atoms.sort_by(|a, b| a.0.cmp(&b.0));
    for w in atoms.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateAtom(w[0].0.clone()));
        }
    }
    let exact = matches!(atoms[0].1, RawMass::Exact(_));
    let (points, masses): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
    let masses = if exact {
        let mut out = Vec::with_capacity(masses.len());
        for m in masses {
            match m {
                RawMass::Exact(q) => out.push(q),
                RawMass::Float(_) => {
                    return Err(Error::NotAProbability("mixed rational and float masses".into()))
                }
            }
        }
        if let Some(bad) = out.iter().find(|q| !q.is_positive()) {
            return Err(Error::NotAProbability(format!(
                "mass {} is not positive",
                format_rational(bad)
            )));
        }
        let total: BigRational = out.iter().sum();
        if !total.is_one() {
            return Err(Error::NotAProbability(format!(
                "masses sum to {}",
                format_rational(&total)
            )));
        }
        Masses::Exact(out)
    } else {
        let mut out = Vec::with_capacity(masses.len());
        for m in masses {
            match m {
                RawMass::Float(x) => out.push(x),
                RawMass::Exact(_) => {
                    return Err(Error::NotAProbability("mixed rational and float masses".into()))
                }
            }
        }
        if let Some(bad) = out.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::NotAProbability(format!("mass {bad} is not positive")));
        }
        let total: f64 = out.iter().sum();
        if (total - 1.0).abs() > FLOAT_SUM_TOL {
            return Err(Error::NotAProbability(format!("masses sum to {total}")));
        }
        Masses::Float(out)
    };
    let rank = support_rank(&points);
    if rank < d {
        return Err(Error::DegenerateDimension { rank, d });
    }
    Ok(StepLaw { d, points, masses })
}

/// Real rank of the matrix whose rows are the given points.
fn support_rank(points: &[LatticePoint]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = points
        .iter()
        .map(|p| p.coords().iter().map(|&c| BigRational::from_integer(c.into())).collect())
        .collect();
    let cols = points.first().map_or(0, LatticePoint::dim);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = &row[col] / &pivot_row[col];
            for (x, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *x -= &factor * p;
            }
        }
        rank += 1;
    }
    rank
}

impl StepLaw {
    pub fn exact(d: usize, atoms: Vec<(LatticePoint, BigRational)>) -> Result<Self> {
        validate(RawLaw {
            d,
            atoms: atoms.into_iter().map(|(p, q)| (p, RawMass::Exact(q))).collect(),
        })
    }

    pub fn float(d: usize, atoms: Vec<(LatticePoint, f64)>) -> Result<Self> {
        validate(RawLaw {
            d,
            atoms: atoms.into_iter().map(|(p, x)| (p, RawMass::Float(x))).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Support points in lexicographic order.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn masses(&self) -> &Masses {
        &self.masses
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact(_))
    }

    pub fn exact_masses(&self) -> Option<&[BigRational]> {
        match &self.masses {
            Masses::Exact(q) => Some(q),
            Masses::Float(_) => None,
        }
    }

    /// Masses as doubles (rounded when the law is exact).
    pub fn float_masses(&self) -> Vec<f64> {
        match &self.masses {
            Masses::Exact(q) => q.iter().map(rational_to_f64).collect(),
            Masses::Float(x) => x.clone(),
        }
    }

    /// `(point, mass)` pairs with masses as doubles.
    pub fn atoms(&self) -> impl Iterator<Item = (&LatticePoint, f64)> + '_ {
        self.points.iter().zip(self.float_masses())
    }

    pub fn to_float(&self) -> StepLaw {
        StepLaw {
            d: self.d,
            points: self.points.clone(),
            masses: Masses::Float(self.float_masses()),
        }
    }

    /// Reads each float mass as the rational given by its shortest decimal
    /// rendering and revalidates; fails if those rationals do not sum to 1.
    pub fn to_exact(&self) -> Result<StepLaw> {
        match &self.masses {
            Masses::Exact(_) => Ok(self.clone()),
            Masses::Float(x) => {
                let atoms = self
                    .points
                    .iter()
                    .cloned()
                    .zip(x.iter().map(|&m| rational_from_f64(m)))
                    .map(|(p, q)| q.map(|q| (p, q)))
                    .collect::<Result<Vec<_>>>()?;
                StepLaw::exact(self.d, atoms)
            }
        }
    }

    /// Whether the zero vector is an atom.
    pub fn has_zero_step(&self) -> bool {
        self.points.iter().any(LatticePoint::is_origin)
    }

    /// Per-axis `(min, max)` of the support coordinates.
    pub fn axis_extent(&self) -> Vec<(i64, i64)> {
        (0..self.d)
            .map(|k| {
                let it = self.points.iter().map(|p| p.coords()[k]);
                (it.clone().min().unwrap_or(0), it.max().unwrap_or(0))
            })
            .collect()
    }

    pub fn sampler(&self) -> StepSampler {
        StepSampler::new(self)
    }

    pub fn moments(&self) -> Moments {
        mean_and_second_moment(self)
    }

    pub fn describe(&self) -> String {
        let masses: Vec<String> = match &self.masses {
            Masses::Exact(q) => q.iter().map(format_rational).collect(),
            Masses::Float(x) => x.iter().map(|m| m.to_string()).collect(),
        };
        let atoms: Vec<String> = self
            .points
            .iter()
            .zip(masses)
            .map(|(p, m)| format!("{p}:{m}"))
            .collect();
        format!("d={} {{{}}}", self.d, atoms.join(", "))
    }
}

/// Inverse-CDF sampler over the lexicographic atom order.
#[derive(Clone, Debug)]
pub struct StepSampler {
    d: usize,
    coords: Vec<i64>,
    cdf: Vec<f64>,
}

impl StepSampler {
    fn new(law: &StepLaw) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = law
            .float_masses()
            .into_iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        StepSampler {
            d: law.dim(),
            coords: law.points().iter().flat_map(|p| p.coords().iter().copied()).collect(),
            cdf,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // Few atoms: a linear scan beats bisection.
        let mut i = 0;
        while self.cdf[i] <= u {
            i += 1;
        }
        i
    }

    #[inline]
    pub fn step(&self, index: usize) -> &[i64] {
        &self.coords[index * self.d..(index + 1) * self.d]
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        LatticePoint(self.step(self.sample_index(rng)).to_vec())
    }
}

pub fn sample_step<R: Rng + ?Sized>(law: &StepLaw, rng: &mut R) -> LatticePoint {
    law.sampler().sample_step(rng)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// `E[X_a X_b]`
    pub second: Vec<Vec<f64>>,
}

pub fn mean_and_second_moment(law: &StepLaw) -> Moments {
    let d = law.dim();
    match law.masses() {
        Masses::Exact(q) => {
            let mut mean = vec![BigRational::zero(); d];
            let mut second = vec![vec![BigRational::zero(); d]; d];
            for (p, m) in law.points().iter().zip(q) {
                let c = p.coords();
                for a in 0..d {
                    mean[a] += m * BigRational::from_integer(c[a].into());
                    for b in 0..d {
                        second[a][b] += m * BigRational::from_integer((c[a] * c[b]).into());
                    }
                }
            }
            Moments {
                mean: mean.iter().map(rational_to_f64).collect(),
                second: second
                    .iter()
                    .map(|r| r.iter().map(rational_to_f64).collect())
                    .collect(),
            }
        }
        Masses::Float(x) => {
            let mut mean = vec![0.0; d];
            let mut second = vec![vec![0.0; d]; d];
            for (p, &m) in law.points().iter().zip(x) {
                let c = p.coords();
                for a in 0..d {
                    mean[a] += m * c[a] as f64;
                    for b in 0..d {
                        second[a][b] += m * (c[a] * c[b]) as f64;
                    }
                }
            }
            Moments { mean, second }
        }
    }
}

/// Parameters of the builtin families. Unused fields are ignored.
#[derive(Clone, Debug, Default)]
pub struct FamilyParams {
    pub p: Option<BigRational>,
    pub bias: Option<BigRational>,
    pub v: Option<Vec<i64>>,
}

pub const FAMILIES: [&str; 4] = ["srw", "bernoulli", "drifted_srw", "deterministic"];

fn unit(d: usize, axis: usize, sign: i64) -> LatticePoint {
    let mut c = vec![0; d];
    c[axis] = sign;
    LatticePoint(c)
}

/// Builds a named family.
///
/// - `srw`: mass 1/(2d) on each of the 2d unit vectors.
/// - `bernoulli`: d = 1, mass p on +1 and 1 − p on −1.
/// - `drifted_srw`: SRW with the first axis reweighted to (1 ± bias)/(2d).
/// - `deterministic`: mass 1 on `v`.
pub fn builtin(name: &str, d: usize, params: &FamilyParams) -> Result<StepLaw> {
    let q = |n: i64, m: i64| BigRational::new(n.into(), m.into());
    match name {
        "srw" => {
            if d == 0 {
                return Err(Error::BadParam("srw needs d >= 1".into()));
            }
            let w = q(1, 2 * d as i64);
            let atoms = (0..d)
                .flat_map(|k| [unit(d, k, 1), unit(d, k, -1)])
                .map(|p| (p, w.clone()))
                .collect();
            StepLaw::exact(d, atoms)
        }
        "bernoulli" => {
            if d != 1 {
                return Err(Error::BadParam(format!("bernoulli lives in d = 1, not {d}")));
            }
            let p = params
                .p
                .clone()
                .ok_or_else(|| Error::BadParam("bernoulli needs p".into()))?;
            if !(p.is_positive() && p < BigRational::one()) {
                return Err(Error::BadParam(format!("p = {} not in (0,1)", format_rational(&p))));
            }
            let rest = BigRational::one() - &p;
            StepLaw::exact(1, vec![(LatticePoint(vec![1]), p), (LatticePoint(vec![-1]), rest)])
        }
        "drifted_srw" => {
            if d == 0 {
                return Err(Error::BadParam("drifted_srw needs d >= 1".into()));
            }
            let bias = params
                .bias
                .clone()
                .ok_or_else(|| Error::BadParam("drifted_srw needs bias".into()))?;
            if !(bias.abs() < BigRational::one()) {
                return Err(Error::BadParam(format!(
                    "bias = {} not in (-1,1)",
                    format_rational(&bias)
                )));
            }
            let w = q(1, 2 * d as i64);
            let mut atoms = Vec::with_capacity(2 * d);
            atoms.push((unit(d, 0, 1), &w * (BigRational::one() + &bias)));
            atoms.push((unit(d, 0, -1), &w * (BigRational::one() - &bias)));
            for k in 1..d {
                atoms.push((unit(d, k, 1), w.clone()));
                atoms.push((unit(d, k, -1), w.clone()));
            }
            StepLaw::exact(d, atoms)
        }
        "deterministic" => {
            let v = params
                .v
                .clone()
                .ok_or_else(|| Error::BadParam("deterministic needs v".into()))?;
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            StepLaw::exact(d, vec![(LatticePoint(v), BigRational::one())])
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

pub fn srw(d: usize) -> StepLaw {
    builtin("srw", d, &FamilyParams::default()).expect("srw is valid for d >= 1")
}

pub fn bernoulli(p: f64) -> Result<StepLaw> {
    builtin(
        "bernoulli",
        1,
        &FamilyParams {
            p: Some(rational_from_f64(p)?),
            ..Default::default()
        },
    )
}

pub fn drifted_srw(d: usize, bias: f64) -> Result<StepLaw> {
    builtin(
        "drifted_srw",
        d,
        &FamilyParams {
            bias: Some(rational_from_f64(bias)?),
            ..Default::default()
        },
    )
}

pub fn deterministic(v: Vec<i64>) -> Result<StepLaw> {
    let d = v.len();
    builtin(
        "deterministic",
        d,
        &FamilyParams {
            v: Some(v),
            ..Default::default()
        },
    )
}

/// A mass written in JSON: a number, or a string holding `"a/b"` or a decimal.
/// Both are read exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassValue {
    Number(f64),
    Text(String),
}

impl MassValue {
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            MassValue::Number(x) => rational_from_f64(*x),
            MassValue::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: Vec<i64>,
    pub p: MassValue,
}

fn one() -> usize {
    1
}

/// JSON form of a step law, e.g. `{"family": "bernoulli", "d": 1, "p": 0.7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Srw {
        d: usize,
    },
    Bernoulli {
        #[serde(default = "one")]
        d: usize,
        p: MassValue,
    },
    DriftedSrw {
        d: usize,
        bias: MassValue,
    },
    Deterministic {
        d: usize,
        v: Vec<i64>,
    },
    Custom {
        d: usize,
        atoms: Vec<AtomSpec>,
    },
}

impl LawSpec {
    /// Parses a JSON value, reporting an unrecognised `family` as
    /// [`Error::UnknownFamily`] rather than a generic schema error.
    pub fn from_value(value: &serde_json::Value) -> Result<Self> {
        if let Some(f) = value.get("family").and_then(|f| f.as_str()) {
            if f != "custom" && !FAMILIES.contains(&f) {
                return Err(Error::UnknownFamily(f.to_string()));
            }
        }
        Ok(serde_json::from_value(value.clone())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<StepLaw> {
        match self {
            LawSpec::Srw { d } => builtin("srw", *d, &FamilyParams::default()),
            LawSpec::Bernoulli { d, p } => builtin(
                "bernoulli",
                *d,
                &FamilyParams {
                    p: Some(p.to_rational()?),
                    ..Default::default()
                },
            ),
            LawSpec::DriftedSrw { d, bias } => builtin(
                "drifted_srw",
                *d,
                &FamilyParams {
                    bias: Some(bias.to_rational()?),
                    ..Default::default()
                },
            ),
            LawSpec::Deterministic { d, v } => builtin(
                "deterministic",
                *d,
                &FamilyParams {
                    v: Some(v.clone()),
                    ..Default::default()
                },
            ),
            LawSpec::Custom { d, atoms } => {
                let atoms = atoms
                    .iter()
                    .map(|a| Ok((LatticePoint(a.x.clone()), a.p.to_rational()?)))
                    .collect::<Result<Vec<_>>>()?;
                StepLaw::exact(*d, atoms)
            }
        }
    }
}

/// Short identifier used in reports, e.g. `srw3` or `bernoulli(7/10)`.
pub fn law_label(spec: &LawSpec) -> String {
    match spec {
        LawSpec::Srw { d } => format!("srw{d}"),
        LawSpec::Bernoulli { p, .. } => format!("bernoulli({})", mass_label(p)),
        LawSpec::DriftedSrw { d, bias } => format!("drifted_srw{d}({})", mass_label(bias)),
        LawSpec::Deterministic { v, .. } => format!("deterministic{}", LatticePoint(v.clone())),
        LawSpec::Custom { d, atoms } => {
            let pts: BTreeSet<String> = atoms.iter().map(|a| LatticePoint(a.x.clone()).to_string()).collect();
            format!("custom{d}[{}]", pts.into_iter().collect::<Vec<_>>().join(" "))
        }
    }
}

fn mass_label(m: &MassValue) -> String {
    match m.to_rational() {
        Ok(q) => format_rational(&q),
        Err(_) => format!("{m:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec())
    }

    #[test]
    fn bernoulli_validates() {
        let law = StepLaw::float(1, vec![(pt(&[1]), 0.7), (pt(&[-1]), 0.3)]).unwrap();
        assert_eq!(law.points(), &[pt(&[-1]), pt(&[1])]);
        assert_eq!(law.float_masses(), vec![0.3, 0.7]);
    }

    #[test]
    fn line_in_plane_is_degenerate() {
        let err = StepLaw::exact(2, vec![(pt(&[1, 0]), q(1, 2)), (pt(&[2, 0]), q(1, 2))]).unwrap_err();
        assert!(matches!(err, Error::DegenerateDimension { rank: 1, d: 2 }));
    }

    #[test]
    fn srw3_validates() {
        let law = srw(3);
        assert_eq!(law.len(), 6);
        assert!(law.exact_masses().unwrap().iter().all(|m| *m == q(1, 6)));
    }

    #[test]
    fn rejects_bad_atom_lists() {
        assert!(matches!(
            StepLaw::exact(1, vec![(pt(&[1]), q(1, 2)), (pt(&[1]), q(1, 2))]),
            Err(Error::DuplicateAtom(_))
        ));
        assert!(matches!(
            StepLaw::exact(1, vec![(pt(&[1]), q(1, 2)), (pt(&[-1]), q(1, 3))]),
            Err(Error::NotAProbability(_))
        ));
        assert!(matches!(
            StepLaw::exact(1, vec![(pt(&[1]), q(3, 2)), (pt(&[-1]), q(-1, 2))]),
            Err(Error::NotAProbability(_))
        ));
        assert!(matches!(
            StepLaw::float(1, vec![(pt(&[1]), 0.7), (pt(&[-1]), 0.31)]),
            Err(Error::NotAProbability(_))
        ));
        assert!(matches!(
            StepLaw::float(2, vec![(pt(&[1]), 1.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            validate(RawLaw {
                d: 1,
                atoms: vec![
                    (pt(&[1]), RawMass::Exact(q(1, 2))),
                    (pt(&[-1]), RawMass::Float(0.5))
                ]
            }),
            Err(Error::NotAProbability(_))
        ));
    }

    #[test]
    fn builtins() {
        let b = bernoulli(0.7).unwrap();
        assert_eq!(b.exact_masses().unwrap(), &[q(3, 10), q(7, 10)]);
        let det = deterministic(vec![1]).unwrap();
        assert_eq!(det.len(), 1);
        let drift = drifted_srw(2, 0.5).unwrap();
        let m = drift.moments();
        assert!((m.mean[0] - 0.25).abs() < 1e-15 && m.mean[1] == 0.0);
        assert!(matches!(bernoulli(1.0), Err(Error::BadParam(_))));
        assert!(matches!(bernoulli(0.0), Err(Error::BadParam(_))));
        assert!(matches!(drifted_srw(3, 1.0), Err(Error::BadParam(_))));
        assert!(matches!(
            builtin("levy", 1, &FamilyParams::default()),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn moments_of_builtins() {
        let m = bernoulli(0.7).unwrap().moments();
        assert!((m.mean[0] - 0.4).abs() < 1e-15);
        assert_eq!(m.second[0][0], 1.0);
        let m = srw(3).moments();
        assert_eq!(m.mean, vec![0.0; 3]);
        assert!((m.second[1][1] - 1.0 / 3.0).abs() < 1e-15 && m.second[0][1] == 0.0);
        assert_eq!(deterministic(vec![1]).unwrap().moments().mean, vec![1.0]);
    }

    #[test]
    fn deterministic_sampler_is_constant() {
        let s = deterministic(vec![1]).unwrap().sampler();
        let mut rng = rng_from_seed(99);
        assert!((0..1000).all(|_| s.sample_step(&mut rng) == pt(&[1])));
    }

    #[test]
    fn order_of_input_does_not_change_stream() {
        let a = StepLaw::float(1, vec![(pt(&[1]), 0.7), (pt(&[-1]), 0.3)]).unwrap();
        let b = StepLaw::float(1, vec![(pt(&[-1]), 0.3), (pt(&[1]), 0.7)]).unwrap();
        let (mut ra, mut rb) = (rng_from_seed(5), rng_from_seed(5));
        let sa: Vec<_> = (0..100).map(|_| a.sampler().sample_step(&mut ra)).collect();
        let sb: Vec<_> = (0..100).map(|_| b.sampler().sample_step(&mut rb)).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn law_spec_json() {
        let spec = LawSpec::from_json(r#"{"family": "bernoulli", "d": 1, "p": 0.7}"#).unwrap();
        assert_eq!(spec.build().unwrap(), bernoulli(0.7).unwrap());
        let spec = LawSpec::from_json(
            r#"{"family": "custom", "d": 2, "atoms": [{"x": [1,0], "p": "1/3"}, {"x": [0,1], "p": "2/3"}]}"#,
        )
        .unwrap();
        let law = spec.build().unwrap();
        assert_eq!(law.exact_masses().unwrap(), &[q(2, 3), q(1, 3)]);
        assert!(matches!(
            LawSpec::from_json(r#"{"family": "cauchy", "d": 1}"#),
            Err(Error::UnknownFamily(_))
        ));
        assert!(LawSpec::from_json(r#"{"family": "srw", "d": 3, "extra": 1}"#).is_err());
        assert_eq!(law_label(&LawSpec::Srw { d: 3 }), "srw3");
    }

    #[test]
    fn zero_step_is_allowed() {
        let law = StepLaw::exact(
            1,
            vec![(pt(&[1]), q(1, 3)), (pt(&[0]), q(1, 3)), (pt(&[-1]), q(1, 3))],
        )
        .unwrap();
        assert!(law.has_zero_step());
        // 0.333.. three times is not exactly one.
        assert!(law.to_float().to_exact().is_err());
        let b = bernoulli(0.7).unwrap();
        assert_eq!(b.to_float().to_exact().unwrap(), b);
    }
}
