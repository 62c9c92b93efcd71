//! Exact ground truth by enumerating every path of a small horizon.
//!
//! All path weights are carried as integers over the common denominator of
//! the atom masses, so the enumeration itself never touches a rational; the
//! final division happens once per reported quantity.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::gamma::ReturnLaw;
use crate::steps::StepLaw;

pub const DEFAULT_PATH_BUDGET: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSummary {
    pub n: usize,
    pub alphas: Vec<u32>,
    /// E(Q_j(n)) for j = 1..=n+1, at index j − 1.
    pub expected_q: Vec<BigRational>,
    /// E(L_n(α)) per requested α.
    pub expected_l: Vec<BigRational>,
    pub second_moment_l: Vec<BigRational>,
    pub variance_l: Vec<BigRational>,
    /// Law of (R(n), ℓ(n, Y_n)) with Y_n uniform on the visited sites.
    pub joint: BTreeMap<(u64, u64), BigRational>,
    /// γ(k) for k = 0..=n.
    pub gammas: Vec<BigRational>,
}

impl ExactSummary {
    pub fn expected_q(&self, j: usize) -> BigRational {
        if j == 0 {
            return BigRational::zero();
        }
        self.expected_q.get(j - 1).cloned().unwrap_or_else(BigRational::zero)
    }
}

/// Integer view of the step law: steps, numerators over a common
/// denominator, and that denominator.
struct IntLaw {
    steps: Vec<Vec<i64>>,
    numers: Vec<u128>,
    denom: BigInt,
}

fn int_law(law: &StepLaw) -> Result<IntLaw> {
    let masses = law.exact_masses().ok_or(Error::FloatLawRejected)?;
    let denom = masses.iter().fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
    let numers = masses
        .iter()
        .map(|m| {
            (m.numer() * (&denom / m.denom()))
                .to_u128()
                .ok_or(Error::ResourceLimit {
                    what: "oracle weight bits",
                    needed: u128::MAX,
                    budget: u128::MAX,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntLaw {
        steps: law.points().iter().map(|p| p.coords().to_vec()).collect(),
        numers,
        denom,
    })
}

fn check_budget(k: usize, n: usize, budget: u128) -> Result<()> {
    let paths = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if paths > budget {
        return Err(Error::BudgetExceeded { paths, budget });
    }
    Ok(())
}

/// Fails when sums of `paths weight × value` with value ≤ `max_value` might
/// overflow u128.
fn check_headroom(denom: &BigInt, n: usize, max_value: &BigInt) -> Result<()> {
    let worst = num_traits::pow(denom.clone(), n) * max_value;
    if worst > BigInt::from(u128::MAX) {
        return Err(Error::ResourceLimit {
            what: "oracle accumulator bits",
            needed: worst.bits() as u128,
            budget: 128,
        });
    }
    Ok(())
}

#[derive(Clone)]
struct Acc {
    q: Vec<u128>,
    l: Vec<u128>,
    l2: Vec<u128>,
    /// `joint[r][u]` accumulates weight × Q_u for paths with range r.
    joint: Vec<Vec<u128>>,
    /// `first_return[t]`: weight of paths whose first return is at t
    /// (t = n + 1 for none).
    first_return: Vec<u128>,
}

impl Acc {
    fn new(n: usize, alphas: usize) -> Self {
        Acc {
            q: vec![0; n + 2],
            l: vec![0; alphas],
            l2: vec![0; alphas],
            joint: vec![vec![0; n + 2]; n + 2],
            first_return: vec![0; n + 2],
        }
    }

    fn merge(&mut self, other: &Acc) {
        let add = |a: &mut [u128], b: &[u128]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.q, &other.q);
        add(&mut self.l, &other.l);
        add(&mut self.l2, &other.l2);
        add(&mut self.first_return, &other.first_return);
        for (a, b) in self.joint.iter_mut().zip(&other.joint) {
            add(a, b);
        }
    }
}

struct Walk<'a> {
    law: &'a IntLaw,
    n: usize,
    alphas: &'a [u32],
    pos: Vec<i64>,
    counts: FxHashMap<Vec<i64>, u64>,
    /// hist[c] = number of sites with count c
    hist: Vec<u64>,
    range: u64,
    l: Vec<u128>,
    first_return: Option<usize>,
}

impl<'a> Walk<'a> {
    fn new(law: &'a IntLaw, n: usize, alphas: &'a [u32]) -> Self {
        let d = law.steps[0].len();
        let mut counts = FxHashMap::default();
        counts.insert(vec![0; d], 1);
        let mut hist = vec![0; n + 2];
        hist[1] = 1;
        Walk {
            law,
            n,
            alphas,
            pos: vec![0; d],
            counts,
            hist,
            range: 1,
            l: vec![1; alphas.len()],
            first_return: None,
        }
    }

    fn push(&mut self, atom: usize, depth: usize) -> (u64, bool) {
        for (x, dx) in self.pos.iter_mut().zip(&self.law.steps[atom]) {
            *x += dx;
        }
        let c = self.counts.entry(self.pos.clone()).or_insert(0);
        let before = *c;
        *c += 1;
        if before > 0 {
            self.hist[before as usize] -= 1;
        } else {
            self.range += 1;
        }
        self.hist[before as usize + 1] += 1;
        for (l, &a) in self.l.iter_mut().zip(self.alphas) {
            *l += (before as u128 + 1).pow(a) - if a == 0 && before == 0 { 0 } else { (before as u128).pow(a) };
        }
        let set_return = self.first_return.is_none() && self.pos.iter().all(|&x| x == 0);
        if set_return {
            self.first_return = Some(depth + 1);
        }
        (before, set_return)
    }

    fn pop(&mut self, atom: usize, before: u64, set_return: bool) {
        if set_return {
            self.first_return = None;
        }
        for (l, &a) in self.l.iter_mut().zip(self.alphas) {
            *l -= (before as u128 + 1).pow(a) - if a == 0 && before == 0 { 0 } else { (before as u128).pow(a) };
        }
        self.hist[before as usize + 1] -= 1;
        if before > 0 {
            self.hist[before as usize] += 1;
            *self.counts.get_mut(&self.pos).expect("visited") = before;
        } else {
            self.range -= 1;
            self.counts.remove(&self.pos);
        }
        for (x, dx) in self.pos.iter_mut().zip(&self.law.steps[atom]) {
            *x -= dx;
        }
    }

    fn leaf(&self, w: u128, acc: &mut Acc) {
        for (j, &h) in self.hist.iter().enumerate().skip(1) {
            if h > 0 {
                acc.q[j] += w * h as u128;
                acc.joint[self.range as usize][j] += w * h as u128;
            }
        }
        for (i, &l) in self.l.iter().enumerate() {
            acc.l[i] += w * l;
            acc.l2[i] += w * l * l;
        }
        acc.first_return[self.first_return.unwrap_or(self.n + 1)] += w;
    }

    fn dfs(&mut self, depth: usize, w: u128, acc: &mut Acc) {
        if depth == self.n {
            self.leaf(w, acc);
            return;
        }
        for atom in 0..self.law.steps.len() {
            let (before, set) = self.push(atom, depth);
            self.dfs(depth + 1, w * self.law.numers[atom], acc);
            self.pop(atom, before, set);
        }
    }
}

fn ratio(num: u128, den: &BigInt) -> BigRational {
    BigRational::new(BigInt::from(num), den.clone())
}

/// Enumerates all |support|^n paths and returns exact expectations.
pub fn enumerate(law: &StepLaw, n: usize, alphas: &[u32]) -> Result<ExactSummary> {
    enumerate_with_budget(law, n, alphas, DEFAULT_PATH_BUDGET)
}

pub fn enumerate_with_budget(law: &StepLaw, n: usize, alphas: &[u32], budget: u128) -> Result<ExactSummary> {
    let il = int_law(law)?;
    check_budget(il.steps.len(), n, budget)?;
    let top = alphas.iter().copied().max().unwrap_or(1).max(1);
    let max_l = num_traits::pow(BigInt::from(n + 1), top as usize);
    check_headroom(&il.denom, n, &(&max_l * &max_l + BigInt::from(n + 1)))?;

    let acc = if n == 0 {
        let mut acc = Acc::new(n, alphas.len());
        Walk::new(&il, n, alphas).leaf(1, &mut acc);
        acc
    } else {
        let parts: Vec<Acc> = (0..il.steps.len())
            .into_par_iter()
            .map(|atom| {
                let mut acc = Acc::new(n, alphas.len());
                let mut walk = Walk::new(&il, n, alphas);
                let (before, set) = walk.push(atom, 0);
                walk.dfs(1, il.numers[atom], &mut acc);
                walk.pop(atom, before, set);
                acc
            })
            .collect();
        let mut acc = Acc::new(n, alphas.len());
        for p in &parts {
            acc.merge(p);
        }
        acc
    };

    let total = num_traits::pow(il.denom.clone(), n);
    let expected_q = (1..=n + 1).map(|j| ratio(acc.q[j], &total)).collect();
    let expected_l: Vec<BigRational> = acc.l.iter().map(|&v| ratio(v, &total)).collect();
    let second_moment_l: Vec<BigRational> = acc.l2.iter().map(|&v| ratio(v, &total)).collect();
    let variance_l = expected_l
        .iter()
        .zip(&second_moment_l)
        .map(|(m, s)| s - m * m)
        .collect();
    let mut joint = BTreeMap::new();
    for (r, row) in acc.joint.iter().enumerate() {
        for (u, &v) in row.iter().enumerate() {
            if v > 0 {
                joint.insert((r as u64, u as u64), ratio(v, &(&total * BigInt::from(r))));
            }
        }
    }
    let mut gammas = Vec::with_capacity(n + 1);
    // γ(k) = P(first return > k)
    let mut survive: u128 = acc.first_return.iter().sum();
    for k in 0..=n {
        survive -= acc.first_return[k];
        gammas.push(ratio(survive, &total));
    }
    Ok(ExactSummary {
        n,
        alphas: alphas.to_vec(),
        expected_q,
        expected_l,
        second_moment_l,
        variance_l,
        joint,
        gammas,
    })
}

/// Law of ℓ(n, Y_n) averaged over paths: the joint law marginalised over R.
pub fn exact_zn_law(summary: &ExactSummary) -> BTreeMap<u64, BigRational> {
    let mut out: BTreeMap<u64, BigRational> = BTreeMap::new();
    for (&(_, u), p) in &summary.joint {
        *out.entry(u).or_insert_with(BigRational::zero) += p;
    }
    out
}

/// γ(k), k ≤ n, by enumerating paths up to their first return.
pub fn exact_return_law(law: &StepLaw, n: usize) -> Result<ReturnLaw<BigRational>> {
    exact_return_law_with_budget(law, n, DEFAULT_PATH_BUDGET)
}

pub fn exact_return_law_with_budget(law: &StepLaw, n: usize, budget: u128) -> Result<ReturnLaw<BigRational>> {
    let il = int_law(law)?;
    check_budget(il.steps.len(), n, budget)?;
    check_headroom(&il.denom, n, &BigInt::one())?;
    fn go(il: &IntLaw, pos: &mut Vec<i64>, depth: usize, n: usize, w: u128, taus: &mut [u128]) {
        if depth == n {
            return;
        }
        // Remaining weight scale: the numerators of the untaken steps.
        let scale = num_traits::pow(il.denom.to_u128().expect("checked"), n - depth - 1);
        for (step, &num) in il.steps.iter().zip(&il.numers) {
            for (x, dx) in pos.iter_mut().zip(step) {
                *x += dx;
            }
            if pos.iter().all(|&x| x == 0) {
                taus[depth + 1] += w * num * scale;
            } else {
                go(il, pos, depth + 1, n, w * num, taus);
            }
            for (x, dx) in pos.iter_mut().zip(step) {
                *x -= dx;
            }
        }
    }
    let d = il.steps[0].len();
    let parts: Vec<Vec<u128>> = (0..il.steps.len())
        .into_par_iter()
        .map(|atom| {
            let mut taus = vec![0u128; n + 1];
            if n == 0 {
                return taus;
            }
            let mut pos = il.steps[atom].clone();
            let num = il.numers[atom];
            if pos.iter().all(|&x| x == 0) {
                taus[1] += num * num_traits::pow(il.denom.to_u128().expect("checked"), n - 1);
            } else {
                go(&il, &mut pos, 1, n, num, &mut taus);
            }
            let _ = d;
            taus
        })
        .collect();
    let mut taus = vec![0u128; n + 1];
    for p in &parts {
        taus.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    let total = num_traits::pow(il.denom.clone(), n);
    let taus: Vec<BigRational> = taus[1..].iter().map(|&t| ratio(t, &total)).collect();
    Ok(ReturnLaw::from_taus(&taus, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steps::{bernoulli, deterministic, srw};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn bernoulli_two_steps() {
        let s = enumerate(&bernoulli(0.7).unwrap(), 2, &[2]).unwrap();
        assert_eq!(s.expected_q(1), q(216, 100));
        assert_eq!(s.expected_q(2), q(42, 100));
        assert_eq!(s.expected_q(3), q(0, 1));
        assert_eq!(s.expected_l[0], q(384, 100));
        assert_eq!(s.gammas[2], q(29, 50));
        let zn = exact_zn_law(&s);
        let total: BigRational = zn.values().sum();
        assert_eq!(total, q(1, 1));
        // ++ and −− (mass 0.58): three sites seen once. +− and −+ (0.42):
        // sites with counts 2 and 1, each picked with probability 1/2.
        assert_eq!(zn[&1], q(58, 100) + q(21, 100));
        assert_eq!(zn[&2], q(21, 100));
    }

    #[test]
    fn deterministic_line() {
        let s = enumerate(&deterministic(vec![1]).unwrap(), 5, &[2, 3]).unwrap();
        assert_eq!(s.expected_q(1), q(6, 1));
        assert!(s.variance_l.iter().all(Zero::is_zero));
        assert_eq!(exact_zn_law(&s), BTreeMap::from([(1, q(1, 1))]));
    }

    #[test]
    fn horizon_zero() {
        let s = enumerate(&srw(3), 0, &[2]).unwrap();
        assert_eq!(exact_zn_law(&s), BTreeMap::from([(1, q(1, 1))]));
        assert_eq!(s.gammas, vec![q(1, 1)]);
    }

    #[test]
    fn return_law_by_enumeration() {
        let r = exact_return_law(&bernoulli(0.7).unwrap(), 6).unwrap();
        assert_eq!(*r.gamma(2), q(29, 50));
        let r = exact_return_law(&deterministic(vec![1]).unwrap(), 8).unwrap();
        assert!(r.gammas().iter().all(|g| *g == q(1, 1)));
        let r = exact_return_law(&srw(2), 2).unwrap();
        assert_eq!(*r.gamma(2), q(3, 4));
    }

    #[test]
    fn rejects_float_and_big() {
        let law = bernoulli(0.7).unwrap().to_float();
        assert!(matches!(enumerate(&law, 2, &[2]), Err(Error::FloatLawRejected)));
        assert!(matches!(
            enumerate_with_budget(&srw(3), 12, &[2], 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn identities() {
        let s = enumerate(&srw(2), 6, &[0, 1, 2]).unwrap();
        let visits: BigRational = (1..=7).map(|j| s.expected_q(j) * BigRational::from_integer(j.into())).sum();
        assert_eq!(visits, q(7, 1));
        assert_eq!(s.expected_l[1], q(7, 1));
        assert_eq!(s.variance_l[1], q(0, 1));
        let range: BigRational = (1..=7).map(|j| s.expected_q(j)).sum();
        assert_eq!(s.expected_l[0], range);
        let joint: BigRational = s.joint.values().sum();
        assert_eq!(joint, q(1, 1));
    }
}
