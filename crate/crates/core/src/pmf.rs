//! Exact laws of S_m by repeated convolution with the step law.
//!
//! A [`PmfField`] stores its masses densely over the tight bounding box of
//! the support. Convolution shifts whole rows along the last axis, which
//! keeps the inner loop contiguous. In float mode entries below
//! [`FLOAT_PRUNE`](crate::mass::FLOAT_PRUNE) are dropped after every step and
//! the dropped total is tracked; exact masses are never dropped.

use crate::error::{Error, Result};
use crate::mass::Mass;
use crate::steps::{LatticePoint, StepLaw};

/// Default cap on the number of cells in a field's bounding box.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 25;

#[derive(Clone, Debug)]
pub struct PmfField<M> {
    step: usize,
    lo: Vec<i64>,
    shape: Vec<usize>,
    data: Vec<M>,
    pruned: f64,
}

/// The step law prepared for convolution: offsets relative to the per-axis
/// minimum step, and weights in the chosen arithmetic.
#[derive(Clone, Debug)]
pub struct Kernel<M> {
    min: Vec<i64>,
    span: Vec<usize>,
    atoms: Vec<(Vec<usize>, M)>,
}

impl<M: Mass> Kernel<M> {
    pub fn new(law: &StepLaw) -> Result<Self> {
        let masses = M::law_masses(law)?;
        let extent = law.axis_extent();
        let min: Vec<i64> = extent.iter().map(|e| e.0).collect();
        let span = extent.iter().map(|e| (e.1 - e.0) as usize).collect();
        let atoms = law
            .points()
            .iter()
            .zip(masses)
            .map(|(p, m)| {
                let off = p.coords().iter().zip(&min).map(|(c, lo)| (c - lo) as usize).collect();
                (off, m)
            })
            .collect();
        Ok(Kernel { min, span, atoms })
    }
}

fn linear(index: &[usize], shape: &[usize]) -> usize {
    index.iter().zip(shape).fold(0, |acc, (i, s)| acc * s + i)
}

/// Calls `f(row_start_multi_index)` for every row (all axes but the last).
fn for_each_row(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let d = shape.len();
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; d];
    loop {
        f(&idx);
        let mut axis = d - 1;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

impl<M: Mass> PmfField<M> {
    /// Point mass at the origin: the law of S_0.
    pub fn origin(d: usize) -> Self {
        PmfField {
            step: 0,
            lo: vec![0; d],
            shape: vec![1; d],
            data: vec![M::one()],
            pruned: 0.0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Total float mass dropped so far (always 0 for exact masses).
    pub fn pruned_mass(&self) -> f64 {
        self.pruned
    }

    pub fn cells(&self) -> usize {
        self.data.len()
    }

    fn offset_of(&self, x: &[i64]) -> Option<usize> {
        let mut acc = 0usize;
        for ((&c, &lo), &s) in x.iter().zip(&self.lo).zip(&self.shape) {
            let i = c - lo;
            if i < 0 || i as usize >= s {
                return None;
            }
            acc = acc * s + i as usize;
        }
        Some(acc)
    }

    pub fn get(&self, x: &[i64]) -> M {
        self.offset_of(x).map_or_else(M::zero, |i| self.data[i].clone())
    }

    pub fn origin_mass(&self) -> M {
        self.get(&vec![0; self.dim()])
    }

    /// Removes and returns the mass at the origin.
    pub fn take_origin(&mut self) -> M {
        match self.offset_of(&vec![0; self.dim()]) {
            Some(i) => std::mem::replace(&mut self.data[i], M::zero()),
            None => M::zero(),
        }
    }

    fn point_at(&self, mut flat: usize) -> LatticePoint {
        let d = self.dim();
        let mut c = vec![0i64; d];
        for axis in (0..d).rev() {
            let s = self.shape[axis];
            c[axis] = self.lo[axis] + (flat % s) as i64;
            flat /= s;
        }
        LatticePoint::new(c)
    }

    /// Nonzero entries in lexicographic order of their points.
    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, &M)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| (self.point_at(i), m))
    }

    pub fn support_len(&self) -> usize {
        self.data.iter().filter(|m| !m.is_zero()).count()
    }

    pub fn total(&self) -> M {
        let mut t = M::zero();
        for m in &self.data {
            if !m.is_zero() {
                t.add(m);
            }
        }
        t
    }

    /// Largest mass, as a double.
    pub fn max_mass(&self) -> f64 {
        self.data.iter().map(M::to_f64).fold(0.0, f64::max)
    }

    /// The law one step later.
    pub fn convolve(&self, kernel: &Kernel<M>, cell_budget: usize) -> Result<Self> {
        let d = self.dim();
        let shape: Vec<usize> = self.shape.iter().zip(&kernel.span).map(|(s, k)| s + k).collect();
        let cells = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&c| c <= cell_budget)
            .ok_or(Error::ResourceLimit {
                what: "pmf bounding-box cells",
                needed: shape.iter().map(|&s| s as u128).product(),
                budget: cell_budget as u128,
            })?;
        let mut data = vec![M::zero(); cells];
        let row = self.shape[d - 1];
        let mut target = vec![0usize; d];
        for_each_row(&self.shape, |src_idx| {
            let src_start = linear(src_idx, &self.shape);
            let src = &self.data[src_start..src_start + row];
            for (off, w) in &kernel.atoms {
                for a in 0..d {
                    target[a] = src_idx[a] + off[a];
                }
                let dst_start = linear(&target, &shape);
                M::axpy(&mut data[dst_start..dst_start + row], w, src);
            }
        });
        let lo = self.lo.iter().zip(&kernel.min).map(|(l, m)| l + m).collect();
        let mut next = PmfField {
            step: self.step + 1,
            lo,
            shape,
            data,
            pruned: self.pruned,
        };
        next.prune();
        Ok(next)
    }

    /// Drops negligible entries and shrinks the box to the remaining support.
    fn prune(&mut self) {
        let mut dropped = 0.0;
        for m in &mut self.data {
            if !m.is_zero() && m.negligible() {
                dropped += m.to_f64();
                *m = M::zero();
            }
        }
        self.pruned += dropped;
        self.shrink();
    }

    fn shrink(&mut self) {
        let d = self.dim();
        let mut lo_idx = self.shape.clone();
        let mut hi_idx = vec![0usize; d];
        let mut any = false;
        let mut idx = vec![0usize; d];
        for (flat, m) in self.data.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            any = true;
            let mut rest = flat;
            for axis in (0..d).rev() {
                idx[axis] = rest % self.shape[axis];
                rest /= self.shape[axis];
            }
            for a in 0..d {
                lo_idx[a] = lo_idx[a].min(idx[a]);
                hi_idx[a] = hi_idx[a].max(idx[a]);
            }
        }
        if !any {
            // Keep a single zero cell at the old corner.
            self.shape = vec![1; d];
            self.data = vec![M::zero()];
            return;
        }
        let new_shape: Vec<usize> = (0..d).map(|a| hi_idx[a] - lo_idx[a] + 1).collect();
        if new_shape == self.shape {
            return;
        }
        let cells: usize = new_shape.iter().product();
        let mut data = Vec::with_capacity(cells);
        let row = new_shape[d - 1];
        let mut src = vec![0usize; d];
        for_each_row(&new_shape, |dst_idx| {
            for a in 0..d {
                src[a] = dst_idx[a] + lo_idx[a];
            }
            let s = linear(&src, &self.shape);
            data.extend_from_slice(&self.data[s..s + row]);
        });
        for a in 0..d {
            self.lo[a] += lo_idx[a] as i64;
        }
        self.shape = new_shape;
        self.data = data;
    }
}

/// `S_0, S_1, ..., S_m` evolved in sequence; `visit` sees every snapshot in
/// order. Returns the last one.
pub fn evolve_with<M: Mass>(
    law: &StepLaw,
    m: usize,
    cell_budget: usize,
    mut visit: impl FnMut(&PmfField<M>),
) -> Result<PmfField<M>> {
    let kernel = Kernel::<M>::new(law)?;
    let mut field = PmfField::origin(law.dim());
    visit(&field);
    for _ in 0..m {
        field = field.convolve(&kernel, cell_budget)?;
        visit(&field);
    }
    Ok(field)
}

/// Law of S_m.
pub fn pmf_evolve<M: Mass>(law: &StepLaw, m: usize) -> Result<PmfField<M>> {
    evolve_with(law, m, DEFAULT_CELL_BUDGET, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steps::{bernoulli, deterministic, srw, StepLaw};
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn bernoulli_two_steps() {
        let law = bernoulli(0.7).unwrap();
        let f = pmf_evolve::<BigRational>(&law, 2).unwrap();
        assert_eq!(f.get(&[2]), q(49, 100));
        assert_eq!(f.get(&[0]), q(42, 100));
        assert_eq!(f.get(&[-2]), q(9, 100));
        assert_eq!(f.get(&[1]), q(0, 1));
        assert_eq!(f.support_len(), 3);
        let pts: Vec<_> = f.iter().map(|(p, _)| p.coords()[0]).collect();
        assert_eq!(pts, vec![-2, 0, 2]);
    }

    #[test]
    fn zero_steps() {
        let f = pmf_evolve::<f64>(&srw(4), 0).unwrap();
        assert_eq!(f.support_len(), 1);
        assert_eq!(f.origin_mass(), 1.0);
    }

    #[test]
    fn srw3_return_after_two() {
        let f = pmf_evolve::<BigRational>(&srw(3), 2).unwrap();
        assert_eq!(f.origin_mass(), q(1, 6));
        assert_eq!(f.total(), q(1, 1));
    }

    /// Brute force: sum of path products over all |support|^m paths.
    fn brute(law: &StepLaw, m: usize) -> std::collections::BTreeMap<Vec<i64>, BigRational> {
        let masses = law.exact_masses().unwrap();
        let mut out = std::collections::BTreeMap::new();
        let k = law.len();
        for code in 0..k.pow(m as u32) {
            let mut c = code;
            let mut pos = vec![0i64; law.dim()];
            let mut w = q(1, 1);
            for _ in 0..m {
                let i = c % k;
                c /= k;
                for (x, dx) in pos.iter_mut().zip(law.points()[i].coords()) {
                    *x += dx;
                }
                w *= &masses[i];
            }
            *out.entry(pos).or_insert_with(|| q(0, 1)) += w;
        }
        out
    }

    #[test]
    fn matches_path_brute_force() {
        let lazy2 = StepLaw::exact(
            2,
            vec![
                (LatticePoint::new(vec![1, 0]), q(1, 4)),
                (LatticePoint::new(vec![0, 0]), q(1, 4)),
                (LatticePoint::new(vec![-1, 2]), q(1, 2)),
            ],
        )
        .unwrap();
        for law in [srw(2), bernoulli(0.3).unwrap(), lazy2] {
            for m in 0..5 {
                let f = pmf_evolve::<BigRational>(&law, m).unwrap();
                let got: std::collections::BTreeMap<_, _> =
                    f.iter().map(|(p, v)| (p.coords().to_vec(), v.clone())).collect();
                assert_eq!(got, brute(&law, m), "m = {m}");
            }
        }
    }

    #[test]
    fn float_mass_is_conserved() {
        let f = pmf_evolve::<f64>(&srw(3), 60).unwrap();
        assert!((f.total() + f.pruned_mass() - 1.0).abs() < 1e-12);
        let det = pmf_evolve::<f64>(&deterministic(vec![1]).unwrap(), 7).unwrap();
        assert_eq!(det.get(&[7]), 1.0);
        assert_eq!(det.cells(), 1);
    }

    #[test]
    fn take_origin_removes_mass() {
        let mut f = pmf_evolve::<BigRational>(&bernoulli(0.7).unwrap(), 2).unwrap();
        assert_eq!(f.take_origin(), q(42, 100));
        assert_eq!(f.total(), q(58, 100));
    }

    #[test]
    fn budget_is_enforced() {
        let kernel = Kernel::<f64>::new(&srw(3)).unwrap();
        let f = PmfField::<f64>::origin(3);
        let f = f.convolve(&kernel, 1000).unwrap();
        assert!(matches!(f.convolve(&kernel, 26), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn exact_modes_reject_float_laws() {
        let law = bernoulli(0.7).unwrap().to_float();
        assert!(matches!(pmf_evolve::<BigRational>(&law, 1), Err(Error::FloatLawRejected)));
    }
}
