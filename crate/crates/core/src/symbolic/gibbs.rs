//! Gibbs states of subshift lattices for potentials depending on two
//! coordinates: backward-normalized products of the weighted adjacency
//! matrices give the right vectors, forward products the marginals, and the
//! resulting cylinder measures form an exactly equivariant (inhomogeneous)
//! Markov family. The Hilbert projective metric certifies how far boundary
//! seeding can leak into the kept window.

use crate::fiberspace::{FiberFunction, ReferenceMeasure};
use crate::symbolic::lattice::SftLattice;
use crate::system::{FiberSystem, SystemBackend};
use crate::transfer::TransferOperator;
use crate::{CoreError, Result};
use ndarray::Array2;
use std::sync::Arc;

/// Hilbert projective distance between strictly positive vectors.
fn hilbert_distance(u: &[f64], v: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (&a, &b) in u.iter().zip(v.iter()) {
        let r = a / b;
        hi = hi.max(r);
        lo = lo.min(r);
    }
    (hi / lo).ln()
}

fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
    s
}

/// Gibbs data over the window [lo, hi]. Transitions and marginals stay
/// available for half the construction margin beyond hi, so cylinder
/// measures of moderate depth can be evaluated at every window fiber.
#[derive(Debug)]
pub struct GibbsState {
    pub lattice: Arc<SftLattice>,
    lo: i64,
    hi: i64,
    extra: i64,
    right: Vec<Vec<f64>>,
    marginal: Vec<Vec<f64>>,
    trans: Vec<Array2<f64>>,
    /// max relative defect of B_t r_{t+1} = ρ_t r_t over the window.
    pub eigen_residual: f64,
    /// Hilbert-metric spread still present at the window edges after the
    /// construction margin (boundary-seeding certificate).
    pub boundary_gap: f64,
}

/// Builds the Gibbs state for `potential(t, a, b)` with `margin` extra
/// contraction steps on both sides of [lo, hi].
pub fn gibbs(
    lattice: &Arc<SftLattice>,
    potential: &dyn Fn(i64, usize, usize) -> f64,
    lo: i64,
    hi: i64,
    margin: usize,
) -> Result<GibbsState> {
    if lo >= hi {
        return Err(CoreError::InvalidParameter("empty Gibbs window".into()));
    }
    let m = margin as i64;
    let weighted = |t: i64| -> Array2<f64> {
        let a = lattice.matrix(t);
        let mut b = Array2::<f64>::zeros(a.dim());
        for ((i, j), &e) in a.indexed_iter() {
            if e == 1 {
                b[(i, j)] = potential(t, i, j).exp();
            }
        }
        b
    };

    // right vectors by backward recursion, two seeds for the certificate
    let steps: Vec<i64> = ((lo - m)..(hi + m)).collect();
    let d_end = lattice.alphabet(hi + m);
    let mut r1 = vec![1.0 / d_end as f64; d_end];
    let mut r2: Vec<f64> = (0..d_end).map(|i| (i + 1) as f64).collect();
    normalize(&mut r2);
    let mut right_all: Vec<Vec<f64>> = vec![Vec::new(); steps.len() + 1];
    right_all[steps.len()] = r1.clone();
    let mut gap_right = 0.0f64;
    for (idx, &t) in steps.iter().enumerate().rev() {
        let b = weighted(t);
        let apply = |r: &[f64]| -> Vec<f64> {
            (0..b.nrows())
                .map(|i| (0..b.ncols()).map(|j| b[(i, j)] * r[j]).sum())
                .collect()
        };
        r1 = apply(&r1);
        r2 = apply(&r2);
        normalize(&mut r1);
        normalize(&mut r2);
        if r1.iter().any(|&x| x <= 0.0) {
            return Err(CoreError::NotPrimitive(format!(
                "right vector lost positivity at time {t}"
            )));
        }
        right_all[idx] = r1.clone();
        if t >= lo && t <= hi {
            gap_right = gap_right.max(hilbert_distance(&r1, &r2));
        }
    }

    // transition kernels on the kept window plus half the margin
    let extra = m / 2;
    let mut trans = Vec::with_capacity((hi + extra - lo) as usize);
    let mut eigen_residual = 0.0f64;
    for t in lo..hi + extra {
        let idx = (t - (lo - m)) as usize;
        let b = weighted(t);
        let r_next = &right_all[idx + 1];
        let mut p = Array2::<f64>::zeros(b.dim());
        for i in 0..b.nrows() {
            let row_mass: f64 = (0..b.ncols()).map(|j| b[(i, j)] * r_next[j]).sum();
            for j in 0..b.ncols() {
                p[(i, j)] = b[(i, j)] * r_next[j] / row_mass;
            }
        }
        // eigen-relation defect: B r_{t+1} ∝ r_t entrywise
        let image: Vec<f64> =
            (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| b[(i, j)] * r_next[j]).sum()).collect();
        let total: f64 = image.iter().sum();
        for (i, &x) in image.iter().enumerate() {
            eigen_residual = eigen_residual.max((x / total - right_all[idx][i]).abs());
        }
        trans.push(p);
    }

    // left seeds give the marginal at lo; marginals then evolve exactly
    let d0 = lattice.alphabet(lo - m);
    let mut l1 = vec![1.0 / d0 as f64; d0];
    let mut l2: Vec<f64> = (0..d0).map(|i| (2 * i + 1) as f64).collect();
    normalize(&mut l2);
    for t in (lo - m)..lo {
        let b = weighted(t);
        let apply = |l: &[f64]| -> Vec<f64> {
            (0..b.ncols())
                .map(|j| (0..b.nrows()).map(|i| l[i] * b[(i, j)]).sum())
                .collect()
        };
        l1 = apply(&l1);
        l2 = apply(&l2);
        normalize(&mut l1);
        normalize(&mut l2);
    }
    let gap_left = if m > 0 { hilbert_distance(&l1, &l2) } else { 0.0 };

    let r_lo = &right_all[(lo - (lo - m)) as usize];
    let mut p0: Vec<f64> = l1.iter().zip(r_lo.iter()).map(|(&l, &r)| l * r).collect();
    normalize(&mut p0);
    let mut marginal = Vec::with_capacity((hi - lo + 1) as usize);
    marginal.push(p0);
    for (k, p) in trans.iter().enumerate() {
        let prev = &marginal[k];
        let next: Vec<f64> =
            (0..p.ncols()).map(|j| (0..p.nrows()).map(|i| prev[i] * p[(i, j)]).sum()).collect();
        marginal.push(next);
    }

    let right = right_all[(lo - (lo - m)) as usize..=(hi - (lo - m)) as usize].to_vec();
    Ok(GibbsState {
        lattice: lattice.clone(),
        lo,
        hi,
        extra,
        right,
        marginal,
        trans,
        eigen_residual,
        boundary_gap: gap_right.max(gap_left),
    })
}

impl GibbsState {
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    fn check(&self, t: i64, hi: i64) -> Result<()> {
        if t < self.lo || t > hi {
            return Err(CoreError::HorizonExceeded { index: t, horizon: hi });
        }
        Ok(())
    }

    pub fn marginal(&self, t: i64) -> Result<&[f64]> {
        self.check(t, self.hi + self.extra)?;
        Ok(&self.marginal[(t - self.lo) as usize])
    }

    pub fn transition(&self, t: i64) -> Result<&Array2<f64>> {
        self.check(t, self.hi + self.extra - 1)?;
        Ok(&self.trans[(t - self.lo) as usize])
    }

    pub fn right_vector(&self, t: i64) -> Result<&[f64]> {
        self.check(t, self.hi)?;
        Ok(&self.right[(t - self.lo) as usize])
    }

    /// Mass of the cylinder [word] at time t.
    pub fn cylinder_mass(&self, t: i64, word: &[u8]) -> Result<f64> {
        let p = self.marginal(t)?;
        let mut mass = p[word[0] as usize];
        for (k, w) in word.windows(2).enumerate() {
            mass *= self.transition(t + k as i64)?[(w[0] as usize, w[1] as usize)];
        }
        Ok(mass)
    }

    /// The cylinder measure of depth `depth` at time t.
    pub fn measure(&self, t: i64, depth: usize) -> Result<ReferenceMeasure> {
        let table = self.lattice.table(t, depth)?;
        let weights: Vec<f64> =
            table.words().map(|w| self.cylinder_mass(t, w)).collect::<Result<_>>()?;
        ReferenceMeasure::cylinder(table, weights)
    }

    /// The transfer operator of the shift from fiber t to t+1 with respect to
    /// the Gibbs measures (already normalized: 𝓛1 = 1).
    pub fn operator(&self, t: i64) -> Result<TransferOperator> {
        self.check(t, self.hi - 1)?;
        let p = self.transition(t)?;
        let here = self.marginal(t)?;
        let next = self.marginal(t + 1)?;
        let mut back = Array2::<f64>::zeros((next.len(), here.len()));
        for b in 0..next.len() {
            for a in 0..here.len() {
                back[(b, a)] = here[a] * p[(a, b)] / next[b];
            }
        }
        Ok(TransferOperator::cylinder(self.lattice.clone(), t, back))
    }

    /// Assembles the fibered system of the whole window at cylinder depth
    /// `depth`, with optional per-time observables. Reference measures are
    /// stored four levels deeper, so compositions (which deepen functions by
    /// one level each) still integrate exactly.
    pub fn fiber_system(
        &self,
        depth: usize,
        observables: Option<Vec<FiberFunction>>,
    ) -> Result<FiberSystem> {
        let slack = 4usize;
        if self.extra < (depth + slack) as i64 {
            return Err(CoreError::InvalidParameter(format!(
                "construction margin too small: need margin >= {}",
                2 * (depth + slack)
            )));
        }
        let labels = (self.lo..=self.hi)
            .map(|_| crate::driving::FiberLabel::Symbol(0))
            .collect();
        let ops =
            (self.lo..self.hi).map(|t| self.operator(t)).collect::<Result<Vec<_>>>()?;
        let measures = (self.lo..=self.hi)
            .map(|t| self.measure(t, depth + slack))
            .collect::<Result<Vec<_>>>()?;
        FiberSystem::from_parts(
            self.lo,
            labels,
            ops,
            measures,
            observables,
            SystemBackend::Cylinder { lattice: self.lattice.clone(), depth },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn full_shift(window: i64) -> Arc<SftLattice> {
        SftLattice::stationary(array![[1, 1], [1, 1]], window, 1.0).unwrap()
    }

    #[test]
    fn zero_potential_is_exactly_bernoulli() {
        let lat = full_shift(120);
        let state = gibbs(&lat, &|_, _, _| 0.0, -20, 20, 64).unwrap();
        assert!(state.eigen_residual < 1e-14);
        assert!(state.boundary_gap < 1e-14);
        for t in -20..20 {
            let p = state.transition(t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(p[(i, j)], 0.5, epsilon = 1e-15);
                }
            }
            assert_abs_diff_eq!(state.marginal(t).unwrap()[0], 0.5, epsilon = 1e-15);
        }
        // exhaustive masses through depth 20 by DFS over the binary tree
        fn dfs(state: &GibbsState, t: i64, sym: usize, depth: usize, mass: f64, worst: &mut f64) {
            if depth == 20 {
                *worst = worst.max((mass - 0.5f64.powi(20)).abs());
                return;
            }
            for b in 0..2 {
                let m = mass * state.transition(t + depth as i64 - 1).unwrap()[(sym, b)];
                dfs(state, t, b, depth + 1, m, worst);
            }
        }
        let mut worst = 0.0f64;
        for a in 0..2 {
            dfs(&state, 0, a, 1, state.marginal(0).unwrap()[a], &mut worst);
        }
        assert!(worst < 1e-17, "worst deviation {worst}");
    }

    #[test]
    fn markov_potential_reproduces_the_chain() {
        let pstar: [[f64; 2]; 2] = [[0.7, 0.3], [0.4, 0.6]];
        let lat = full_shift(160);
        let state =
            gibbs(&lat, &|_, a, b| pstar[a][b].ln(), -10, 10, 96).unwrap();
        // stationary distribution of pstar: π = (4/7, 3/7)
        let pi = [4.0 / 7.0, 3.0 / 7.0];
        for a in 0..2 {
            assert_abs_diff_eq!(state.marginal(0).unwrap()[a], pi[a], epsilon = 1e-10);
            for b in 0..2 {
                assert_abs_diff_eq!(
                    state.transition(0).unwrap()[(a, b)],
                    pstar[a][b],
                    epsilon = 1e-12
                );
            }
        }
        // exhaustive cylinder comparison at depth 8
        let table = lat.table(0, 8).unwrap();
        for w in table.words() {
            let chain = pi[w[0] as usize]
                * w.windows(2).map(|p| pstar[p[0] as usize][p[1] as usize]).product::<f64>();
            assert_abs_diff_eq!(state.cylinder_mass(0, w).unwrap(), chain, epsilon = 1e-10);
        }
    }

    #[test]
    fn alternating_alphabets_stay_normalized() {
        // alphabets 2,3,2,3,… with all-ones adjacency
        let steps = 40usize;
        let alphabets: Vec<usize> = (0..=steps).map(|i| if i % 2 == 0 { 2 } else { 3 }).collect();
        let matrices: Vec<Array2<u8>> = (0..steps)
            .map(|i| Array2::from_elem((alphabets[i], alphabets[i + 1]), 1u8))
            .collect();
        let lat = SftLattice::new(0, alphabets, matrices, 1.0).unwrap();
        let state = gibbs(&lat, &|t, a, b| 0.1 * (a as f64) - 0.07 * (b as f64 + t as f64 % 2.0), 12, 28, 10).unwrap();
        for t in 12..=28 {
            let p: f64 = state.marginal(t).unwrap().iter().sum();
            assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        }
        for depth in 1..=5 {
            let m = state.measure(16, depth).unwrap();
            if let ReferenceMeasure::CylinderWeights { weights, .. } = m {
                assert_abs_diff_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gibbs_operator_preserves_mass_and_one() {
        let lat = full_shift(80);
        let state = gibbs(&lat, &|_, a, b| 0.3 * a as f64 * b as f64, -10, 10, 48).unwrap();
        let sys = state.fiber_system(4, None).unwrap();
        assert!(sys.equivariance_defect(0).unwrap() < 1e-13);
        let phi = {
            let table = lat.table(0, 4).unwrap();
            let values = table
                .words()
                .map(|w| num_complex::Complex64::new(w[0] as f64 - 0.3 * w[2] as f64, 0.0))
                .collect();
            FiberFunction::Cylinder(
                crate::fiberspace::CylinderFn::from_values(table, values).unwrap(),
            )
        };
        let before = phi.integrate(sys.measure(0).unwrap()).unwrap();
        let after = sys.op(0).unwrap().apply(&phi).unwrap();
        let after_mass = after.integrate(sys.measure(1).unwrap()).unwrap();
        assert_abs_diff_eq!(before.re, after_mass.re, epsilon = 1e-12);
        // duality against the composition action
        let psi = sys.one(1).unwrap();
        let lhs = after.mul(&psi).unwrap().integrate(sys.measure(1).unwrap()).unwrap();
        let rhs = phi
            .mul(&sys.op(0).unwrap().koopman(&psi).unwrap())
            .unwrap()
            .integrate(sys.measure(0).unwrap())
            .unwrap();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-12);
    }
}
