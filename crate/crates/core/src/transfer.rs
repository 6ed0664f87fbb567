//! Fiber transfer operators: the pre-dual of composition by an expanding map,
//! acting between neighbouring fiber spaces, plus their twisted variants
//! 𝓛^θ φ = 𝓛(e^{θF} φ).
//!
//! Three actions are implemented: an exact mode map for linear full-branch
//! interval maps (Fourier backend), a row-stochastic cell matrix assembled
//! from exact interval intersections (Ulam backend), and the backward Markov
//! kernel of a Gibbs state (cylinder backend).

use crate::fiberspace::{CylinderFn, FiberFunction, FourierFn, UlamFn};
use crate::grid::frac;
use crate::symbolic::lattice::SftLattice;
use crate::{CoreError, Result};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative spectral mass the twisted-weight factor may drop before
/// `apply_twisted` refuses to proceed.
pub const DEFAULT_TRUNCATION_BUDGET: f64 = 1e-9;

/// One monotone branch of an interval map: the interval [lo, hi) is mapped
/// onto the interval between img_lo and img_hi (img_lo > img_hi means the
/// branch decreases). `warp` bends the affine interpolation; its inverse
/// stays closed-form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub img_lo: f64,
    pub img_hi: f64,
    #[serde(default)]
    pub warp: f64,
}

impl Branch {
    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn img_min(&self) -> f64 {
        self.img_lo.min(self.img_hi)
    }

    fn img_max(&self) -> f64 {
        self.img_lo.max(self.img_hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.width();
        let w = u + self.warp * u * (1.0 - u);
        self.img_lo + (self.img_hi - self.img_lo) * w
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.width();
        (self.img_hi - self.img_lo) / self.width() * (1.0 + self.warp * (1.0 - 2.0 * u))
    }

    /// Closed-form inverse on the branch image.
    pub fn inverse(&self, y: f64) -> f64 {
        let v = (y - self.img_lo) / (self.img_hi - self.img_lo);
        let u = if self.warp.abs() < 1e-14 {
            v
        } else {
            let c = self.warp;
            let disc = (1.0 + c) * (1.0 + c) - 4.0 * c * v;
            (1.0 + c - disc.sqrt()) / (2.0 * c)
        };
        self.lo + self.width() * u
    }

    /// Smallest |T'| over the branch.
    pub fn min_expansion(&self) -> f64 {
        (self.img_hi - self.img_lo).abs() / self.width() * (1.0 - self.warp.abs())
    }
}

/// A piecewise-monotone expanding interval map given by its branches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchMap {
    branches: Vec<Branch>,
}

impl BranchMap {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(CoreError::InvalidParameter("map needs at least one branch".into()));
        }
        let mut x = 0.0;
        for b in &branches {
            if (b.lo - x).abs() > 1e-12 || b.hi <= b.lo {
                return Err(CoreError::InvalidParameter(
                    "branch intervals must partition [0,1) in order".into(),
                ));
            }
            if b.warp.abs() >= 1.0 {
                return Err(CoreError::InvalidParameter("|warp| must be < 1".into()));
            }
            if b.min_expansion() <= 1.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "branch on [{}, {}) has expansion {} <= 1",
                    b.lo,
                    b.hi,
                    b.min_expansion()
                )));
            }
            x = b.hi;
        }
        if (x - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter("branches must cover [0,1)".into()));
        }
        Ok(BranchMap { branches })
    }

    /// x ↦ kx + b mod 1 with integer slope k ≥ 2.
    pub fn linear_full_branch(slope: u32, offset: f64) -> Result<Self> {
        if slope < 2 {
            return Err(CoreError::InvalidParameter("slope must be >= 2".into()));
        }
        let k = slope as f64;
        let b = frac(offset);
        let mut branches = Vec::new();
        for i in 0..slope {
            let lo = i as f64 / k;
            let hi = (i + 1) as f64 / k;
            if b == 0.0 {
                branches.push(Branch { lo, hi, img_lo: 0.0, img_hi: 1.0, warp: 0.0 });
            } else {
                // the image wraps at kx + b = i+1
                let split = (i as f64 + 1.0 - b) / k;
                branches.push(Branch { lo, hi: split, img_lo: b, img_hi: 1.0, warp: 0.0 });
                branches.push(Branch { lo: split, hi, img_lo: 0.0, img_hi: b, warp: 0.0 });
            }
        }
        BranchMap::new(branches)
    }

    pub fn doubling() -> Self {
        Self::linear_full_branch(2, 0.0).unwrap()
    }

    /// Three-branch Markov map with a genuinely non-uniform invariant
    /// density: slopes (3, 3, 2), the last branch covering only [0, 2/3).
    pub fn markov_saw() -> Self {
        BranchMap::new(vec![
            Branch { lo: 0.0, hi: 1.0 / 3.0, img_lo: 0.0, img_hi: 1.0, warp: 0.0 },
            Branch { lo: 1.0 / 3.0, hi: 2.0 / 3.0, img_lo: 0.0, img_hi: 1.0, warp: 0.0 },
            Branch { lo: 2.0 / 3.0, hi: 1.0, img_lo: 0.0, img_hi: 2.0 / 3.0, warp: 0.0 },
        ])
        .unwrap()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = frac(x);
        let b = self
            .branches
            .iter()
            .find(|b| x >= b.lo && x < b.hi)
            .unwrap_or_else(|| self.branches.last().unwrap());
        frac(b.eval(x).min(1.0 - 1e-15))
    }

    pub fn min_expansion(&self) -> f64 {
        self.branches.iter().map(Branch::min_expansion).fold(f64::INFINITY, f64::min)
    }

    /// True when the map is kx + b mod 1; returns (k, b).
    pub fn as_linear(&self) -> Option<(u32, f64)> {
        let k = self.branches.iter().map(|b| b.width()).map(|w| 1.0 / w).sum::<f64>()
            / self.branches.len() as f64;
        let slope = k.round();
        // heuristic reconstruction; used only by tests and reports
        let b0 = &self.branches[0];
        if b0.warp != 0.0 {
            return None;
        }
        let offset = frac(b0.img_lo - slope * b0.lo);
        let candidate = BranchMap::linear_full_branch(slope as u32, offset).ok()?;
        let same = candidate.branches.len() == self.branches.len()
            && candidate
                .branches
                .iter()
                .zip(self.branches.iter())
                .all(|(a, b)| (a.lo - b.lo).abs() < 1e-12 && (a.img_lo - b.img_lo).abs() < 1e-12);
        same.then_some((slope as u32, offset))
    }
}

/// Assembles the Ulam cell matrix for `map` on `n` uniform cells: the entry
/// (i, j) is n·|cell_i ∩ T⁻¹ cell_j|, computed from exact preimage intervals.
pub fn ulam_matrix(map: &BranchMap, n: usize) -> Array2<f64> {
    let mut p = Array2::<f64>::zeros((n, n));
    let h = 1.0 / n as f64;
    for branch in map.branches() {
        let (ylo, yhi) = (branch.img_min(), branch.img_max());
        let jlo = (ylo / h).floor() as usize;
        let jhi = ((yhi / h).ceil() as usize).min(n);
        for j in jlo..jhi {
            let a = (j as f64 * h).max(ylo);
            let b = ((j + 1) as f64 * h).min(yhi);
            if b <= a {
                continue;
            }
            let (x1, x2) = (branch.inverse(a), branch.inverse(b));
            let (plo, phi) = (x1.min(x2), x1.max(x2));
            let ilo = (plo / h).floor() as usize;
            let ihi = ((phi / h).ceil() as usize).min(n);
            for i in ilo..ihi {
                let u = (i as f64 * h).max(plo);
                let v = ((i + 1) as f64 * h).min(phi);
                if v > u {
                    p[(i, j)] += (v - u) * n as f64;
                }
            }
        }
    }
    p
}

/// A transfer operator between two fibers, in one of the three backends.
#[derive(Debug, Clone)]
pub enum TransferOperator {
    /// Exact mode action of x ↦ slope·x + offset mod 1.
    FourierLinear { slope: u32, offset: f64 },
    /// Row-stochastic Ulam matrix together with the map it discretizes.
    Ulam { map: Arc<BranchMap>, matrix: Arc<Array2<f64>> },
    /// Backward Markov kernel of a Gibbs state: entry (b, a) is the weight of
    /// prepending symbol a to a word starting with b.
    Cylinder { lattice: Arc<SftLattice>, time: i64, back: Arc<Array2<f64>> },
}

impl TransferOperator {
    pub fn fourier_linear(slope: u32, offset: f64) -> Result<Self> {
        if slope < 2 {
            return Err(CoreError::InvalidParameter("slope must be >= 2".into()));
        }
        Ok(TransferOperator::FourierLinear { slope, offset: frac(offset) })
    }

    pub fn ulam(map: BranchMap, n: usize) -> Self {
        let matrix = ulam_matrix(&map, n);
        TransferOperator::Ulam { map: Arc::new(map), matrix: Arc::new(matrix) }
    }

    pub fn cylinder(lattice: Arc<SftLattice>, time: i64, back: Array2<f64>) -> Self {
        TransferOperator::Cylinder { lattice, time, back: Arc::new(back) }
    }

    /// 𝓛 φ.
    pub fn apply(&self, phi: &FiberFunction) -> Result<FiberFunction> {
        match (self, phi) {
            (TransferOperator::FourierLinear { slope, offset }, FiberFunction::Fourier(f)) => {
                let k_in = f.cutoff();
                let k_out = k_in / *slope as usize;
                let modes = (-(k_out as i64)..=k_out as i64)
                    .map(|n| {
                        let phase =
                            (-Complex64::i() * std::f64::consts::TAU * n as f64 * *offset).exp();
                        f.mode(n * *slope as i64) * phase
                    })
                    .collect();
                Ok(FiberFunction::Fourier(crate::fiberspace::FourierFn::from_modes(modes)))
            }
            (TransferOperator::Ulam { matrix, .. }, FiberFunction::Ulam(f)) => {
                let n = matrix.nrows();
                if f.len() != n {
                    return Err(CoreError::DomainMismatch(format!(
                        "function on {} cells, operator on {n}",
                        f.len()
                    )));
                }
                let cells = (0..n)
                    .map(|j| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for i in 0..n {
                            let w = matrix[(i, j)];
                            if w != 0.0 {
                                acc += f.cells()[i] * w;
                            }
                        }
                        acc
                    })
                    .collect();
                Ok(FiberFunction::Ulam(UlamFn::from_cells(cells)))
            }
            (TransferOperator::Cylinder { lattice, time, back }, FiberFunction::Cylinder(f)) => {
                if !Arc::ptr_eq(lattice, &f.table.lattice) || f.table.time != *time {
                    return Err(CoreError::DomainMismatch(
                        "cylinder function does not live on the operator's source fiber".into(),
                    ));
                }
                let depth = f.table.depth;
                let out_table = lattice.table(time + 1, depth)?;
                let mut word = vec![0u8; depth];
                let values = out_table
                    .words()
                    .map(|w| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..lattice.alphabet(*time) {
                            let weight = back[(w[0] as usize, a)];
                            if weight == 0.0 {
                                continue;
                            }
                            word[0] = a as u8;
                            word[1..].copy_from_slice(&w[..depth - 1]);
                            let idx = f
                                .table
                                .index_of(&word)
                                .expect("positive kernel weight on admissible word");
                            acc += f.values()[idx] * weight;
                        }
                        acc
                    })
                    .collect();
                Ok(FiberFunction::Cylinder(CylinderFn::from_values(out_table, values)?))
            }
            _ => Err(CoreError::BackendMismatch(
                "operator and function backends do not match".into(),
            )),
        }
    }

    /// 𝓛(e^{θF} φ), the twisted action. θ = 0 reproduces `apply` bit-for-bit.
    pub fn apply_twisted(
        &self,
        theta: Complex64,
        f_obs: &FiberFunction,
        phi: &FiberFunction,
    ) -> Result<FiberFunction> {
        let weight = f_obs.scale(theta).exp();
        let loss = weight.resolution_loss();
        if loss > DEFAULT_TRUNCATION_BUDGET * (1.0 + weight.ess_sup()) {
            return Err(CoreError::TruncationExceeded(format!(
                "twist weight dropped spectral mass {loss:.3e}"
            )));
        }
        self.apply(&weight.mul(phi)?)
    }

    /// ψ ∘ T, the composition (Koopman) action, mapping the target fiber back
    /// to the source fiber.
    pub fn koopman(&self, psi: &FiberFunction) -> Result<FiberFunction> {
        match (self, psi) {
            (TransferOperator::FourierLinear { slope, offset }, FiberFunction::Fourier(f)) => {
                let k_in = f.cutoff();
                let s = *slope as usize;
                let k_out = k_in * s;
                let mut modes = vec![Complex64::new(0.0, 0.0); 2 * k_out + 1];
                for n in -(k_in as i64)..=k_in as i64 {
                    let phase =
                        (Complex64::i() * std::f64::consts::TAU * n as f64 * *offset).exp();
                    modes[(n * s as i64 + k_out as i64) as usize] = f.mode(n) * phase;
                }
                Ok(FiberFunction::Fourier(FourierFn::from_modes(modes)))
            }
            (TransferOperator::Ulam { matrix, .. }, FiberFunction::Ulam(f)) => {
                let n = matrix.nrows();
                if f.len() != n {
                    return Err(CoreError::DomainMismatch(format!(
                        "function on {} cells, operator on {n}",
                        f.len()
                    )));
                }
                let cells = (0..n)
                    .map(|i| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..n {
                            let w = matrix[(i, j)];
                            if w != 0.0 {
                                acc += f.cells()[j] * w;
                            }
                        }
                        acc
                    })
                    .collect();
                Ok(FiberFunction::Ulam(UlamFn::from_cells(cells)))
            }
            (TransferOperator::Cylinder { lattice, time, .. }, FiberFunction::Cylinder(f)) => {
                if !Arc::ptr_eq(lattice, &f.table.lattice) || f.table.time != *time + 1 {
                    return Err(CoreError::DomainMismatch(
                        "composition needs a function on the operator's target fiber".into(),
                    ));
                }
                let out_table = lattice.table(*time, f.table.depth + 1)?;
                let values = out_table
                    .words()
                    .map(|w| f.eval_word(&w[1..]).expect("suffix admissible"))
                    .collect();
                Ok(FiberFunction::Cylinder(CylinderFn::from_values(out_table, values)?))
            }
            _ => Err(CoreError::BackendMismatch(
                "operator and function backends do not match".into(),
            )),
        }
    }

    /// Closed-form composition when both operators are linear mode maps:
    /// first self, then `next`.
    pub fn compose_linear(&self, next: &TransferOperator) -> Option<TransferOperator> {
        match (self, next) {
            (
                TransferOperator::FourierLinear { slope: k1, offset: b1 },
                TransferOperator::FourierLinear { slope: k2, offset: b2 },
            ) => Some(TransferOperator::FourierLinear {
                slope: k1 * k2,
                offset: frac(*k2 as f64 * *b1 + *b2),
            }),
            _ => None,
        }
    }

    /// Identity on the appropriate backend, for zero-length compositions.
    pub fn identity_like(&self, phi: &FiberFunction) -> FiberFunction {
        phi.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiberspace::ReferenceMeasure;
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    // Quadrature oracle for ∫ φ·(ψ∘T) dx with pointwise map evaluation,
    // independent of the operator implementations.
    fn pullback_quad(
        phi: impl Fn(f64) -> Complex64,
        psi: impl Fn(f64) -> Complex64,
        map: &BranchMap,
        n: usize,
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            acc += phi(x) * psi(map.eval(x));
        }
        acc / n as f64
    }

    #[test]
    fn doubling_fixes_constants() {
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let one = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        let out = op.apply(&one).unwrap();
        assert_eq!(out.as_fourier().unwrap().mode(0), c(1.0));
        assert_eq!(out.as_fourier().unwrap().cutoff(), 0);
    }

    #[test]
    fn doubling_annihilates_first_mode_and_halves_second() {
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let cos1 = FiberFunction::Fourier(FourierFn::cosine(1));
        let out = op.apply(&cos1).unwrap();
        assert!(out.ess_sup() < 1e-15);

        let cos2 = FiberFunction::Fourier(FourierFn::cosine(2));
        let out = op.apply(&cos2).unwrap();
        let g = out.as_fourier().unwrap();
        assert_abs_diff_eq!(g.mode(1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.mode(-1).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn duality_against_quadrature_oracle() {
        let map = BranchMap::doubling();
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let phi = FiberFunction::Fourier(FourierFn::cosine(2));
        let psi = FiberFunction::Fourier(FourierFn::sine(1));
        let lhs = op
            .apply(&phi)
            .unwrap()
            .mul(&psi)
            .unwrap()
            .integrate(&ReferenceMeasure::Lebesgue)
            .unwrap();
        let rhs = pullback_quad(
            |x| phi.as_fourier().unwrap().eval(x),
            |x| psi.as_fourier().unwrap().eval(x),
            &map,
            1 << 14,
        );
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-9);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-9);
    }

    #[test]
    fn twisted_at_zero_is_apply_bit_for_bit() {
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        let phi = FiberFunction::Fourier(FourierFn::from_modes(vec![
            c(0.3),
            c(1.0),
            c(0.2),
            c(1.0),
            c(0.3),
        ]));
        let plain = op.apply(&phi).unwrap();
        let twisted = op.apply_twisted(Complex64::new(0.0, 0.0), &f, &phi).unwrap();
        let (a, b) = (plain.as_fourier().unwrap(), twisted.as_fourier().unwrap());
        assert_eq!(a.cutoff(), b.cutoff());
        for k in -(a.cutoff() as i64)..=a.cutoff() as i64 {
            assert_eq!(a.mode(k), b.mode(k));
        }
    }

    #[test]
    fn constant_twist_is_a_scalar_factor() {
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let f = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        let one = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        let theta = Complex64::new(2f64.ln(), 0.0);
        let out = op.apply_twisted(theta, &f, &one).unwrap();
        assert_abs_diff_eq!(out.as_fourier().unwrap().mode(0).re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn twisted_matches_quadrature_oracle() {
        let map = BranchMap::doubling();
        let op = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let fobs = FiberFunction::Fourier(FourierFn::cosine(1));
        let one = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        let theta = Complex64::new(0.1, 0.0);
        let out = op.apply_twisted(theta, &fobs, &one).unwrap();
        // test ψ = cos 2πx against ∫ (𝓛^θ 1) ψ dm = ∫ e^{θF} (ψ∘T) dm
        let psi = FourierFn::cosine(1);
        let lhs = out
            .mul(&FiberFunction::Fourier(psi.clone()))
            .unwrap()
            .integrate(&ReferenceMeasure::Lebesgue)
            .unwrap();
        let rhs = pullback_quad(
            |x| (theta * (std::f64::consts::TAU * x).cos()).exp(),
            |x| psi.eval(x),
            &map,
            1 << 15,
        );
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-8);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-8);
    }

    #[test]
    fn linear_compose_closed_form() {
        let a = TransferOperator::fourier_linear(2, 0.0).unwrap();
        let b = TransferOperator::fourier_linear(3, 0.0).unwrap();
        let ab = a.compose_linear(&b).unwrap();
        match ab {
            TransferOperator::FourierLinear { slope, offset } => {
                assert_eq!(slope, 6);
                assert_eq!(offset, 0.0);
            }
            _ => panic!("expected linear"),
        }
        // sequential application agrees with the closed form on cos(12πx)
        let phi = FiberFunction::Fourier(FourierFn::cosine(6));
        let seq = b.apply(&a.apply(&phi).unwrap()).unwrap();
        let direct = a.compose_linear(&b).unwrap().apply(&phi).unwrap();
        assert_abs_diff_eq!(
            seq.as_fourier().unwrap().mode(1).re,
            direct.as_fourier().unwrap().mode(1).re,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(direct.as_fourier().unwrap().mode(1).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ulam_matrix_is_row_stochastic_and_mass_conserving() {
        for map in [BranchMap::doubling(), BranchMap::markov_saw()] {
            let n = 128;
            let op = TransferOperator::ulam(map, n);
            let TransferOperator::Ulam { matrix, .. } = &op else { unreachable!() };
            for i in 0..n {
                let row: f64 = (0..n).map(|j| matrix[(i, j)]).sum();
                assert_abs_diff_eq!(row, 1.0, epsilon = 1e-12);
            }
            let phi = FiberFunction::Ulam(UlamFn::from_cells(
                (0..n).map(|i| c(((i * 37) % 11) as f64 / 11.0 + 0.1)).collect(),
            ));
            let m = ReferenceMeasure::Lebesgue;
            let before = phi.integrate(&m).unwrap();
            let after = op.apply(&phi).unwrap().integrate(&m).unwrap();
            assert_abs_diff_eq!(before.re, after.re, epsilon = 1e-10);
            // positivity
            let pos = op.apply(&phi).unwrap();
            assert!(pos.as_ulam().unwrap().cells().iter().all(|v| v.re >= -1e-12));
        }
    }

    #[test]
    fn ulam_duality_at_cell_resolution() {
        let map = BranchMap::markov_saw();
        let n = 512;
        let op = TransferOperator::ulam(map.clone(), n);
        let phi_fn = |x: f64| c((std::f64::consts::TAU * x).cos());
        let psi_fn = |x: f64| c(x * x);
        let phi = FiberFunction::Ulam(UlamFn::project(phi_fn, n));
        let psi = FiberFunction::Ulam(UlamFn::project(psi_fn, n));
        let lhs = op
            .apply(&phi)
            .unwrap()
            .mul(&psi)
            .unwrap()
            .integrate(&ReferenceMeasure::Lebesgue)
            .unwrap();
        let rhs = pullback_quad(phi_fn, psi_fn, &map, 1 << 16);
        // cellwise test functions: error is O(var/n)
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 2.0 / n as f64);
    }

    #[test]
    fn warped_branch_inverse_is_exact() {
        let b = Branch { lo: 0.0, hi: 0.5, img_lo: 0.0, img_hi: 1.0, warp: 0.4 };
        for i in 0..50 {
            let x = 0.01 * i as f64 * 0.5;
            let y = b.eval(x);
            assert_abs_diff_eq!(b.inverse(y), x, epsilon = 1e-12);
        }
        assert!(b.min_expansion() > 1.0);
    }
}
