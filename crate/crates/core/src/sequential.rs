//! Sequential (one-sided, non-stationary) decomposition of an observable
//! sequence into centering constants, a coboundary built from bounded pieces,
//! and a reverse-martingale remainder:
//!
//!   F_j = c_j + U_{j+1}∘T_j − U_j + M_j,    U_j = Σ_{k=1}^{j} 𝓛^{(k)} F̃_{j−k}.
//!
//! The reference measures must be equivariant, (T_j)_* m_j = m_{j+1}; the
//! probe refuses sequences that are not (re-base them on their density
//! sequence first).

use crate::fiberspace::FiberFunction;
use crate::system::FiberSystem;
use crate::{CoreError, Result};
use num_complex::Complex64;

/// A sequential problem over fibers j = 0..=horizon of `system` (the window
/// may extend further; the extra fibers feed reconstruction tails).
pub struct SequentialProblem<'a> {
    pub system: &'a FiberSystem,
    pub horizon: usize,
    pub tail_tol: f64,
}

#[derive(Debug)]
pub struct SequentialDecomposition {
    /// c_j = ∫ F_j dm_j.
    pub c: Vec<f64>,
    /// U_j for j = 0..=horizon (U_0 = 0).
    pub u: Vec<FiberFunction>,
    /// M_j for j = 0..horizon.
    pub m: Vec<FiberFunction>,
    /// ‖F_j − c_j − U_{j+1}∘T_j + U_j − M_j‖_B per j.
    pub identity_residuals: Vec<f64>,
    /// ‖𝓛_j M_j‖_B per j.
    pub martingale_residuals: Vec<f64>,
    /// ∫ U_j dm_j per j.
    pub u_means: Vec<f64>,
    /// ‖M_j‖_{L²(m_j)} per j (equals ‖M_j∘T_0^{(j)}‖_{L²(m_0)}).
    pub m_l2: Vec<f64>,
}

impl<'a> SequentialProblem<'a> {
    pub fn new(system: &'a FiberSystem, horizon: usize, tail_tol: f64) -> Result<Self> {
        let (lo, hi) = system.window();
        if lo > 0 || (hi as usize) < horizon {
            return Err(CoreError::HorizonExceeded { index: horizon as i64, horizon: hi });
        }
        Ok(SequentialProblem { system, horizon, tail_tol })
    }

    fn check_equivariance(&self) -> Result<()> {
        for j in 0..self.horizon {
            let defect = self.system.equivariance_defect(j as i64)?;
            if defect > 1e-10 {
                return Err(CoreError::NonEquivariantMeasure(format!(
                    "‖𝓛_{j} 1 − 1‖ = {defect:.3e}; re-base on the density sequence first"
                )));
            }
        }
        Ok(())
    }

    fn centered(&self, j: i64) -> Result<(FiberFunction, f64)> {
        let f = self.system.observable(j)?;
        let c = f.integrate(self.system.measure(j)?)?;
        Ok((f.sub(&self.system.one(j)?.scale(c))?, c.re))
    }

    /// Computes the decomposition up to the problem horizon.
    pub fn decompose(&self) -> Result<SequentialDecomposition> {
        self.check_equivariance()?;
        let j_max = self.horizon;
        let mut c = Vec::with_capacity(j_max + 1);
        let mut ftilde = Vec::with_capacity(j_max + 1);
        for j in 0..=j_max {
            let (f, cj) = self.centered(j as i64)?;
            ftilde.push(f);
            c.push(cj);
        }
        // U_{j+1} = 𝓛_j (U_j + F̃_j), U_0 = 0
        let mut u = Vec::with_capacity(j_max + 1);
        u.push(self.system.one(0)?.scale(Complex64::new(0.0, 0.0)));
        for j in 0..j_max {
            let next = self.system.op(j as i64)?.apply(&u[j].add(&ftilde[j])?)?;
            u.push(next);
        }
        let mut m = Vec::with_capacity(j_max);
        let mut identity_residuals = Vec::with_capacity(j_max);
        let mut martingale_residuals = Vec::with_capacity(j_max);
        let mut u_means = Vec::with_capacity(j_max + 1);
        let mut m_l2 = Vec::with_capacity(j_max);
        for j in 0..j_max {
            let pulled = self.system.op(j as i64)?.koopman(&u[j + 1])?;
            let mj = ftilde[j].add(&u[j])?.sub(&pulled)?;
            let meas_next = self.system.measure(j as i64 + 1)?;
            martingale_residuals
                .push(self.system.op(j as i64)?.apply(&mj)?.norm_b(meas_next)?);
            // residual of Eq. F_j − c_j = U_{j+1}∘T_j − U_j + M_j
            let recon = pulled.sub(&u[j])?.add(&mj)?;
            identity_residuals
                .push(ftilde[j].sub(&recon)?.norm_b(self.system.measure(j as i64)?)?);
            m_l2.push(mj.lp_norm(2.0, self.system.measure(j as i64)?)?);
            m.push(mj);
        }
        for (j, uj) in u.iter().enumerate() {
            u_means.push(uj.integrate(self.system.measure(j as i64)?)?.re);
        }
        Ok(SequentialDecomposition {
            c,
            u,
            m,
            identity_residuals,
            martingale_residuals,
            u_means,
            m_l2,
        })
    }

    /// Martingale orthogonality ∫ (M_j∘T_0^{(j)})(M_k∘T_0^{(k)}) dm_0 for
    /// j < k, evaluated as ∫ M_k · 𝓛^{(k−j)} M_j dm_k.
    pub fn orthogonality_defect(
        &self,
        dec: &SequentialDecomposition,
        pairs: &[(usize, usize)],
    ) -> Result<f64> {
        let mut worst = 0.0f64;
        for &(j, k) in pairs {
            if j >= k || k >= dec.m.len() {
                return Err(CoreError::InvalidParameter("pairs must satisfy j < k < J".into()));
            }
            let pushed = self.system.compose_apply(j as i64, k - j, &dec.m[j])?;
            let inner = dec.m[k].mul(&pushed)?.integrate(self.system.measure(k as i64)?)?;
            worst = worst.max(inner.norm());
        }
        Ok(worst)
    }

    /// L²(m_0) dyadic-block Cauchy probe for Σ M_j∘T_0^{(j)}: by martingale
    /// orthogonality the block norm is the root of Σ ‖M_j‖²_{L²(m_j)}.
    pub fn martingale_series_cauchy(&self, dec: &SequentialDecomposition) -> (Vec<f64>, bool) {
        let mut blocks = Vec::new();
        let mut start = 1usize;
        while start < dec.m_l2.len() {
            let end = (2 * start).min(dec.m_l2.len());
            let s: f64 = dec.m_l2[start..end].iter().map(|x| x * x).sum();
            blocks.push(s.sqrt());
            start = end;
        }
        let converged = blocks.last().map(|&b| b <= self.tail_tol.max(1e-12)).unwrap_or(true);
        (blocks, converged)
    }

    /// Var_{m_0}(S_{0,n} F̃) for n = 1..=n_max by exact covariance expansion,
    /// with a least-squares slope over the last half and a verdict.
    pub fn variance_sup_probe(&self, n_max: usize) -> Result<VarianceProbe> {
        self.check_equivariance()?;
        let n_max = n_max.min(self.horizon);
        // cov rows: r[i][d] = ∫ F̃_i · (F̃_{i+d}∘T_i^{(d)}) dm_i
        let mut variances = Vec::with_capacity(n_max);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n_max {
            let (fi, _) = self.centered(i as i64)?;
            let mut row = Vec::with_capacity(n_max - i);
            let mut push = fi.clone();
            row.push(fi.mul(&push)?.integrate(self.system.measure(i as i64)?)?.re);
            for d in 1..n_max - i {
                push = self.system.op((i + d - 1) as i64)?.apply(&push)?;
                let (fd, _) = self.centered((i + d) as i64)?;
                row.push(fd.mul(&push)?.integrate(self.system.measure((i + d) as i64)?)?.re);
            }
            rows.push(row);
        }
        for n in 1..=n_max {
            // Var(S_n) = Σ_{i<n} var_i + 2 Σ_{i<n} Σ_{1<=d<n-i} cov_i(d)
            let mut total = 0.0;
            for (i, row) in rows.iter().enumerate().take(n) {
                total += row[0];
                for d in 1..n - i {
                    total += 2.0 * row[d];
                }
            }
            variances.push(total);
        }
        let half = n_max / 2;
        let pts: Vec<(f64, f64)> =
            (half..n_max).map(|i| ((i + 1) as f64, variances[i])).collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        Ok(VarianceProbe { variances, slope, bounded: slope.abs() <= 1e-3 })
    }

    /// H_n ≈ U_n − Σ_{k=n}^{n+tail_k} M_k∘T_n^{(k−n)}, with the l² tail of the
    /// remaining computed martingale norms as the tail estimate. Terms with
    /// negligible norm are skipped.
    pub fn reconstruct_h(
        &self,
        dec: &SequentialDecomposition,
        n: usize,
        tail_k: usize,
    ) -> Result<(FiberFunction, f64)> {
        if n + tail_k > dec.m.len() {
            return Err(CoreError::HorizonExceeded {
                index: (n + tail_k) as i64,
                horizon: dec.m.len() as i64,
            });
        }
        let mut out = dec.u[n].clone();
        for k in n..n + tail_k {
            if dec.m_l2[k] < 1e-15 {
                continue;
            }
            let pulled = self.system.compose_koopman(n as i64, k - n, &dec.m[k])?;
            out = out.sub(&pulled)?;
        }
        // the dropped martingale norms must keep decaying: compare the two
        // halves of the remaining range (blockwise Cauchy test)
        let rest = &dec.m_l2[(n + tail_k)..];
        if rest.len() >= 4 {
            let half = rest.len() / 2;
            let first: f64 = rest[..half].iter().map(|x| x * x).sum();
            let second: f64 = rest[half..].iter().map(|x| x * x).sum();
            if second > first.max(1e-28) {
                return Err(CoreError::TailNotConverged(format!(
                    "martingale norms beyond k = {} stopped decaying: {first:.3e} then {second:.3e}",
                    n + tail_k
                )));
            }
        }
        let tail: f64 = rest.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok((out, tail))
    }

    /// ‖(H_n − U_n)∘T_0^{(n)} − q_n‖_{L²(m_0)} for each n, using measure
    /// equivariance to evaluate on fiber n directly. Needs planted H_n.
    pub fn limexp_curve(&self, dec: &SequentialDecomposition, n_max: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max.min(dec.u.len() - 1) {
            let h = self.system.planted(n as i64).ok_or_else(|| {
                CoreError::InvalidParameter("limexp needs a planted transfer map".into())
            })?;
            let g = h.sub(&dec.u[n])?;
            let q = g.integrate(self.system.measure(n as i64)?)?;
            let centered = g.sub(&self.system.one(n as i64)?.scale(q))?;
            out.push(centered.lp_norm(2.0, self.system.measure(n as i64)?)?);
        }
        Ok(out)
    }
}

#[derive(Debug)]
pub struct VarianceProbe {
    pub variances: Vec<f64>,
    pub slope: f64,
    pub bounded: bool,
}
