//! The random-case coboundary engine: fiberwise centering, the backward
//! martingale–coboundary decomposition, the asymptotic variance, and the
//! series solver for F = H∘τ − H together with its diagnostics.
//!
//! Everything is phrased through the density-normalized operators L_t. The
//! transfer map candidate at fiber t is the series
//! Ĥ_t = Σ_{n≥1} L^{(n)}_{t−n} F̃_{t−n}, truncated under a verified geometric
//! envelope; for a true coboundary it reproduces H_t − ∫H_t dμ_t.

use crate::cocycle::{self, DensityCocycle};
use crate::fiberspace::FiberFunction;
use crate::system::{FiberSystem, SystemBackend};
use crate::{CoreError, Result};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Mutex;

fn re(z: Complex64) -> f64 {
    z.re
}

/// A coboundary problem over a prepared system and density cocycle.
pub struct CoboundaryProblem<'a> {
    pub system: &'a FiberSystem,
    pub cocycle: &'a DensityCocycle,
    /// Series terms below this norm are considered converged.
    pub tail_tol: f64,
    /// Hard cap on the series depth.
    pub series_cap: usize,
    chi_cache: Mutex<BTreeMap<i64, FiberFunction>>,
}

/// Verdict tolerances for the coboundary decision, tied to the backend.
#[derive(Debug, Clone, Copy)]
pub struct VerdictTolerances {
    pub sigma_tol: f64,
    pub pi_tol: f64,
    pub c_tol: f64,
}

impl VerdictTolerances {
    /// Base tolerances for a Fourier-backed system; the Ulam backend scales
    /// them by 10³. `f_norm` is sup_t ‖F_t‖_B.
    pub fn for_backend(backend: &SystemBackend, f_norm: f64) -> Self {
        let scale = match backend {
            SystemBackend::Ulam { .. } => 1e3,
            _ => 1.0,
        };
        VerdictTolerances {
            sigma_tol: 1e-6 * (1.0 + f_norm * f_norm) * scale,
            pi_tol: 1e-6 * scale,
            c_tol: 1e-9 * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Coboundary,
    NotACoboundary { diagnostic: String },
}

/// Per-fiber solver output.
#[derive(Debug, Clone)]
pub struct FiberSolve {
    pub t: i64,
    /// ∫ F dμ_t.
    pub c: f64,
    /// sup |F − (Ĥ_{t+1}∘T_t + c_t − Ĥ_t)|.
    pub coboundary_residual: f64,
    /// ‖L_t π_t‖_B.
    pub martingale_residual: f64,
    pub transfer_map: FiberFunction,
}

#[derive(Debug)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub sigma2: Sigma2Report,
    pub fibers: Vec<FiberSolve>,
    pub tolerances: VerdictTolerances,
}

#[derive(Debug, Clone)]
pub struct Sigma2Report {
    /// Boundary-corrected Green–Kubo estimate (the headline value).
    pub green_kubo: f64,
    /// Plain truncated Green–Kubo series, averaged over the anchors.
    pub green_kubo_raw: f64,
    /// Fiber boundary term ∫Ĥ²dμ_t − ∫Ĥ²dμ_{t+1} averaged over anchors; for
    /// non-stationary fibers the raw series of a true coboundary telescopes
    /// to exactly this defect, so it is subtracted.
    pub boundary_correction: f64,
    /// Certified bound on the dropped tail.
    pub tail_bound: f64,
    /// (1/n)∫(S_n F̃)² dμ at n = n_max, by exact covariance expansion.
    pub birkhoff: f64,
    /// Anchor-averaged autocovariances, lag 0..=n_max.
    pub autocovariances: Vec<f64>,
}

impl<'a> CoboundaryProblem<'a> {
    pub fn new(
        system: &'a FiberSystem,
        cocycle: &'a DensityCocycle,
        tail_tol: f64,
        series_cap: usize,
    ) -> Self {
        CoboundaryProblem { system, cocycle, tail_tol, series_cap, chi_cache: Mutex::new(BTreeMap::new()) }
    }

    /// Fiberwise mean: c_t = ∫ F_t dμ_t.
    pub fn mean(&self, t: i64) -> Result<Complex64> {
        cocycle::equivariant_integral(self.system, self.cocycle, t, self.system.observable(t)?)
    }

    /// Centered observable F̃_t = F_t − c_t.
    pub fn centered(&self, t: i64) -> Result<(FiberFunction, Complex64)> {
        let c = self.mean(t)?;
        let f = self.system.observable(t)?;
        Ok((f.sub(&self.system.one(t)?.scale(c))?, c))
    }

    fn l_apply(&self, t: i64, phi: &FiberFunction) -> Result<FiberFunction> {
        cocycle::normalized_apply(self.system, self.cocycle, t, phi)
    }

    /// Norm of the n-th series term L^{(n)}_{t−n} F̃_{t−n}.
    fn term_norm(&self, t: i64, n: usize) -> Result<f64> {
        let (f, _) = self.centered(t - n as i64)?;
        let pushed = cocycle::normalized_compose(self.system, self.cocycle, t - n as i64, n, &f)?;
        pushed.norm_b(self.system.measure(t)?)
    }

    /// The series Ĥ_t = Σ_{n=1}^{N} L^{(n)} F̃(t−n), left-accumulated, with a
    /// three-depth check that the term norms keep decaying geometrically.
    pub fn chi(&self, t: i64) -> Result<FiberFunction> {
        if let Some(hit) = self.chi_cache.lock().unwrap().get(&t) {
            return Ok(hit.clone());
        }
        let depth = self.series_cap;
        let (wlo, _) = self.system.window();
        if t - (depth as i64) < wlo {
            return Err(CoreError::HorizonExceeded { index: t - depth as i64, horizon: wlo.abs() });
        }
        let quarter = self.term_norm(t, (depth / 4).max(1))?;
        let half = self.term_norm(t, (depth / 2).max(2))?;
        let last = self.term_norm(t, depth)?;
        let floor = self.tail_tol.max(1e-14);
        if last > floor || (half > quarter.max(floor)) || (last > half.max(floor)) {
            return Err(CoreError::TailNotConverged(format!(
                "series terms at depths {}/{}/{} have norms {quarter:.3e}/{half:.3e}/{last:.3e}",
                (depth / 4).max(1),
                (depth / 2).max(2),
                depth
            )));
        }
        let start = t - depth as i64;
        let mut acc = self.system.one(start)?.scale(Complex64::new(0.0, 0.0));
        for j in start..t {
            let (f, _) = self.centered(j)?;
            acc = self.l_apply(j, &acc.add(&f)?)?;
        }
        // normalize ∫ Ĥ dμ = 0 (holds up to round-off already)
        let mean = cocycle::equivariant_integral(self.system, self.cocycle, t, &acc)?;
        let out = acc.sub(&self.system.one(t)?.scale(mean))?;
        self.chi_cache.lock().unwrap().insert(t, out.clone());
        Ok(out)
    }

    /// Martingale part π_t = F̃_t + Ĥ_t − Ĥ_{t+1}∘T_t.
    pub fn martingale_part(&self, t: i64) -> Result<FiberFunction> {
        let (f, _) = self.centered(t)?;
        let chi_t = self.chi(t)?;
        let chi_next = self.chi(t + 1)?;
        let pulled = self.system.op(t)?.koopman(&chi_next)?;
        f.add(&chi_t)?.sub(&pulled)
    }

    /// ‖L_t π_t‖_B — the reverse-martingale property seen through m-duality.
    pub fn martingale_residual(&self, t: i64) -> Result<f64> {
        let pi = self.martingale_part(t)?;
        self.l_apply(t, &pi)?.norm_b(self.system.measure(t + 1)?)
    }

    /// Green–Kubo and covariance-expanded Birkhoff estimates of the
    /// asymptotic variance, averaged over the anchor fibers.
    pub fn sigma2(&self, anchors: &[i64], n_max: usize) -> Result<Sigma2Report> {
        if anchors.is_empty() {
            return Err(CoreError::InvalidParameter("sigma2 needs at least one anchor".into()));
        }
        let mut autocov = vec![0.0f64; n_max + 1];
        for &t in anchors {
            let cov = self.autocovariance_row(t, n_max)?;
            for (a, c) in autocov.iter_mut().zip(cov.iter()) {
                *a += c / anchors.len() as f64;
            }
        }
        let green_kubo_raw = autocov[0] + 2.0 * autocov[1..].iter().sum::<f64>();

        // fiber boundary term: the truncated series of a coboundary
        // telescopes to ∫Ĥ² dμ_t − ∫Ĥ² dμ_{t+1} plus mixing-small remainders
        let mut boundary_correction = 0.0;
        for &t in anchors {
            let chi_t = self.chi(t)?;
            let chi_next = self.chi(t + 1)?;
            let v_t = re(cocycle::equivariant_integral(
                self.system,
                self.cocycle,
                t,
                &chi_t.mul(&chi_t)?,
            )?);
            let v_next = re(cocycle::equivariant_integral(
                self.system,
                self.cocycle,
                t + 1,
                &chi_next.mul(&chi_next)?,
            )?);
            boundary_correction += (v_t - v_next) / anchors.len() as f64;
        }
        let green_kubo = green_kubo_raw - boundary_correction;

        // tail bound from the fitted decay of mean-zero functions
        let t0 = anchors[0];
        let corpus = cocycle::mean_zero_corpus(self.system, t0, 6, 23)?;
        let fit = cocycle::decay_probe(self.system, t0, &corpus, (n_max / 2).clamp(2, 8))?;
        let (f0, _) = self.centered(t0)?;
        let f_sup = f0.ess_sup();
        let f_b = f0.norm_b(self.system.measure(t0)?)?;
        let lam = fit.lambda.max(1e-6);
        let tail_bound = 2.0 * f_sup * fit.c * f_b * (-lam * (n_max as f64 + 1.0)).exp()
            / (1.0 - (-lam).exp());

        // (1/n)∫(S_n F̃)² dμ over the first anchor, exact covariance expansion
        let t = anchors[0];
        let n = n_max;
        let mut total = 0.0;
        for i in 0..n {
            let row = self.autocovariance_row(t + i as i64, n - i - 1)?;
            total += row[0] + 2.0 * row[1..].iter().sum::<f64>();
        }
        let birkhoff = total / n as f64;

        Ok(Sigma2Report {
            green_kubo,
            green_kubo_raw,
            boundary_correction,
            tail_bound,
            birkhoff,
            autocovariances: autocov,
        })
    }

    /// cov_k(t) = ∫ F̃_t · (F̃_{t+k}∘T^{(k)}) dμ_t for k = 0..=n, by pushing
    /// 𝓛^{(k)}(F̃_t v_t) forward (m-duality).
    fn autocovariance_row(&self, t: i64, n: usize) -> Result<Vec<f64>> {
        let (f0, _) = self.centered(t)?;
        let v0 = self.cocycle.density(t)?;
        let mut push = if v0.is_exact_one() { f0.clone() } else { f0.mul(v0)? };
        let mut out = Vec::with_capacity(n + 1);
        out.push(re(f0.mul(&push)?.integrate(self.system.measure(t)?)?));
        for k in 1..=n {
            push = self.system.op(t + k as i64 - 1)?.apply(&push)?;
            let (fk, _) = self.centered(t + k as i64)?;
            out.push(re(fk.mul(&push)?.integrate(self.system.measure(t + k as i64)?)?));
        }
        Ok(out)
    }

    /// Stratified Monte-Carlo Birkhoff estimator of Σ² on the interval
    /// backends: E_μ[(S_n F̃)²]/n with `samples` stratified points.
    pub fn sigma2_birkhoff_mc(
        &self,
        t: i64,
        horizon: usize,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let evals: Vec<Box<dyn Fn(f64) -> f64>> = (0..horizon)
            .map(|k| {
                let (f, _) = self.centered(t + k as i64)?;
                let h: Box<dyn Fn(f64) -> f64> = match f {
                    FiberFunction::Fourier(ff) => Box::new(move |x: f64| ff.eval(x).re),
                    FiberFunction::Ulam(u) => Box::new(move |x: f64| u.eval(x).re),
                    FiberFunction::Cylinder(_) => {
                        return Err(CoreError::BackendMismatch(
                            "pointwise sampler needs an interval backend".into(),
                        ))
                    }
                };
                Ok(h)
            })
            .collect::<Result<_>>()?;
        let maps: Vec<crate::transfer::BranchMap> = (0..horizon)
            .map(|k| self.interval_map(t + k as i64))
            .collect::<Result<_>>()?;
        let weight: Box<dyn Fn(f64) -> f64> = match self.cocycle.density(t)? {
            v if v.is_exact_one() => Box::new(|_| 1.0),
            FiberFunction::Fourier(ff) => {
                let ff = ff.clone();
                Box::new(move |x| ff.eval(x).re)
            }
            FiberFunction::Ulam(u) => {
                let u = u.clone();
                Box::new(move |x| u.eval(x).re)
            }
            _ => unreachable!(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for s in 0..samples {
            let x0 = (s as f64 + unit()) / samples as f64;
            let mut x = x0;
            let mut sum = 0.0;
            for k in 0..horizon {
                sum += evals[k](x);
                x = maps[k].eval(x);
            }
            let w = weight(x0);
            acc += w * sum * sum;
            mass += w;
        }
        Ok(acc / mass / horizon as f64)
    }

    fn interval_map(&self, t: i64) -> Result<crate::transfer::BranchMap> {
        match self.system.op(t)? {
            crate::transfer::TransferOperator::Ulam { map, .. } => Ok((**map).clone()),
            crate::transfer::TransferOperator::FourierLinear { slope, offset } => {
                crate::transfer::BranchMap::linear_full_branch(*slope, *offset)
            }
            _ => Err(CoreError::BackendMismatch("no interval map at this fiber".into())),
        }
    }

    /// Solves the cohomological equation on the sample fibers and issues the
    /// coboundary verdict.
    pub fn solve(&self, samples: &[i64], n_max_sigma: usize) -> Result<SolveReport> {
        if samples.is_empty() {
            return Err(CoreError::InvalidParameter("solve needs sample fibers".into()));
        }
        let backend = self.system.backend();
        let mut f_norm = 0.0f64;
        for &t in samples {
            f_norm = f_norm.max(self.system.observable(t)?.norm_b(self.system.measure(t)?)?);
        }
        let tol = VerdictTolerances::for_backend(backend, f_norm);

        let mut fibers = Vec::with_capacity(samples.len());
        for &t in samples {
            let (_, c) = self.centered(t)?;
            let chi_t = self.chi(t)?;
            let chi_next = self.chi(t + 1)?;
            // residual of F = Ĥ∘τ + c − Ĥ
            let pulled = self.system.op(t)?.koopman(&chi_next)?;
            let recon = pulled.add(&self.system.one(t)?.scale(c))?.sub(&chi_t)?;
            let resid = self.system.observable(t)?.sub(&recon)?.ess_sup();
            let m_res = self.martingale_residual(t)?;
            fibers.push(FiberSolve {
                t,
                c: c.re,
                coboundary_residual: resid,
                martingale_residual: m_res,
                transfer_map: chi_t,
            });
        }
        let sigma2 = self.sigma2(samples, n_max_sigma)?;

        let worst_c = fibers.iter().map(|f| f.c.abs()).fold(0.0, f64::max);
        let worst_pi = fibers.iter().map(|f| f.martingale_residual).fold(0.0, f64::max);
        let sigma_val = sigma2.green_kubo.abs();
        let verdict = if sigma_val <= tol.sigma_tol && worst_pi <= tol.pi_tol && worst_c <= tol.c_tol
        {
            Verdict::Coboundary
        } else {
            let mut why = Vec::new();
            if sigma_val > tol.sigma_tol {
                why.push(format!("sigma2 {sigma_val:.3e} > {:.3e}", tol.sigma_tol));
            }
            if worst_pi > tol.pi_tol {
                why.push(format!("martingale residual {worst_pi:.3e} > {:.3e}", tol.pi_tol));
            }
            if worst_c > tol.c_tol {
                why.push(format!("fiber mean {worst_c:.3e} > {:.3e}", tol.c_tol));
            }
            Verdict::NotACoboundary { diagnostic: why.join("; ") }
        };
        Ok(SolveReport { verdict, sigma2, fibers, tolerances: tol })
    }

    /// sup over sample fibers of the distance between the recovered transfer
    /// map and the planted one (both centered), when a planted H exists.
    pub fn recovery_error(&self, samples: &[i64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &t in samples {
            let planted = self.system.planted(t).ok_or_else(|| {
                CoreError::InvalidParameter("system has no planted transfer map".into())
            })?;
            let mean =
                cocycle::equivariant_integral(self.system, self.cocycle, t, planted)?;
            let centered = planted.sub(&self.system.one(t)?.scale(mean))?;
            worst = worst.max(self.chi(t)?.sub(&centered)?.ess_sup());
        }
        Ok(worst)
    }

    /// Equivariance residual of the detector functional
    /// ℓ^s_t(φ) = ∫ e^{−isH_t} φ dm_t built from a candidate transfer map:
    /// r = max over the test set of |ℓ^s_t(φ) − ℓ^s_{t+1}(𝓛^{is}_t φ)|/‖φ‖_B.
    /// Also reports the empirical norm bound of ℓ^s.
    pub fn detector_residual(
        &self,
        candidates: &dyn Fn(i64) -> Result<FiberFunction>,
        s: f64,
        t: i64,
        tests: &[FiberFunction],
    ) -> Result<(f64, f64)> {
        let weight_at = |tt: i64| -> Result<FiberFunction> {
            Ok(candidates(tt)?.scale(Complex64::new(0.0, -s)).exp())
        };
        let w_t = weight_at(t)?;
        let w_next = weight_at(t + 1)?;
        let m_t = self.system.measure(t)?;
        let m_next = self.system.measure(t + 1)?;
        let mut resid = 0.0f64;
        let mut norm_bound = 0.0f64;
        for phi in tests {
            let here = w_t.mul(phi)?.integrate(m_t)?;
            let twisted = self.system.op(t)?.apply_twisted(
                Complex64::new(0.0, s),
                self.system.observable(t)?,
                phi,
            )?;
            let there = w_next.mul(&twisted)?.integrate(m_next)?;
            let denom = phi.norm_b(m_t)?.max(1e-300);
            resid = resid.max((here - there).norm() / denom);
            norm_bound = norm_bound.max(here.norm() / denom);
        }
        Ok((resid, norm_bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{BaseSystem, DrivingOrbit};
    use crate::fiberspace::FourierFn;
    use crate::system::{Assignment, ObservableSpec, SystemBackend};
    use crate::transfer::BranchMap;
    use approx::assert_abs_diff_eq;

    fn doubling(observable: ObservableSpec, horizon: i64) -> (FiberSystem, DensityCocycle) {
        let orbit = DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, horizon)
            .unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::doubling()),
            SystemBackend::Fourier { cutoff: 64 },
            &observable,
        )
        .unwrap();
        let coc = cocycle::density_cocycle(&sys, -horizon + 40, horizon, 40).unwrap();
        (sys, coc)
    }

    fn cos(k: usize) -> FiberFunction {
        FiberFunction::Fourier(FourierFn::cosine(k))
    }

    #[test]
    fn centering_examples() {
        // F = cos4πx − cos2πx is already centered under Lebesgue
        let f = cos(2).sub(&cos(1)).unwrap();
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(f)), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let (ft, c) = p.centered(0).unwrap();
        assert_abs_diff_eq!(c.norm(), 0.0, epsilon = 1e-14);
        assert!(ft.sub(sys.observable(0).unwrap()).unwrap().ess_sup() < 1e-14);

        // constant F = 5 centers to zero
        let five = FiberFunction::Fourier(FourierFn::constant(Complex64::new(5.0, 0.0)));
        let (sys5, coc5) = doubling(ObservableSpec::Explicit(Assignment::Uniform(five)), 96);
        let p5 = CoboundaryProblem::new(&sys5, &coc5, 1e-12, 48);
        let (ft5, c5) = p5.centered(0).unwrap();
        assert_abs_diff_eq!(c5.re, 5.0, epsilon = 1e-14);
        assert!(ft5.ess_sup() < 1e-14);
    }

    #[test]
    fn chi_recovers_cosine_from_telescoped_observable() {
        // F̃ = cos4πx − cos2πx: L F̃ = cos2πx, L² F̃ = 0 ⇒ Ĥ = cos2πx
        let f = cos(2).sub(&cos(1)).unwrap();
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(f)), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let chi = p.chi(0).unwrap();
        assert!(chi.sub(&cos(1)).unwrap().ess_sup() < 1e-12);

        // F̃ = cos2πx is annihilated in one step ⇒ Ĥ = 0
        let (sys2, coc2) = doubling(ObservableSpec::Explicit(Assignment::Uniform(cos(1))), 96);
        let p2 = CoboundaryProblem::new(&sys2, &coc2, 1e-12, 48);
        assert!(p2.chi(0).unwrap().ess_sup() < 1e-13);
    }

    #[test]
    fn martingale_part_vanishes_for_planted_coboundary() {
        let (sys, coc) = doubling(ObservableSpec::PlantedCoboundary(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        assert!(p.martingale_part(0).unwrap().ess_sup() < 1e-12);
        assert!(p.martingale_residual(0).unwrap() < 1e-12);
    }

    #[test]
    fn martingale_part_of_first_mode_is_itself_and_annihilates() {
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let pi = p.martingale_part(0).unwrap();
        assert!(pi.sub(&cos(1)).unwrap().ess_sup() < 1e-13);
        assert!(p.martingale_residual(0).unwrap() < 1e-13);
    }

    #[test]
    fn sigma2_of_planted_coboundary_vanishes() {
        let f = cos(2).sub(&cos(1)).unwrap();
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(f)), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let rep = p.sigma2(&[0], 24).unwrap();
        assert_abs_diff_eq!(rep.green_kubo, 0.0, epsilon = 1e-12);
        // lag covariances: 1 at 0 (∫(cos4π−cos2π)² = 1), −1/2 at 1, 0 beyond
        assert_abs_diff_eq!(rep.autocovariances[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.autocovariances[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.autocovariances[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma2_of_first_mode_is_one_half() {
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let rep = p.sigma2(&[0], 24).unwrap();
        assert_abs_diff_eq!(rep.green_kubo, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.birkhoff, 0.5, epsilon = 1e-12);
        // zero observable
        let zero = FiberFunction::Fourier(FourierFn::zero());
        let (sys0, coc0) = doubling(ObservableSpec::Explicit(Assignment::Uniform(zero)), 96);
        let p0 = CoboundaryProblem::new(&sys0, &coc0, 1e-12, 48);
        assert_abs_diff_eq!(p0.sigma2(&[0], 24).unwrap().green_kubo, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn solve_planted_doubling_coboundary() {
        let (sys, coc) = doubling(ObservableSpec::PlantedCoboundary(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let report = p.solve(&[0, 1, 2], 24).unwrap();
        assert_eq!(report.verdict, Verdict::Coboundary);
        for f in &report.fibers {
            assert!(f.coboundary_residual < 1e-8);
            assert!(f.martingale_residual < 1e-8);
        }
        assert!(p.recovery_error(&[0, 1, 2]).unwrap() < 1e-8);
    }

    #[test]
    fn solve_flags_first_mode_as_non_coboundary() {
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let report = p.solve(&[0], 24).unwrap();
        match &report.verdict {
            Verdict::NotACoboundary { diagnostic } => {
                assert!(diagnostic.contains("sigma2"));
            }
            v => panic!("expected NotACoboundary, got {v:?}"),
        }
        assert_abs_diff_eq!(report.sigma2.green_kubo, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_fiber_planted_recovery() {
        let orbit = DrivingOrbit::materialize(
            BaseSystem::IidSymbols { alphabet: 2, seed: 42 },
            None,
            120,
        )
        .unwrap();
        let maps = Assignment::BySymbol(vec![
            BranchMap::linear_full_branch(2, 0.0).unwrap(),
            BranchMap::linear_full_branch(3, 0.0).unwrap(),
        ]);
        let planted = Assignment::BySymbol(vec![
            cos(1),
            FiberFunction::Fourier(FourierFn::sine(1)),
        ]);
        let sys = FiberSystem::interval(
            &orbit,
            &maps,
            SystemBackend::Fourier { cutoff: 64 },
            &ObservableSpec::PlantedCoboundary(planted),
        )
        .unwrap();
        let coc = cocycle::density_cocycle(&sys, -70, 40, 40).unwrap();
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let samples: Vec<i64> = (-16..=16).collect();
        let report = p.solve(&samples, 24).unwrap();
        assert_eq!(report.verdict, Verdict::Coboundary);
        assert!(p.recovery_error(&samples).unwrap() < 1e-6);
    }

    #[test]
    fn birkhoff_mc_agrees_with_green_kubo() {
        let (sys, coc) = doubling(ObservableSpec::Explicit(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let gk = p.sigma2(&[0], 24).unwrap().green_kubo;
        let mc = p.sigma2_birkhoff_mc(0, 8, 10_000, 4242).unwrap();
        assert!((gk - mc).abs() <= 1e-3, "GK {gk} vs MC {mc}");
    }

    #[test]
    fn detector_residual_small_for_true_solution_large_for_wrong() {
        let (sys, coc) = doubling(ObservableSpec::PlantedCoboundary(Assignment::Uniform(cos(1))), 96);
        let p = CoboundaryProblem::new(&sys, &coc, 1e-12, 48);
        let tests: Vec<FiberFunction> =
            vec![sys.one(0).unwrap(), cos(1), cos(2), FiberFunction::Fourier(FourierFn::sine(1))];
        // s = 0: the functional is the reference measure itself
        let truth = |_: i64| Ok(cos(1));
        let (r0, b0) = p.detector_residual(&truth, 0.0, 0, &tests).unwrap();
        assert!(r0 < 1e-10, "mass-conservation residual {r0}");
        assert!(b0 <= 1.0 + 1e-10);
        let (r1, b1) = p.detector_residual(&truth, 1.0, 0, &tests).unwrap();
        assert!(r1 < 1e-7, "true-solution residual {r1}");
        assert!(b1 <= 1.0 + 1e-10);
        let wrong = |_: i64| Ok(cos(1).add(&cos(2)).unwrap());
        let (r2, _) = p.detector_residual(&wrong, 1.0, 0, &tests).unwrap();
        assert!(r2 > 1e-3, "wrong-solution residual {r2}");
    }

    #[test]
    fn planted_telescoping_of_birkhoff_sums() {
        let (sys, _) = doubling(ObservableSpec::PlantedCoboundary(Assignment::Uniform(cos(1))), 96);
        // S_n F = H∘τⁿ − H exactly
        for n in [1usize, 3, 5] {
            let sn = sys.birkhoff_sum(0, n).unwrap();
            let h_end = sys.compose_koopman(0, n, &cos(1)).unwrap();
            let expect = h_end.sub(&cos(1)).unwrap();
            assert!(sn.sub(&expect).unwrap().ess_sup() < 1e-12);
        }
    }
}
