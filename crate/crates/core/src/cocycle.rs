//! Equivariant density cocycles and the density-normalized operators.
//!
//! The density on fiber t is obtained by pulling the constant function back
//! through the operator chain: push 1 forward from fiber t−N to fiber t. Under
//! the uniform decay of mean-zero functions the iterates converge uniformly,
//! and the achieved residuals are reported rather than assumed.

use crate::fiberspace::FiberFunction;
use crate::system::FiberSystem;
use crate::{CoreError, Result};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Cached equivariant densities over a subwindow, with their certificates.
#[derive(Debug)]
pub struct DensityCocycle {
    lo: i64,
    hi: i64,
    densities: Vec<FiberFunction>,
    /// Pullback depth used for every fiber.
    pub depth: usize,
    /// Equivariance residuals ‖𝓛_t v_t − v_{t+1}‖_B for t in [lo, hi).
    pub residuals: Vec<f64>,
    /// Certified lower bound: min over fibers of the certified essential inf.
    pub rho: f64,
    /// max over fibers of ‖v_t‖_B.
    pub sup_norm_b: f64,
}

impl DensityCocycle {
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn density(&self, t: i64) -> Result<&FiberFunction> {
        if t < self.lo || t > self.hi {
            return Err(CoreError::HorizonExceeded { index: t, horizon: self.hi });
        }
        Ok(&self.densities[(t - self.lo) as usize])
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Pulls the constant function through `depth` steps, arriving at fiber `t`,
/// starting from the supplied seed function (usually 1).
fn pullback(
    system: &FiberSystem,
    t: i64,
    depth: usize,
    seed: &FiberFunction,
) -> Result<FiberFunction> {
    system.compose_apply(t - depth as i64, depth, seed)
}

/// Equivariant density at fiber `t` from a depth-`N` pullback of 1. The
/// self-consistency of the iteration is checked by comparing against two
/// shallower pullbacks; failure to keep contracting over the last quarter of
/// the depth raises `NonConvergence`.
pub fn density(system: &FiberSystem, t: i64, depth: usize) -> Result<FiberFunction> {
    if depth < 4 {
        return Err(CoreError::InvalidParameter("pullback depth must be >= 4".into()));
    }
    let one = system.one(t - depth as i64)?;
    let full = pullback(system, t, depth, &one)?;
    let m = system.measure(t)?;
    let half = pullback(system, t, depth / 2, &system.one(t - (depth / 2) as i64)?)?;
    let three_q = pullback(system, t, 3 * depth / 4, &system.one(t - (3 * depth / 4) as i64)?)?;
    let d_half = three_q.sub(&half)?.norm_b(m)?;
    let d_last = full.sub(&three_q)?.norm_b(m)?;
    let fp_floor = 1e-12 * (1.0 + full.norm_b(m)?);
    if d_last > d_half.max(fp_floor) {
        return Err(CoreError::NonConvergence(format!(
            "pullback increments grew over the last quarter: {d_half:.3e} then {d_last:.3e}"
        )));
    }
    Ok(full)
}

/// Densities for every fiber of [lo, hi], each from an independent depth-`N`
/// pullback, with equivariance residuals and the certified lower bound.
pub fn density_cocycle(
    system: &FiberSystem,
    lo: i64,
    hi: i64,
    depth: usize,
) -> Result<DensityCocycle> {
    let (wlo, _) = system.window();
    if lo - (depth as i64) < wlo {
        return Err(CoreError::HorizonExceeded {
            index: lo - depth as i64,
            horizon: wlo.abs(),
        });
    }
    let times: Vec<i64> = (lo..=hi).collect();
    let densities: Vec<FiberFunction> = times
        .par_iter()
        .map(|&t| density(system, t, depth))
        .collect::<Result<_>>()?;
    let mut residuals = Vec::with_capacity(times.len().saturating_sub(1));
    for (i, &t) in times[..times.len() - 1].iter().enumerate() {
        let pushed = system.op(t)?.apply(&densities[i])?;
        residuals.push(pushed.sub(&densities[i + 1])?.norm_b(system.measure(t + 1)?)?);
    }
    let rho = densities
        .iter()
        .map(|v| v.ess_inf_certified())
        .fold(f64::INFINITY, f64::min);
    if rho <= 0.0 {
        return Err(CoreError::DegenerateDensity(format!(
            "certified essential infimum {rho:.3e} is not positive"
        )));
    }
    let sup_norm_b = times
        .iter()
        .zip(densities.iter())
        .map(|(&t, v)| v.norm_b(system.measure(t).unwrap()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(DensityCocycle { lo, hi, densities, depth, residuals, rho, sup_norm_b })
}

/// The normalized operator L_t φ = 𝓛_t(φ v_t) / v_{t+1}; satisfies L 1 = 1 and
/// preserves the equivariant measures.
pub fn normalized_apply(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    phi: &FiberFunction,
) -> Result<FiberFunction> {
    let v_t = cocycle.density(t)?;
    let v_next = cocycle.density(t + 1)?;
    if v_t.is_exact_one() && v_next.is_exact_one() {
        return system.op(t)?.apply(phi);
    }
    let pushed = system.op(t)?.apply(&phi.mul(v_t)?)?;
    pushed.div(v_next, cocycle.rho * 0.5)
}

/// Iterated normalized operator L^{(n)}.
pub fn normalized_compose(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    n: usize,
    phi: &FiberFunction,
) -> Result<FiberFunction> {
    let mut cur = phi.clone();
    for k in 0..n {
        cur = normalized_apply(system, cocycle, t + k as i64, &cur)?;
    }
    Ok(cur)
}

/// ∫ φ dμ_t with dμ_t = v_t dm_t.
pub fn equivariant_integral(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    phi: &FiberFunction,
) -> Result<Complex64> {
    let v = cocycle.density(t)?;
    if v.is_exact_one() {
        return phi.integrate(system.measure(t)?);
    }
    phi.mul(v)?.integrate(system.measure(t)?)
}

/// Least-squares fit of ‖𝓛^{(n)}φ‖_B ≤ C e^{−λn} over a mean-zero corpus.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub c: f64,
    pub lambda: f64,
    /// (n, max over the corpus of the norm ratio at n).
    pub points: Vec<(usize, f64)>,
}

impl DecayFit {
    /// The fitted envelope C e^{−λ n}.
    pub fn envelope(&self, n: usize) -> f64 {
        self.c * (-self.lambda * n as f64).exp()
    }
}

/// Measures the decay of mean-zero functions under the operator chain
/// starting at fiber `t0`, and fits (C, λ). The n = 0 point is excluded.
pub fn decay_probe(
    system: &FiberSystem,
    t0: i64,
    corpus: &[FiberFunction],
    n_max: usize,
) -> Result<DecayFit> {
    if corpus.is_empty() || n_max < 2 {
        return Err(CoreError::FitFailed("need a corpus and n_max >= 2".into()));
    }
    let m0 = system.measure(t0)?;
    let norms: Vec<f64> =
        corpus.iter().map(|f| f.norm_b(m0)).collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut iterates: Vec<FiberFunction> = corpus.to_vec();
    for n in 1..=n_max {
        for it in iterates.iter_mut() {
            *it = system.op(t0 + n as i64 - 1)?.apply(it)?;
        }
        let m = system.measure(t0 + n as i64)?;
        let mut worst = 0.0f64;
        for (it, base) in iterates.iter().zip(norms.iter()) {
            worst = worst.max(it.norm_b(m)? / base.max(1e-300));
        }
        points.push((n, worst));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > 1e-13)
        .map(|&(n, r)| (n as f64, r.ln()))
        .collect();
    if usable.len() < 3 {
        // everything annihilated almost immediately: report the cliff
        let lambda = (1.0f64).max(-points.last().map(|&(_, r)| r.max(1e-300).ln()).unwrap_or(0.0)
            / n_max as f64);
        return Ok(DecayFit { c: 1.0, lambda, points });
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(CoreError::FitFailed("degenerate abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok(DecayFit { c: intercept.exp(), lambda: -slope, points })
}

/// Random mean-zero corpus on fiber `t`, seeded.
pub fn mean_zero_corpus(
    system: &FiberSystem,
    t: i64,
    count: usize,
    seed: u64,
) -> Result<Vec<FiberFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0;
    let m = system.measure(t)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = match system.one(t)? {
            FiberFunction::Fourier(_) => {
                let k = 8;
                let mut modes = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
                for freq in 1..=k {
                    let (a, b) = (unit(), unit());
                    modes[k + freq] = Complex64::new(a, b) * 0.5;
                    modes[k - freq] = Complex64::new(a, -b) * 0.5;
                }
                FiberFunction::Fourier(crate::fiberspace::FourierFn::from_modes(modes))
            }
            FiberFunction::Ulam(u) => {
                let cells = (0..u.len()).map(|_| Complex64::new(unit(), 0.0)).collect();
                FiberFunction::Ulam(crate::fiberspace::UlamFn::from_cells(cells))
            }
            FiberFunction::Cylinder(cy) => {
                let values = (0..cy.values().len()).map(|_| Complex64::new(unit(), 0.0)).collect();
                FiberFunction::Cylinder(
                    crate::fiberspace::CylinderFn::from_values(cy.table.clone(), values).unwrap(),
                )
            }
        };
        let mean = raw.integrate(m)?;
        out.push(raw.sub(&system.one(t)?.scale(mean))?);
    }
    Ok(out)
}

/// Empirical admissibility diagnostics: the operator-norm bound K, the
/// mean-zero decay fit, and the cone minorant c with ess-inf 𝓛^{(n₀)}φ ≥
/// c‖φ‖_{L¹} over nonnegative test functions of bounded relative variation.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub op_bound: f64,
    pub decay: DecayFit,
    pub cone_minorant: f64,
    pub cone_steps: usize,
}

pub fn admissibility_probe(
    system: &FiberSystem,
    t0: i64,
    n_max: usize,
    n0: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    let corpus = mean_zero_corpus(system, t0, 12, seed)?;
    let decay = decay_probe(system, t0, &corpus, n_max)?;
    let mut op_bound = 0.0f64;
    for f in &corpus {
        let num = system.op(t0)?.apply(f)?.norm_b(system.measure(t0 + 1)?)?;
        op_bound = op_bound.max(num / f.norm_b(system.measure(t0)?)?.max(1e-300));
    }
    // cone functions: 1 + scaled mean-zero perturbations stay nonnegative
    let mut cone_minorant = f64::INFINITY;
    for f in &corpus {
        let sup = f.ess_sup().max(1e-300);
        let g = system.one(t0)?.add(&f.scale(Complex64::new(0.4 / sup, 0.0)))?;
        let pushed = system.compose_apply(t0, n0, &g)?;
        let l1 = g.l1_norm(system.measure(t0)?)?;
        cone_minorant = cone_minorant.min(pushed.ess_inf_certified() / l1);
    }
    Ok(AdmissibilityReport { op_bound, decay, cone_minorant, cone_steps: n0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{BaseSystem, DrivingOrbit};
    use crate::fiberspace::{FourierFn, ReferenceMeasure};
    use crate::system::{Assignment, ObservableSpec, SystemBackend};
    use crate::transfer::BranchMap;
    use approx::assert_abs_diff_eq;

    fn fourier_system(maps: Assignment<BranchMap>, seed: u64, horizon: i64) -> FiberSystem {
        let orbit = DrivingOrbit::materialize(
            BaseSystem::IidSymbols { alphabet: 2, seed },
            None,
            horizon,
        )
        .unwrap();
        FiberSystem::interval(
            &orbit,
            &maps,
            SystemBackend::Fourier { cutoff: 64 },
            &ObservableSpec::None,
        )
        .unwrap()
    }

    fn two_slope_maps() -> Assignment<BranchMap> {
        Assignment::BySymbol(vec![
            BranchMap::linear_full_branch(2, 0.0).unwrap(),
            BranchMap::linear_full_branch(3, 0.0).unwrap(),
        ])
    }

    #[test]
    fn linear_family_density_is_exactly_one() {
        let sys = fourier_system(two_slope_maps(), 11, 60);
        let coc = density_cocycle(&sys, -16, 16, 40).unwrap();
        for t in -16..=16 {
            let v = coc.density(t).unwrap();
            assert!(v.is_exact_one() || v.sub(&sys.one(t).unwrap()).unwrap().ess_sup() < 1e-14);
        }
        assert!(coc.max_residual() < 1e-12);
        assert!(coc.rho > 0.9);
    }

    #[test]
    fn markov_saw_density_matches_piecewise_constant_solution() {
        // exact invariant density: 9/8 on [0, 2/3), 3/4 on [2/3, 1)
        let orbit =
            DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, 64).unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::markov_saw()),
            SystemBackend::Ulam { cells: 1026 },
            &ObservableSpec::None,
        )
        .unwrap();
        let v = density(&sys, 0, 60).unwrap();
        let cells = v.as_ulam().unwrap().cells();
        let n = cells.len();
        for (i, c) in cells.iter().enumerate() {
            let x = (i as f64 + 0.5) / n as f64;
            let expect = if x < 2.0 / 3.0 { 9.0 / 8.0 } else { 3.0 / 4.0 };
            assert_abs_diff_eq!(c.re, expect, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(
            v.integrate(&ReferenceMeasure::Lebesgue).unwrap().re,
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn markov_saw_density_matches_birkhoff_histogram() {
        // Monte-Carlo oracle: occupation histogram of a long orbit
        let map = BranchMap::markov_saw();
        let n_cells = 1024usize;
        let mut hist = vec![0u64; n_cells];
        let mut x = 0.2345678901234567;
        let steps = 10_000_000u64;
        for _ in 0..steps {
            x = map.eval(x);
            hist[((x * n_cells as f64) as usize).min(n_cells - 1)] += 1;
        }
        let orbit =
            DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, 64).unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(map),
            SystemBackend::Ulam { cells: n_cells },
            &ObservableSpec::None,
        )
        .unwrap();
        let v = density(&sys, 0, 50).unwrap();
        let cells = v.as_ulam().unwrap().cells();
        let l1: f64 = cells
            .iter()
            .zip(hist.iter())
            .map(|(c, &h)| (c.re - h as f64 * n_cells as f64 / steps as f64).abs())
            .sum::<f64>()
            / n_cells as f64;
        assert!(l1 < 5e-2, "L1 distance to orbit histogram was {l1}");
    }

    #[test]
    fn normalized_operator_fixes_one_and_preserves_mu() {
        let orbit =
            DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, 64).unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::markov_saw()),
            SystemBackend::Ulam { cells: 512 },
            &ObservableSpec::None,
        )
        .unwrap();
        let coc = density_cocycle(&sys, -2, 2, 50).unwrap();
        let one = sys.one(0).unwrap();
        let lone = normalized_apply(&sys, &coc, 0, &one).unwrap();
        assert!(lone.sub(&sys.one(1).unwrap()).unwrap().ess_sup() < 1e-10);

        let phi = FiberFunction::Fourier(FourierFn::cosine(1));
        let phi = FiberFunction::Ulam(crate::fiberspace::UlamFn::project(
            |x| Complex64::new(phi.as_fourier().unwrap().eval(x).re, 0.0),
            512,
        ));
        let before = equivariant_integral(&sys, &coc, 0, &phi).unwrap();
        let after = equivariant_integral(&sys, &coc, 1, &normalized_apply(&sys, &coc, 0, &phi).unwrap()).unwrap();
        assert_abs_diff_eq!(before.re, after.re, epsilon = 1e-10);
    }

    #[test]
    fn doubling_decay_rate_is_log_two() {
        let orbit =
            DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, 32).unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::doubling()),
            SystemBackend::Fourier { cutoff: 64 },
            &ObservableSpec::None,
        )
        .unwrap();
        let corpus = mean_zero_corpus(&sys, 0, 10, 99).unwrap();
        let fit = decay_probe(&sys, 0, &corpus, 4).unwrap();
        assert!(
            fit.lambda >= 0.9 * (2f64).ln(),
            "fitted rate {} below 0.9 ln 2",
            fit.lambda
        );
    }

    #[test]
    fn mixed_family_decay_is_positive() {
        let sys = fourier_system(two_slope_maps(), 5, 32);
        let corpus = mean_zero_corpus(&sys, 0, 8, 7).unwrap();
        let fit = decay_probe(&sys, 0, &corpus, 4).unwrap();
        assert!(fit.lambda > 0.0);
    }

    #[test]
    fn two_pullback_seeds_agree_within_fitted_envelope() {
        let sys = fourier_system(two_slope_maps(), 11, 60);
        let depth = 40usize;
        let t = 4i64;
        let start = t - depth as i64;
        let v_one = pullback(&sys, t, depth, &sys.one(start).unwrap()).unwrap();
        // a different positive density as the second seed
        let mut seed_fn = sys.one(start).unwrap();
        seed_fn = seed_fn
            .add(&FiberFunction::Fourier(FourierFn::cosine(2)).scale(Complex64::new(0.4, 0.0)))
            .unwrap();
        let v_two = pullback(&sys, t, depth, &seed_fn).unwrap();
        let gap = v_one.sub(&v_two).unwrap().norm_b(sys.measure(t).unwrap()).unwrap();
        let corpus = mean_zero_corpus(&sys, start, 8, 3).unwrap();
        let fit = decay_probe(&sys, start, &corpus, 6).unwrap();
        assert!(gap <= 2.0 * fit.envelope(depth) + 1e-12, "gap {gap}");
    }

    #[test]
    fn admissibility_probe_reports_finite_bounds() {
        let sys = fourier_system(two_slope_maps(), 11, 32);
        let rep = admissibility_probe(&sys, 0, 4, 3, 17).unwrap();
        assert!(rep.op_bound.is_finite() && rep.op_bound > 0.0);
        assert!(rep.cone_minorant > 0.0);
        assert!(rep.decay.lambda > 0.0);
    }
}
