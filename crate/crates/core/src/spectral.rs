//! Top spectral data of the twisted operators 𝓛^θ: the fiberwise triplet
//! (λ^θ, v^θ, φ^θ), the exponential decay of the remainder, and the
//! eigenvalue-product signature that separates coboundaries from observables
//! with positive asymptotic variance.
//!
//! The triplets are produced by normalized pullback power iteration; the
//! iteration detects the loss of its own spectral gap instead of assuming a
//! θ-neighbourhood up front.

use crate::cocycle::DensityCocycle;
use crate::fiberspace::{FiberFunction, FourierFn};
use crate::system::FiberSystem;
use crate::{CoreError, Result};
use num_complex::Complex64;

/// v^θ and λ^θ along a window of fibers, from one pullback sweep.
#[derive(Debug)]
pub struct TripletField {
    pub theta: Complex64,
    lo: i64,
    hi: i64,
    v: Vec<FiberFunction>,
    /// λ^θ_t for t in [lo, hi).
    lambda: Vec<Complex64>,
    /// ‖v^θ(depth) − v^θ(depth−8)‖_B at the first fiber.
    pub cauchy_gap: f64,
}

impl TripletField {
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn eigenfunction(&self, t: i64) -> Result<&FiberFunction> {
        if t < self.lo || t > self.hi {
            return Err(CoreError::HorizonExceeded { index: t, horizon: self.hi });
        }
        Ok(&self.v[(t - self.lo) as usize])
    }

    pub fn lambda(&self, t: i64) -> Result<Complex64> {
        if t < self.lo || t >= self.hi {
            return Err(CoreError::HorizonExceeded { index: t, horizon: self.hi });
        }
        Ok(self.lambda[(t - self.lo) as usize])
    }

    /// Π_{k<n} λ^θ_{lo+k}.
    pub fn lambda_product(&self, n: usize) -> Complex64 {
        self.lambda.iter().take(n).product()
    }
}

fn mass(f: &FiberFunction, system: &FiberSystem, t: i64) -> Result<Complex64> {
    f.integrate(system.measure(t)?)
}

fn sweep(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    theta: Complex64,
    lo: i64,
    hi: i64,
    depth: usize,
) -> Result<(Vec<FiberFunction>, Vec<Complex64>)> {
    let start = lo - depth as i64;
    let (wlo, _) = system.window();
    if start < wlo {
        return Err(CoreError::HorizonExceeded { index: start, horizon: wlo.abs() });
    }
    let mut w = cocycle.density(start).cloned().or_else(|_| system.one(start))?;
    let mut v = Vec::new();
    let mut lambda = Vec::new();
    for t in start..hi {
        if t >= lo {
            v.push(w.clone());
        }
        let pushed = system.op(t)?.apply_twisted(theta, system.observable(t)?, &w)?;
        let m = mass(&pushed, system, t + 1)?;
        if m.norm() < 1e-300 {
            return Err(CoreError::NoSpectralGap("iterate mass collapsed".into()));
        }
        if t >= lo {
            lambda.push(m);
        }
        w = pushed.scale(m.inv());
    }
    v.push(w);
    Ok((v, lambda))
}

/// Runs the normalized pullback iteration for 𝓛^θ over [lo, hi], seeding with
/// the untwisted density `depth` steps earlier. A second, shallower sweep
/// certifies that the iterates are Cauchy; failure signals θ outside the
/// perturbative range.
pub fn triplet_field(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    theta: Complex64,
    lo: i64,
    hi: i64,
    depth: usize,
    gap_tol: f64,
) -> Result<TripletField> {
    if depth < 12 {
        return Err(CoreError::InvalidParameter("triplet depth must be >= 12".into()));
    }
    let (v, lambda) = sweep(system, cocycle, theta, lo, hi, depth)?;
    let (v_shallow, _) = sweep(system, cocycle, theta, lo, lo, depth - 8)?;
    let cauchy_gap = v[0].sub(&v_shallow[0])?.norm_b(system.measure(lo)?)?;
    if cauchy_gap > gap_tol {
        return Err(CoreError::NoSpectralGap(format!(
            "pullback iterates differ by {cauchy_gap:.3e} between depths {} and {depth}",
            depth - 8
        )));
    }
    Ok(TripletField { theta, lo, hi, v, lambda, cauchy_gap })
}

/// The fiberwise triplet at one fiber, with residual certificates.
#[derive(Debug)]
pub struct TwistedTriplet {
    pub theta: Complex64,
    pub t: i64,
    pub lambda: Complex64,
    /// v^θ_t, normalized to ∫ v dm = 1.
    pub eigenfunction: FiberFunction,
    /// Density of φ^θ_t against m_t, normalized to φ(v) = 1.
    pub adjoint_density: FiberFunction,
    /// ‖𝓛^θ_t v^θ_t − λ^θ_t v^θ_{t+1}‖_B.
    pub eigen_residual: f64,
    /// ‖(𝓛^θ_t)^* φ^θ_{t+1} − λ^θ_t φ^θ_t‖ measured through densities.
    pub adjoint_residual: f64,
    pub cauchy_gap: f64,
}

/// Computes the triplet at fiber t. `depth` controls both the pullback for
/// v^θ and the forward horizon defining the functional φ^θ.
pub fn triplet(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    theta: Complex64,
    depth: usize,
    gap_tol: f64,
) -> Result<TwistedTriplet> {
    let field = triplet_field(system, cocycle, theta, t, t + 1 + depth as i64, depth, gap_tol)?;
    let lambda = field.lambda(t)?;
    let v_t = field.eigenfunction(t)?.clone();
    let v_next = field.eigenfunction(t + 1)?;

    let pushed = system.op(t)?.apply_twisted(theta, system.observable(t)?, &v_t)?;
    let eigen_residual =
        pushed.sub(&v_next.scale(lambda))?.norm_b(system.measure(t + 1)?)?;

    let g_t = adjoint_density(system, &field, t, depth)?;
    let g_next = adjoint_density(system, &field, t + 1, depth - 1)?;
    // (𝓛^θ)^*φ_{t+1} = λ φ_t, tested weakly: the functional is not a short
    // trigonometric polynomial, so a pointwise density comparison would only
    // measure its truncation
    let mut adjoint_residual = 0.0f64;
    for phi in adjoint_test_set(system, t)? {
        let lhs = system
            .op(t)?
            .apply_twisted(theta, system.observable(t)?, &phi)?
            .mul(&g_next)?
            .integrate(system.measure(t + 1)?)?;
        let rhs = lambda * phi.mul(&g_t)?.integrate(system.measure(t)?)?;
        adjoint_residual =
            adjoint_residual.max((lhs - rhs).norm() / phi.norm_b(system.measure(t)?)?.max(1e-300));
    }

    Ok(TwistedTriplet {
        theta,
        t,
        lambda,
        eigenfunction: v_t,
        adjoint_density: g_t,
        eigen_residual,
        adjoint_residual,
        cauchy_gap: field.cauchy_gap,
    })
}

/// Low-degree test functions for the weak-form adjoint check.
fn adjoint_test_set(system: &FiberSystem, t: i64) -> Result<Vec<FiberFunction>> {
    let mut tests = vec![system.one(t)?];
    match system.one(t)? {
        FiberFunction::Fourier(_) => {
            for k in 1..=6usize {
                tests.push(FiberFunction::Fourier(FourierFn::cosine(k)));
                tests.push(FiberFunction::Fourier(FourierFn::sine(k)));
            }
        }
        _ => {
            tests.extend(crate::cocycle::mean_zero_corpus(system, t, 6, 31)?);
        }
    }
    Ok(tests)
}

/// φ^θ_t as a density against m_t. Fourier backends evaluate the functional
/// on the mode basis through forward masses; the other backends run the
/// adjoint iteration backwards from the future edge of the field.
fn adjoint_density(
    system: &FiberSystem,
    field: &TripletField,
    t: i64,
    horizon: usize,
) -> Result<FiberFunction> {
    let raw = match system.one(t)? {
        FiberFunction::Fourier(one) => {
            let cutoff = match system.backend() {
                crate::system::SystemBackend::Fourier { cutoff } => *cutoff,
                _ => 16,
            };
            let _ = one;
            let mut modes = vec![Complex64::new(0.0, 0.0); 2 * cutoff + 1];
            for j in -(cutoff as i64)..=cutoff as i64 {
                let mut basis = vec![Complex64::new(0.0, 0.0); 2 * j.unsigned_abs() as usize + 1];
                let mid = j.unsigned_abs() as usize;
                basis[(j + mid as i64) as usize] = Complex64::new(1.0, 0.0);
                let e_j = FiberFunction::Fourier(FourierFn::from_modes(basis));
                let mut cur = e_j;
                for k in 0..horizon {
                    cur = system.op(t + k as i64)?.apply_twisted(
                        field.theta,
                        system.observable(t + k as i64)?,
                        &cur,
                    )?;
                }
                let num = mass(&cur, system, t + horizon as i64)?;
                let denom: Complex64 =
                    (0..horizon).map(|k| field.lambda(t + k as i64).unwrap()).product();
                modes[(cutoff as i64 - j) as usize] = num / denom;
            }
            FiberFunction::Fourier(FourierFn::from_modes(modes))
        }
        other => {
            let mut g = other; // constant one on the right backend
            for k in (0..horizon).rev() {
                let tk = t + k as i64;
                let pulled = system.op(tk)?.koopman(&g)?;
                let weight = system.observable(tk)?.scale(field.theta).exp();
                g = weight.mul(&pulled)?;
                let m = mass(&g, system, tk)?;
                if m.norm() < 1e-300 {
                    return Err(CoreError::NoSpectralGap("adjoint mass collapsed".into()));
                }
                g = g.scale(m.inv());
            }
            g
        }
    };
    // normalize φ(v) = 1
    let v = field.eigenfunction(t)?;
    let pairing = raw.mul(v)?.integrate(system.measure(t)?)?;
    if pairing.norm() < 1e-300 {
        return Err(CoreError::NoSpectralGap("functional annihilates the eigenfunction".into()));
    }
    Ok(raw.scale(pairing.inv()))
}

/// Fit of ‖𝓛^{θ,(n)}φ − (Πλ) φ^θ(φ) v^θ‖_B ≤ c rⁿ over a corpus.
#[derive(Debug, Clone)]
pub struct RemainderFit {
    pub c: f64,
    pub r: f64,
    pub points: Vec<(usize, f64)>,
}

pub fn decay_check(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    theta: Complex64,
    corpus: &[FiberFunction],
    n_max: usize,
    depth: usize,
) -> Result<RemainderFit> {
    let field =
        triplet_field(system, cocycle, theta, t, t + n_max as i64 + depth as i64, depth, 1e-6)?;
    let mut points: Vec<(usize, f64)> = Vec::new();
    for phi in corpus {
        let functional = adjoint_density(system, &field, t, depth)?;
        let coeff = functional.mul(phi)?.integrate(system.measure(t)?)?;
        let mut cur = phi.clone();
        for n in 1..=n_max {
            let tn = t + n as i64 - 1;
            cur = system.op(tn)?.apply_twisted(theta, system.observable(tn)?, &cur)?;
            let prod: Complex64 = (0..n).map(|k| field.lambda(t + k as i64).unwrap()).product();
            let predicted = field.eigenfunction(t + n as i64)?.scale(prod * coeff);
            let resid = cur.sub(&predicted)?.norm_b(system.measure(t + n as i64)?)?;
            match points.iter_mut().find(|(m, _)| *m == n) {
                Some((_, worst)) => *worst = worst.max(resid),
                None => points.push((n, resid)),
            }
        }
    }
    points.sort_by_key(|(n, _)| *n);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > 1e-14)
        .map(|&(n, r)| (n as f64, r.ln()))
        .collect();
    if usable.len() < 3 {
        return Ok(RemainderFit { c: 0.0, r: 0.0, points });
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(CoreError::FitFailed("degenerate fit".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let r = slope.exp();
    if !(r.is_finite() && r < 1.0) {
        return Err(CoreError::FitFailed(format!("fitted contraction factor {r}")));
    }
    Ok(RemainderFit { c: ((sy - slope * sx) / n).exp(), r, points })
}

/// Per-frequency signature: the decay (or persistence) of Π_{k<n} |λ^{it}|.
#[derive(Debug, Clone)]
pub struct SignatureCurve {
    pub t: f64,
    /// Π_{k<n}|λ| for n = 1..=n_max.
    pub products: Vec<f64>,
    /// Fitted exponent κ with products ≈ e^{−κn} over the latter half.
    pub kappa: f64,
    pub min_product: f64,
}

/// Scans a grid of real frequencies and fits the product decay exponents.
pub fn coboundary_signature(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    anchor: i64,
    t_grid: &[f64],
    n_max: usize,
    depth: usize,
) -> Result<Vec<SignatureCurve>> {
    let mut out = Vec::with_capacity(t_grid.len());
    for &freq in t_grid {
        let theta = Complex64::new(0.0, freq);
        let field = triplet_field(
            system,
            cocycle,
            theta,
            anchor,
            anchor + n_max as i64,
            depth,
            1e-6,
        )?;
        let mut products = Vec::with_capacity(n_max);
        let mut p = 1.0f64;
        for k in 0..n_max {
            p *= field.lambda(anchor + k as i64)?.norm();
            products.push(p);
        }
        let half = n_max / 2;
        let pts: Vec<(f64, f64)> = (half..n_max)
            .filter(|&i| products[i] > 1e-290)
            .map(|i| ((i + 1) as f64, products[i].ln()))
            .collect();
        let kappa = if pts.len() < 2 {
            f64::INFINITY
        } else {
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            -((n * sxy - sx * sy) / (n * sxx - sx * sx))
        };
        let min_product = products.iter().copied().fold(f64::INFINITY, f64::min);
        out.push(SignatureCurve { t: freq, products, kappa, min_product });
    }
    Ok(out)
}

/// λ^θ at one fiber for each θ in `thetas` (used for derivative and
/// analyticity checks).
pub fn lambda_curve(
    system: &FiberSystem,
    cocycle: &DensityCocycle,
    t: i64,
    thetas: &[Complex64],
    depth: usize,
) -> Result<Vec<Complex64>> {
    thetas
        .iter()
        .map(|&theta| {
            Ok(triplet_field(system, cocycle, theta, t, t + 1, depth, 1e-6)?.lambda(t)?)
        })
        .collect()
}
