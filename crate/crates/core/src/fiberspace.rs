//! Fiber Banach spaces: functions with finite L¹ norm plus variation, in one
//! of three computable backends.
//!
//! * `Fourier` — trigonometric polynomials on [0,1], exact under the linear
//!   full-branch map family.
//! * `Ulam` — cell averages on a uniform partition of [0,1].
//! * `Cylinder` — one value per admissible word of a subshift window, with a
//!   Hölder-seminorm playing the role of the variation.
//!
//! Values are complex throughout; twisted operators produce genuinely complex
//! functions even when the inputs are real.

use crate::grid::{eval_modes_on_grid, modes_from_grid, next_pow2};
use crate::symbolic::lattice::WordTable;
use crate::{CoreError, Result};
use num_complex::Complex64;
use std::sync::Arc;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Backend tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Fourier,
    Ulam,
    Cylinder,
}

/// Reference measure on a fiber.
#[derive(Debug, Clone)]
pub enum ReferenceMeasure {
    /// Lebesgue measure on [0,1].
    Lebesgue,
    /// A probability vector over the admissible words of a table.
    CylinderWeights { table: Arc<WordTable>, weights: Vec<f64> },
}

impl ReferenceMeasure {
    pub fn cylinder(table: Arc<WordTable>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != table.len() {
            return Err(CoreError::DomainMismatch(format!(
                "{} weights for {} words",
                weights.len(),
                table.len()
            )));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
            return Err(CoreError::InvalidParameter(
                "cylinder weights must be nonnegative with total mass 1".into(),
            ));
        }
        Ok(ReferenceMeasure::CylinderWeights { table, weights })
    }
}

/// Trigonometric polynomial Σ c_k e^{2πikx}, modes stored for k = −K..K.
#[derive(Debug, Clone)]
pub struct FourierFn {
    modes: Vec<Complex64>,
    /// Accumulated bound on spectral mass dropped by truncations.
    pub resolution_loss: f64,
}

/// Cell averages on the uniform partition of [0,1] into `cells.len()` cells.
#[derive(Debug, Clone)]
pub struct UlamFn {
    cells: Vec<Complex64>,
    pub resolution_loss: f64,
}

/// One value per admissible word of `table`.
#[derive(Debug, Clone)]
pub struct CylinderFn {
    pub table: Arc<WordTable>,
    values: Vec<Complex64>,
    pub resolution_loss: f64,
}

/// An element of a fiber space in one of the three backends.
#[derive(Debug, Clone)]
pub enum FiberFunction {
    Fourier(FourierFn),
    Ulam(UlamFn),
    Cylinder(CylinderFn),
}

impl FourierFn {
    pub fn from_modes(modes: Vec<Complex64>) -> Self {
        assert!(modes.len() % 2 == 1, "modes must be stored for -K..K");
        FourierFn { modes, resolution_loss: 0.0 }
    }

    pub fn constant(c: Complex64) -> Self {
        FourierFn { modes: vec![c], resolution_loss: 0.0 }
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    /// cos(2πkx) as a two-mode polynomial.
    pub fn cosine(k: usize) -> Self {
        let mut modes = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        modes[0] = Complex64::new(0.5, 0.0);
        modes[2 * k] = Complex64::new(0.5, 0.0);
        if k == 0 {
            modes = vec![Complex64::new(1.0, 0.0)];
        }
        FourierFn { modes, resolution_loss: 0.0 }
    }

    /// sin(2πkx).
    pub fn sine(k: usize) -> Self {
        assert!(k > 0);
        let mut modes = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        modes[0] = Complex64::new(0.0, 0.5);
        modes[2 * k] = Complex64::new(0.0, -0.5);
        FourierFn { modes, resolution_loss: 0.0 }
    }

    /// Least-squares projection of a pointwise function onto modes −K..K.
    pub fn project(f: impl FnMut(f64) -> Complex64, cutoff: usize, grid: usize) -> Self {
        let g = next_pow2(grid.max(4 * cutoff + 4));
        let mut f = f;
        let samples: Vec<Complex64> = (0..g).map(|i| f(i as f64 / g as f64)).collect();
        FourierFn { modes: modes_from_grid(&samples, cutoff), resolution_loss: 0.0 }
    }

    pub fn cutoff(&self) -> usize {
        (self.modes.len() - 1) / 2
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    /// Coefficient of e^{2πikx}; zero outside the stored band.
    pub fn mode(&self, k: i64) -> Complex64 {
        let c = self.cutoff() as i64;
        if k.abs() > c {
            Complex64::new(0.0, 0.0)
        } else {
            self.modes[(k + c) as usize]
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let k = self.cutoff() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &c) in self.modes.iter().enumerate() {
            let freq = i as i64 - k;
            acc += c * (Complex64::i() * TWO_PI * freq as f64 * x).exp();
        }
        acc
    }

    fn dense_grid(&self) -> usize {
        next_pow2((16 * self.cutoff()).max(2048))
    }

    pub fn eval_grid(&self, len: usize) -> Vec<Complex64> {
        eval_modes_on_grid(&self.modes, len)
    }

    /// Drops modes outside −k..k, accumulating the dropped l¹ mass.
    pub fn truncate(&self, k: usize) -> Self {
        if k >= self.cutoff() {
            return self.clone();
        }
        let c = self.cutoff();
        let mut dropped = 0.0;
        for (i, &m) in self.modes.iter().enumerate() {
            let freq = (i as i64 - c as i64).unsigned_abs() as usize;
            if freq > k {
                dropped += m.norm();
            }
        }
        let modes = self.modes[c - k..=c + k].to_vec();
        FourierFn { modes, resolution_loss: self.resolution_loss + dropped }
    }
}

impl UlamFn {
    pub fn from_cells(cells: Vec<Complex64>) -> Self {
        assert!(!cells.is_empty());
        UlamFn { cells, resolution_loss: 0.0 }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        UlamFn { cells: vec![c; n], resolution_loss: 0.0 }
    }

    /// Projects a pointwise function to cell averages (per-cell Gauss–Legendre).
    pub fn project(mut f: impl FnMut(f64) -> Complex64, n: usize) -> Self {
        let (nodes, weights) = crate::grid::gauss_legendre_32();
        let h = 1.0 / n as f64;
        let cells = (0..n)
            .map(|i| {
                let a = i as f64 * h;
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, w) in nodes.iter().zip(weights.iter()) {
                    acc += f(a + h * 0.5 * (1.0 + t)) * *w * 0.5;
                }
                acc
            })
            .collect();
        UlamFn { cells, resolution_loss: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Complex64] {
        &self.cells
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.cells.len();
        let i = ((x * n as f64) as usize).min(n - 1);
        self.cells[i]
    }
}

impl CylinderFn {
    pub fn from_values(table: Arc<WordTable>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != table.len() {
            return Err(CoreError::DomainMismatch(format!(
                "{} values for {} admissible words",
                values.len(),
                table.len()
            )));
        }
        Ok(CylinderFn { table, values, resolution_loss: 0.0 })
    }

    pub fn constant(table: Arc<WordTable>, c: Complex64) -> Self {
        let n = table.len();
        CylinderFn { table, values: vec![c; n], resolution_loss: 0.0 }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn depth(&self) -> usize {
        self.table.depth
    }

    /// Value on the cylinder of `word`; the word may be deeper than the
    /// table, in which case only its prefix matters.
    pub fn eval_word(&self, word: &[u8]) -> Result<Complex64> {
        if word.len() < self.table.depth {
            return Err(CoreError::DomainMismatch("word shorter than cylinder depth".into()));
        }
        self.table
            .index_of(&word[..self.table.depth])
            .map(|i| self.values[i])
            .ok_or_else(|| CoreError::DomainMismatch("word not admissible".into()))
    }

    /// Re-expresses the function on a deeper table over the same lattice and
    /// start time.
    pub fn refine(&self, target: &Arc<WordTable>) -> Result<Self> {
        if !Arc::ptr_eq(&target.lattice, &self.table.lattice) || target.time != self.table.time {
            return Err(CoreError::BackendMismatch("cylinder refinement across spaces".into()));
        }
        if target.depth < self.table.depth {
            return Err(CoreError::BackendMismatch("refinement must increase depth".into()));
        }
        let values = target
            .words()
            .map(|w| {
                let i = self.table.index_of(&w[..self.table.depth]).expect("prefix admissible");
                self.values[i]
            })
            .collect();
        Ok(CylinderFn {
            table: target.clone(),
            values,
            resolution_loss: self.resolution_loss,
        })
    }
}

fn unify_cylinder(a: &CylinderFn, b: &CylinderFn) -> Result<(CylinderFn, CylinderFn)> {
    if !Arc::ptr_eq(&a.table.lattice, &b.table.lattice) || a.table.time != b.table.time {
        return Err(CoreError::BackendMismatch(
            "cylinder functions live on different spaces".into(),
        ));
    }
    match a.table.depth.cmp(&b.table.depth) {
        std::cmp::Ordering::Equal => Ok((a.clone(), b.clone())),
        std::cmp::Ordering::Less => Ok((a.refine(&b.table)?, b.clone())),
        std::cmp::Ordering::Greater => Ok((a.clone(), b.refine(&a.table)?)),
    }
}

impl FiberFunction {
    pub fn backend(&self) -> Backend {
        match self {
            FiberFunction::Fourier(_) => Backend::Fourier,
            FiberFunction::Ulam(_) => Backend::Ulam,
            FiberFunction::Cylinder(_) => Backend::Cylinder,
        }
    }

    pub fn resolution_loss(&self) -> f64 {
        match self {
            FiberFunction::Fourier(f) => f.resolution_loss,
            FiberFunction::Ulam(f) => f.resolution_loss,
            FiberFunction::Cylinder(f) => f.resolution_loss,
        }
    }

    pub fn as_fourier(&self) -> Result<&FourierFn> {
        match self {
            FiberFunction::Fourier(f) => Ok(f),
            _ => Err(CoreError::BackendMismatch("expected Fourier backend".into())),
        }
    }

    pub fn as_ulam(&self) -> Result<&UlamFn> {
        match self {
            FiberFunction::Ulam(f) => Ok(f),
            _ => Err(CoreError::BackendMismatch("expected Ulam backend".into())),
        }
    }

    pub fn as_cylinder(&self) -> Result<&CylinderFn> {
        match self {
            FiberFunction::Cylinder(f) => Ok(f),
            _ => Err(CoreError::BackendMismatch("expected cylinder backend".into())),
        }
    }

    /// Total variation on [0,1] (interval convention, no wrap-around) for the
    /// interval backends; the Hölder seminorm max |φ(a)−φ(b)| / d(a,b)^β for
    /// the cylinder backend.
    pub fn variation(&self) -> f64 {
        match self {
            FiberFunction::Fourier(f) => {
                let k = f.cutoff();
                if k == 0 {
                    return 0.0;
                }
                // Partition resolution fixed at 16·K; recorded in reports.
                let g = 16 * k;
                let samples = f.eval_grid(g);
                let mut acc = 0.0;
                for i in 0..g {
                    acc += (samples[(i + 1) % g] - samples[i]).norm();
                }
                acc
            }
            FiberFunction::Ulam(f) => {
                f.cells.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
            }
            FiberFunction::Cylinder(f) => {
                let beta = f.table.lattice.holder_beta();
                let re: Vec<f64> = f.values.iter().map(|v| v.re).collect();
                let im: Vec<f64> = f.values.iter().map(|v| v.im).collect();
                let sre = f.table.prefix_spreads(&re);
                let sim = f.table.prefix_spreads(&im);
                sre.iter()
                    .zip(sim.iter())
                    .enumerate()
                    .map(|(k, (a, b))| (a * a + b * b).sqrt() * (2f64).powf(k as f64 * beta))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// ∫ φ dm.
    pub fn integrate(&self, m: &ReferenceMeasure) -> Result<Complex64> {
        match (self, m) {
            (FiberFunction::Fourier(f), ReferenceMeasure::Lebesgue) => Ok(f.mode(0)),
            (FiberFunction::Ulam(f), ReferenceMeasure::Lebesgue) => {
                Ok(f.cells.iter().sum::<Complex64>() / f.cells.len() as f64)
            }
            (FiberFunction::Cylinder(f), ReferenceMeasure::CylinderWeights { table, weights }) => {
                if !Arc::ptr_eq(&table.lattice, &f.table.lattice) || table.time != f.table.time {
                    return Err(CoreError::DomainMismatch(
                        "measure and function on different symbolic spaces".into(),
                    ));
                }
                let f = if f.table.depth < table.depth {
                    f.refine(table)?
                } else if f.table.depth > table.depth {
                    return Err(CoreError::DomainMismatch(
                        "measure coarser than the function".into(),
                    ));
                } else {
                    f.clone()
                };
                Ok(f.values.iter().zip(weights.iter()).map(|(v, w)| v * *w).sum())
            }
            _ => Err(CoreError::DomainMismatch(
                "measure kind does not match function backend".into(),
            )),
        }
    }

    /// ∫ |φ|^p dm, p >= 1.
    pub fn lp_norm(&self, p: f64, m: &ReferenceMeasure) -> Result<f64> {
        assert!(p >= 1.0);
        match (self, m) {
            (FiberFunction::Fourier(f), ReferenceMeasure::Lebesgue) => {
                if p == 2.0 {
                    // Parseval
                    return Ok(f.modes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
                }
                let samples = f.eval_grid(f.dense_grid());
                let mean =
                    samples.iter().map(|s| s.norm().powf(p)).sum::<f64>() / samples.len() as f64;
                Ok(mean.powf(1.0 / p))
            }
            (FiberFunction::Ulam(f), ReferenceMeasure::Lebesgue) => {
                let mean =
                    f.cells.iter().map(|c| c.norm().powf(p)).sum::<f64>() / f.cells.len() as f64;
                Ok(mean.powf(1.0 / p))
            }
            (FiberFunction::Cylinder(f), ReferenceMeasure::CylinderWeights { .. }) => {
                let abs = FiberFunction::Cylinder(CylinderFn {
                    table: f.table.clone(),
                    values: f.values.iter().map(|v| Complex64::new(v.norm().powf(p), 0.0)).collect(),
                    resolution_loss: 0.0,
                });
                Ok(abs.integrate(m)?.re.powf(1.0 / p))
            }
            _ => Err(CoreError::DomainMismatch(
                "measure kind does not match function backend".into(),
            )),
        }
    }

    pub fn l1_norm(&self, m: &ReferenceMeasure) -> Result<f64> {
        self.lp_norm(1.0, m)
    }

    /// ‖φ‖_B = ‖φ‖_{L¹(m)} + var(φ).
    pub fn norm_b(&self, m: &ReferenceMeasure) -> Result<f64> {
        Ok(self.l1_norm(m)? + self.variation())
    }

    /// Essential supremum of |φ| at backend resolution.
    pub fn ess_sup(&self) -> f64 {
        match self {
            FiberFunction::Fourier(f) => {
                if f.cutoff() == 0 {
                    return f.mode(0).norm();
                }
                f.eval_grid(f.dense_grid()).iter().map(|s| s.norm()).fold(0.0, f64::max)
            }
            FiberFunction::Ulam(f) => f.cells.iter().map(|c| c.norm()).fold(0.0, f64::max),
            FiberFunction::Cylinder(f) => f.values.iter().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }

    /// Essential infimum of Re φ at backend resolution, minus the backend's
    /// interpolation-error bound (Fourier only; the other backends are exact
    /// on their cells/words).
    pub fn ess_inf_certified(&self) -> f64 {
        match self {
            FiberFunction::Fourier(f) => {
                let g = next_pow2((4 * f.cutoff()).max(4096));
                let samples = f.eval_grid(g);
                let min = samples.iter().map(|s| s.re).fold(f64::INFINITY, f64::min);
                // |φ'| <= Σ 2π|k||c_k| bounds the sag between grid nodes
                let k0 = f.cutoff() as i64;
                let deriv: f64 = f
                    .modes
                    .iter()
                    .enumerate()
                    .map(|(i, c)| TWO_PI * (i as i64 - k0).abs() as f64 * c.norm())
                    .sum();
                min - deriv / (2.0 * g as f64)
            }
            FiberFunction::Ulam(f) => f.cells.iter().map(|c| c.re).fold(f64::INFINITY, f64::min),
            FiberFunction::Cylinder(f) => {
                f.values.iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// True when the function is the literal constant 1 in its backend, with
    /// no stored perturbation. Lets density-normalized paths reduce to the
    /// raw operator exactly.
    pub fn is_exact_one(&self) -> bool {
        let one = Complex64::new(1.0, 0.0);
        match self {
            FiberFunction::Fourier(f) => f.cutoff() == 0 && f.mode(0) == one,
            FiberFunction::Ulam(f) => f.cells.iter().all(|&c| c == one),
            FiberFunction::Cylinder(f) => f.values.iter().all(|&c| c == one),
        }
    }

    /// Largest deviation from a real-valued function: conjugate-symmetry
    /// defect for Fourier, maximal |Im| otherwise.
    pub fn reality_defect(&self) -> f64 {
        match self {
            FiberFunction::Fourier(f) => {
                let k = f.cutoff() as i64;
                let mut worst = 0.0f64;
                for freq in 0..=k {
                    let d = (f.mode(-freq) - f.mode(freq).conj()).norm();
                    worst = worst.max(d);
                }
                worst
            }
            FiberFunction::Ulam(f) => f.cells.iter().map(|c| c.im.abs()).fold(0.0, f64::max),
            FiberFunction::Cylinder(f) => f.values.iter().map(|c| c.im.abs()).fold(0.0, f64::max),
        }
    }

    pub fn add(&self, rhs: &FiberFunction) -> Result<FiberFunction> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &FiberFunction) -> Result<FiberFunction> {
        self.zip(rhs, |a, b| a - b)
    }

    fn zip(
        &self,
        rhs: &FiberFunction,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<FiberFunction> {
        match (self, rhs) {
            (FiberFunction::Fourier(a), FiberFunction::Fourier(b)) => {
                let k = a.cutoff().max(b.cutoff()) as i64;
                let modes = (-k..=k).map(|f| op(a.mode(f), b.mode(f))).collect();
                Ok(FiberFunction::Fourier(FourierFn {
                    modes,
                    resolution_loss: a.resolution_loss + b.resolution_loss,
                }))
            }
            (FiberFunction::Ulam(a), FiberFunction::Ulam(b)) => {
                if a.len() != b.len() {
                    return Err(CoreError::BackendMismatch(format!(
                        "Ulam resolutions differ: {} vs {}",
                        a.len(),
                        b.len()
                    )));
                }
                let cells = a.cells.iter().zip(b.cells.iter()).map(|(&x, &y)| op(x, y)).collect();
                Ok(FiberFunction::Ulam(UlamFn {
                    cells,
                    resolution_loss: a.resolution_loss + b.resolution_loss,
                }))
            }
            (FiberFunction::Cylinder(a), FiberFunction::Cylinder(b)) => {
                let (a, b) = unify_cylinder(a, b)?;
                let values =
                    a.values.iter().zip(b.values.iter()).map(|(&x, &y)| op(x, y)).collect();
                Ok(FiberFunction::Cylinder(CylinderFn {
                    table: a.table.clone(),
                    values,
                    resolution_loss: a.resolution_loss + b.resolution_loss,
                }))
            }
            _ => Err(CoreError::BackendMismatch("mixed-backend arithmetic".into())),
        }
    }

    pub fn scale(&self, c: Complex64) -> FiberFunction {
        let f = |v: Complex64| v * c;
        match self {
            FiberFunction::Fourier(a) => FiberFunction::Fourier(FourierFn {
                modes: a.modes.iter().map(|&v| f(v)).collect(),
                resolution_loss: a.resolution_loss * c.norm(),
            }),
            FiberFunction::Ulam(a) => FiberFunction::Ulam(UlamFn {
                cells: a.cells.iter().map(|&v| f(v)).collect(),
                resolution_loss: a.resolution_loss * c.norm(),
            }),
            FiberFunction::Cylinder(a) => FiberFunction::Cylinder(CylinderFn {
                table: a.table.clone(),
                values: a.values.iter().map(|&v| f(v)).collect(),
                resolution_loss: a.resolution_loss * c.norm(),
            }),
        }
    }

    /// Pointwise product. Fourier products keep the full degree K₁+K₂ (exact);
    /// callers that must contain growth truncate explicitly.
    pub fn mul(&self, rhs: &FiberFunction) -> Result<FiberFunction> {
        match (self, rhs) {
            (FiberFunction::Fourier(a), FiberFunction::Fourier(b)) => {
                // constants act as exact scalings (bit-for-bit for c = 1)
                if a.cutoff() == 0 {
                    let mut out = rhs.scale(a.mode(0));
                    if let FiberFunction::Fourier(f) = &mut out {
                        f.resolution_loss += a.resolution_loss;
                    }
                    return Ok(out);
                }
                if b.cutoff() == 0 {
                    let mut out = self.scale(b.mode(0));
                    if let FiberFunction::Fourier(f) = &mut out {
                        f.resolution_loss += b.resolution_loss;
                    }
                    return Ok(out);
                }
                let k_out = a.cutoff() + b.cutoff();
                let g = next_pow2(2 * k_out + 2);
                let sa = a.eval_grid(g);
                let sb = b.eval_grid(g);
                let prod: Vec<Complex64> =
                    sa.iter().zip(sb.iter()).map(|(&x, &y)| x * y).collect();
                Ok(FiberFunction::Fourier(FourierFn {
                    modes: modes_from_grid(&prod, k_out),
                    resolution_loss: a.resolution_loss + b.resolution_loss,
                }))
            }
            (FiberFunction::Ulam(_), FiberFunction::Ulam(_)) => self.zip(rhs, |a, b| a * b),
            (FiberFunction::Cylinder(_), FiberFunction::Cylinder(_)) => {
                self.zip(rhs, |a, b| a * b)
            }
            _ => Err(CoreError::BackendMismatch("mixed-backend product".into())),
        }
    }

    /// Pointwise e^φ. The Fourier result keeps an adaptive cutoff and records
    /// the dropped spectral mass.
    pub fn exp(&self) -> FiberFunction {
        match self {
            FiberFunction::Fourier(f) => {
                if f.modes.iter().all(|c| c.norm() == 0.0) {
                    return FiberFunction::Fourier(FourierFn::constant(Complex64::new(1.0, 0.0)));
                }
                if f.cutoff() == 0 {
                    return FiberFunction::Fourier(FourierFn::constant(f.mode(0).exp()));
                }
                // grow the grid until the spectrum has decayed at the edge;
                // whatever tail remains is recorded as honest aliasing loss
                let mut g = next_pow2((16 * (f.cutoff() + 1)).max(256));
                loop {
                    let samples: Vec<Complex64> =
                        f.eval_grid(g).iter().map(|s| s.exp()).collect();
                    let kmax = g / 2 - 1;
                    let full = modes_from_grid(&samples, kmax);
                    let peak = full.iter().map(|c| c.norm()).fold(0.0, f64::max);
                    let edge = full[0].norm().max(full[2 * kmax].norm());
                    if edge > 1e-15 * peak && g < (1 << 16) {
                        g *= 4;
                        continue;
                    }
                    let mut keep = 1usize;
                    for freq in 1..=kmax {
                        let amp = full[kmax - freq].norm().max(full[kmax + freq].norm());
                        if amp > 1e-16 * peak {
                            keep = freq;
                        }
                    }
                    let dropped: f64 = (keep + 1..=kmax)
                        .map(|freq| full[kmax - freq].norm() + full[kmax + freq].norm())
                        .sum::<f64>()
                        + edge * g as f64;
                    let modes = full[kmax - keep..=kmax + keep].to_vec();
                    return FiberFunction::Fourier(FourierFn {
                        modes,
                        resolution_loss: f.resolution_loss + dropped,
                    });
                }
            }
            FiberFunction::Ulam(f) => FiberFunction::Ulam(UlamFn {
                cells: f.cells.iter().map(|c| c.exp()).collect(),
                resolution_loss: f.resolution_loss,
            }),
            FiberFunction::Cylinder(f) => FiberFunction::Cylinder(CylinderFn {
                table: f.table.clone(),
                values: f.values.iter().map(|c| c.exp()).collect(),
                resolution_loss: f.resolution_loss,
            }),
        }
    }

    /// Pointwise quotient, used for density-normalized operators. Fails when
    /// the divisor dips below `floor` at backend resolution.
    pub fn div(&self, rhs: &FiberFunction, floor: f64) -> Result<FiberFunction> {
        let inf = rhs.ess_inf_certified();
        if inf <= floor {
            return Err(CoreError::DegenerateDensity(format!(
                "divisor essential infimum {inf:.3e} at or below floor {floor:.3e}"
            )));
        }
        match (self, rhs) {
            (FiberFunction::Fourier(a), FiberFunction::Fourier(b)) => {
                if b.cutoff() == 0 {
                    return Ok(self.scale(b.mode(0).inv()));
                }
                let k_out = a.cutoff().max(4 * b.cutoff()).max(8);
                let g = next_pow2((4 * (k_out + 1)).max(2048));
                let sa = a.eval_grid(g);
                let sb = b.eval_grid(g);
                let quot: Vec<Complex64> =
                    sa.iter().zip(sb.iter()).map(|(&x, &y)| x / y).collect();
                Ok(FiberFunction::Fourier(FourierFn {
                    modes: modes_from_grid(&quot, k_out),
                    resolution_loss: a.resolution_loss + b.resolution_loss,
                }))
            }
            _ => self.zip(rhs, |a, b| a / b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    // Independent quadrature oracle: composite midpoint rule with many panels.
    fn quad_oracle(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
        (0..panels).map(|i| f((i as f64 + 0.5) / panels as f64)).sum::<f64>() / panels as f64
    }

    #[test]
    fn variation_of_constants_is_zero() {
        let one = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        assert_eq!(one.variation(), 0.0);
        let one_u = FiberFunction::Ulam(UlamFn::constant(64, c(1.0)));
        assert_eq!(one_u.variation(), 0.0);
    }

    #[test]
    fn variation_of_cosine_is_four() {
        // monotone pieces 1 → −1 → 1 across [0,1]
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        assert_abs_diff_eq!(f.variation(), 4.0, epsilon = 1e-10);
    }

    #[test]
    fn variation_of_half_indicator_is_one() {
        let n = 128;
        let cells: Vec<Complex64> =
            (0..n).map(|i| if i < n / 2 { c(1.0) } else { c(0.0) }).collect();
        let f = FiberFunction::Ulam(UlamFn::from_cells(cells));
        assert_abs_diff_eq!(f.variation(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lebesgue_integrals() {
        let m = ReferenceMeasure::Lebesgue;
        let one = FiberFunction::Fourier(FourierFn::constant(c(1.0)));
        assert_abs_diff_eq!(one.integrate(&m).unwrap().re, 1.0, epsilon = 1e-15);
        let cosine = FiberFunction::Fourier(FourierFn::cosine(1));
        assert_abs_diff_eq!(cosine.integrate(&m).unwrap().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_b_of_cosine_matches_quadrature_oracle() {
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        let l1_oracle = quad_oracle(|x| (TWO_PI * x).cos().abs(), 1 << 16);
        assert_abs_diff_eq!(l1_oracle, 2.0 / std::f64::consts::PI, epsilon = 1e-8);
        let norm = f.norm_b(&ReferenceMeasure::Lebesgue).unwrap();
        assert_abs_diff_eq!(norm, l1_oracle + 4.0, epsilon = 1e-5);
    }

    #[test]
    fn scale_by_zero_gives_zero_norm() {
        let f = FiberFunction::Fourier(FourierFn::cosine(3)).scale(c(0.0));
        assert_eq!(f.norm_b(&ReferenceMeasure::Lebesgue).unwrap(), 0.0);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let z = FiberFunction::Fourier(FourierFn::zero());
        let e = z.exp();
        let f = e.as_fourier().unwrap();
        assert_eq!(f.cutoff(), 0);
        assert_eq!(f.mode(0), c(1.0));
    }

    #[test]
    fn fourier_product_is_exact() {
        // cos²(2πx) = 1/2 + cos(4πx)/2
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        let sq = f.mul(&f).unwrap();
        let g = sq.as_fourier().unwrap();
        assert_abs_diff_eq!(g.mode(0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.mode(2).re, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(g.mode(1).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mixed_backend_arithmetic_is_rejected() {
        let a = FiberFunction::Fourier(FourierFn::cosine(1));
        let b = FiberFunction::Ulam(UlamFn::constant(8, c(1.0)));
        assert!(matches!(a.add(&b), Err(CoreError::BackendMismatch(_))));
    }

    #[test]
    fn cylinder_indicator_integrates_to_its_mass() {
        use crate::symbolic::lattice::{SftLattice, WordTable};
        use ndarray::array;
        let lat = SftLattice::stationary(array![[1, 1], [1, 1]], 8, 1.0).unwrap();
        let table = WordTable::build(lat, 0, 2).unwrap();
        let idx = table.index_of(&[0, 1]).unwrap();
        let mut values = vec![c(0.0); table.len()];
        values[idx] = c(1.0);
        let f = FiberFunction::Cylinder(CylinderFn::from_values(table.clone(), values).unwrap());
        let m = ReferenceMeasure::cylinder(table, vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(f.integrate(&m).unwrap().re, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn cylinder_holder_seminorm_scales_with_agreement_depth() {
        use crate::symbolic::lattice::{SftLattice, WordTable};
        use ndarray::array;
        let lat = SftLattice::stationary(array![[1, 1], [1, 1]], 8, 1.0).unwrap();
        let table = WordTable::build(lat, 0, 3).unwrap();
        // indicator of the prefix (0,0): the extremal pair differs first at
        // position 1, so it carries weight 2^β
        let values: Vec<Complex64> = table
            .words()
            .map(|w| if w[0] == 0 && w[1] == 0 { c(1.0) } else { c(0.0) })
            .collect();
        let f = FiberFunction::Cylinder(CylinderFn::from_values(table, values).unwrap());
        // pairs differing at index 1 dominate: spread 1 at prefix length 1
        assert_abs_diff_eq!(f.variation(), 2.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn variation_is_homogeneous(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 9),
            scale in -4.0f64..4.0,
        ) {
            let modes: Vec<Complex64> = coeffs.iter().map(|&r| c(r)).collect();
            let f = FiberFunction::Fourier(FourierFn::from_modes(modes));
            let lhs = f.scale(c(scale)).variation();
            let rhs = scale.abs() * f.variation();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }

        #[test]
        fn triangle_inequality_for_norm_b(
            a in proptest::collection::vec(-1.0f64..1.0, 7),
            b in proptest::collection::vec(-1.0f64..1.0, 7),
        ) {
            let m = ReferenceMeasure::Lebesgue;
            let fa = FiberFunction::Fourier(FourierFn::from_modes(a.iter().map(|&r| c(r)).collect()));
            let fb = FiberFunction::Fourier(FourierFn::from_modes(b.iter().map(|&r| c(r)).collect()));
            let sum = fa.add(&fb).unwrap();
            prop_assert!(
                sum.norm_b(&m).unwrap() <= fa.norm_b(&m).unwrap() + fb.norm_b(&m).unwrap() + 1e-9
            );
        }

        #[test]
        fn sup_is_bounded_by_norm_b(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 11),
        ) {
            // C_var = 1 for the interval backends
            let f = FiberFunction::Fourier(FourierFn::from_modes(
                coeffs.iter().map(|&r| c(r)).collect(),
            ));
            let m = ReferenceMeasure::Lebesgue;
            prop_assert!(f.ess_sup() <= f.norm_b(&m).unwrap() + 1e-6);
        }

        #[test]
        fn ulam_sup_is_bounded_by_norm_b(
            cells in proptest::collection::vec(-2.0f64..2.0, 16),
        ) {
            let f = FiberFunction::Ulam(UlamFn::from_cells(cells.iter().map(|&r| c(r)).collect()));
            let m = ReferenceMeasure::Lebesgue;
            prop_assert!(f.ess_sup() <= f.norm_b(&m).unwrap() + 1e-12);
        }
    }
}
