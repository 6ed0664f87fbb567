//! Declarative scenario schema: everything a run needs is in one JSON file —
//! the driving base, the fiber family, the observable, the pipeline of steps,
//! and the tolerances. Parsing is strict (unknown fields are errors) so that
//! a typo in a scenario cannot silently change an experiment.

use anyhow::{bail, Context, Result};
use coblab_core::driving::BaseSystem;
use coblab_core::fiberspace::{FiberFunction, FourierFn, UlamFn};
use coblab_core::symbolic::observable::{
    CoboundaryField, FiniteRangeField, GeometricField, TwoSidedObservable,
};
use coblab_core::system::{Assignment, ObservableSpec, SystemBackend};
use coblab_core::transfer::{Branch, BranchMap};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Declared expectation; a mismatching verdict exits with code 2.
    #[serde(default)]
    pub expect: Option<Expectation>,
    pub system: SystemSpec,
    pub pipeline: Vec<Step>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Coboundary,
    NotACoboundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Tail tolerance for series truncations.
    pub tail: f64,
    /// Series cap for the transfer-map series.
    pub series_cap: usize,
    /// Pullback depth for the density cocycle.
    pub density_depth: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tail: 1e-12, series_cap: 48, density_depth: 40 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if self.tail <= 0.0 {
            bail!("tolerances.tail must be positive");
        }
        if self.series_cap < 8 || self.density_depth < 4 {
            bail!("series_cap must be >= 8 and density_depth >= 4");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Interval {
        base: BaseSystem,
        horizon: i64,
        backend: BackendSpec,
        maps: Assign<MapSpec>,
        observable: IntervalObservable,
    },
    Sft {
        base: BaseSystem,
        horizon: i64,
        /// Gibbs window [lo, hi].
        window: (i64, i64),
        margin: usize,
        matrices: Assign<Vec<Vec<u8>>>,
        potentials: Assign<Vec<Vec<f64>>>,
        beta: f64,
        /// Cylinder depth of the one-sided solve.
        depth: usize,
        observable: SymbolicObservable,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "assign", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assign<T> {
    Uniform { value: T },
    BySymbol { values: Vec<T> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Fourier { cutoff: usize },
    Ulam { cells: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Linear { slope: u32, offset: f64 },
    MarkovSaw,
    Branches { branches: Vec<Branch> },
}

impl MapSpec {
    pub fn build(&self) -> Result<BranchMap> {
        Ok(match self {
            MapSpec::Linear { slope, offset } => BranchMap::linear_full_branch(*slope, *offset)?,
            MapSpec::MarkovSaw => BranchMap::markov_saw(),
            MapSpec::Branches { branches } => BranchMap::new(branches.clone())?,
        })
    }
}

/// A real function on [0,1] given by finitely many trigonometric terms (plus
/// a constant).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigFn {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub freq: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TrigFn {
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            let arg = std::f64::consts::TAU * t.freq as f64 * x;
            acc += t.cos * arg.cos() + t.sin * arg.sin();
        }
        acc
    }

    pub fn build(&self, backend: &BackendSpec) -> FiberFunction {
        match backend {
            BackendSpec::Fourier { .. } => {
                let mut f = FiberFunction::Fourier(FourierFn::constant(Complex64::new(
                    self.constant,
                    0.0,
                )));
                for t in &self.terms {
                    if t.cos != 0.0 {
                        f = f
                            .add(&FiberFunction::Fourier(FourierFn::cosine(t.freq))
                                .scale(Complex64::new(t.cos, 0.0)))
                            .unwrap();
                    }
                    if t.sin != 0.0 {
                        f = f
                            .add(&FiberFunction::Fourier(FourierFn::sine(t.freq))
                                .scale(Complex64::new(t.sin, 0.0)))
                            .unwrap();
                    }
                }
                f
            }
            BackendSpec::Ulam { cells } => FiberFunction::Ulam(UlamFn::project(
                |x| Complex64::new(self.eval(x), 0.0),
                *cells,
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntervalObservable {
    None,
    Explicit { f: Assign<TrigFn> },
    Planted { h: Assign<TrigFn> },
    /// F_j(x) = decay^j · (x − 1/2): the bounded-sup / unbounded-variation
    /// sequence used by the counterexample pipeline.
    GeometricSawtooth { decay: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolicObservable {
    /// Planted H(x) = Σ_k weight[k]·x_{k} over |k| <= radius plus optional
    /// quadratic cross terms; the observable is its coboundary H∘S − H.
    PlantedFiniteRange {
        radius: i64,
        weights: Vec<f64>,
        #[serde(default)]
        quads: Vec<(i64, i64, f64)>,
    },
    /// Planted H(x) = Σ_k ratio^{|k|} g(x_k) (infinite range); observable is
    /// its coboundary.
    PlantedGeometric { g: Vec<f64>, ratio: f64 },
    /// Two-sided f(x) = Σ_k ratio^{|k|} g(x_k), scaled to unit Hölder norm.
    GeometricUnit { g: Vec<f64>, ratio: f64 },
    /// f(x) = x₀ − center.
    Coordinate { center: f64 },
}

impl SymbolicObservable {
    pub fn build_h(&self) -> Option<Box<dyn TwoSidedObservable>> {
        match self {
            SymbolicObservable::PlantedFiniteRange { radius, weights, quads } => {
                let r = *radius;
                let w = weights.clone();
                let q = quads.clone();
                let sup: f64 = w.iter().map(|a| a.abs()).sum::<f64>()
                    + q.iter().map(|(_, _, c)| c.abs()).sum::<f64>();
                Some(Box::new(FiniteRangeField {
                    radius: r,
                    value: move |_: i64, word: &[u8]| {
                        let at = |k: i64| word[(k + r) as usize] as f64;
                        let mut acc = 0.0;
                        for (i, &wi) in w.iter().enumerate() {
                            acc += wi * at(i as i64 - r);
                        }
                        for &(a, b, c) in &q {
                            acc += c * at(a) * at(b);
                        }
                        acc
                    },
                    holder: 4.0 * sup * (2f64).powi(r as i32),
                    sup,
                }))
            }
            SymbolicObservable::PlantedGeometric { g, ratio } => {
                Some(Box::new(GeometricField::new(g.clone(), *ratio, 1.0)))
            }
            SymbolicObservable::GeometricUnit { .. } | SymbolicObservable::Coordinate { .. } => {
                None
            }
        }
    }

    pub fn build_f(&self) -> Option<Box<dyn TwoSidedObservable>> {
        match self {
            SymbolicObservable::GeometricUnit { g, ratio } => {
                Some(Box::new(GeometricField::unit_holder(g.clone(), *ratio)))
            }
            SymbolicObservable::Coordinate { center } => {
                let c = *center;
                Some(Box::new(FiniteRangeField {
                    radius: 0,
                    value: move |_: i64, w: &[u8]| w[0] as f64 - c,
                    holder: 2.0,
                    sup: 1.0 + c.abs(),
                }))
            }
            _ => None,
        }
    }
}

/// Holds a planted field and hands out the induced coboundary observable.
pub struct SymbolicFieldHolder {
    pub planted: Option<Box<dyn TwoSidedObservable>>,
    pub explicit: Option<Box<dyn TwoSidedObservable>>,
}

impl SymbolicFieldHolder {
    pub fn build(spec: &SymbolicObservable) -> Self {
        SymbolicFieldHolder { planted: spec.build_h(), explicit: spec.build_f() }
    }

    pub fn observable(&self) -> Box<dyn TwoSidedObservable + '_> {
        match (&self.planted, &self.explicit) {
            (Some(h), _) => Box::new(CoboundaryField { h: h.as_ref() }),
            (None, Some(f)) => Box::new(Passthrough(f.as_ref())),
            _ => unreachable!("schema guarantees one of the two"),
        }
    }
}

struct Passthrough<'a>(&'a dyn TwoSidedObservable);

impl TwoSidedObservable for Passthrough<'_> {
    fn eval(&self, j: i64, x: &coblab_core::symbolic::SymbolicPoint, tol: f64) -> f64 {
        self.0.eval(j, x, tol)
    }
    fn holder_const(&self) -> f64 {
        self.0.holder_const()
    }
    fn sup_bound(&self) -> f64 {
        self.0.sup_bound()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Solve the cohomological equation and issue the verdict.
    Solve {
        #[serde(default = "default_span")]
        sample_span: i64,
        #[serde(default = "default_sigma_n")]
        sigma_n: usize,
    },
    /// Detector-functional equivariance residuals for the solved (or
    /// planted) transfer map.
    Detect {
        t_grid: Vec<f64>,
        #[serde(default)]
        use_planted: bool,
    },
    /// Sequential decomposition with reconstruction and limit diagnostics.
    DecomposeSeq {
        horizon: usize,
        #[serde(default = "default_recon")]
        reconstruct_at: Vec<usize>,
        #[serde(default = "default_tail_k")]
        tail_k: usize,
        #[serde(default = "default_limexp")]
        limexp_n: usize,
        #[serde(default = "default_var_n")]
        variance_n: usize,
    },
    /// Gibbs-state diagnostics (masses, eigen residuals, equivariance).
    Gibbs {
        #[serde(default = "default_gibbs_depth")]
        check_depth: usize,
    },
    /// Sinai reduction residuals on sampled two-sided points.
    SinaiReduce {
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_resamples")]
        past_resamples: usize,
    },
    /// Twisted triplet diagnostics at the given θ values (pairs re, im).
    Triplet {
        thetas: Vec<(f64, f64)>,
        #[serde(default = "default_trip_depth")]
        depth: usize,
    },
    /// Eigenvalue-product coboundary signature over a frequency grid.
    Signature {
        t_grid: Vec<f64>,
        #[serde(default = "default_sig_n")]
        n_max: usize,
    },
    /// The bounded-sup/unbounded-variation sequence diagnostics.
    Counterexample {
        #[serde(default = "default_ce_n")]
        n_max: usize,
    },
    /// Two-sided difference reconstruction on sampled bracketable pairs.
    TwoSided {
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_ts_window")]
        window: usize,
    },
    /// Duality, mass-conservation, admissibility and decay diagnostics.
    Verify {
        #[serde(default = "default_verify_pairs")]
        duality_pairs: usize,
        #[serde(default = "default_verify_n")]
        decay_n: usize,
    },
}

fn default_span() -> i64 {
    4
}
fn default_sigma_n() -> usize {
    24
}
fn default_recon() -> Vec<usize> {
    vec![6, 12]
}
fn default_tail_k() -> usize {
    12
}
fn default_limexp() -> usize {
    30
}
fn default_var_n() -> usize {
    64
}
fn default_gibbs_depth() -> usize {
    8
}
fn default_points() -> usize {
    1000
}
fn default_resamples() -> usize {
    100
}
fn default_trip_depth() -> usize {
    48
}
fn default_sig_n() -> usize {
    100
}
fn default_ce_n() -> usize {
    200
}
fn default_pairs() -> usize {
    1000
}
fn default_ts_window() -> usize {
    40
}
fn default_verify_pairs() -> usize {
    50
}
fn default_verify_n() -> usize {
    6
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).context("schema error in scenario")?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if self.pipeline.is_empty() {
            // an empty pipeline is legal: the run produces an empty report
        }
        match &self.system {
            SystemSpec::Interval { base, horizon, maps, backend, .. } => {
                base.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
                if *horizon < 8 {
                    bail!("interval horizon must be >= 8");
                }
                let check = |m: &MapSpec| -> Result<()> {
                    let built = m.build()?;
                    if matches!(backend, BackendSpec::Fourier { .. }) && built.as_linear().is_none()
                    {
                        bail!("Fourier backend requires linear full-branch maps");
                    }
                    Ok(())
                };
                match maps {
                    Assign::Uniform { value } => check(value)?,
                    Assign::BySymbol { values } => {
                        for v in values {
                            check(v)?;
                        }
                    }
                }
            }
            SystemSpec::Sft { base, horizon, window, depth, beta, .. } => {
                base.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
                if window.0 >= window.1 || window.1 > *horizon || -window.0 > *horizon {
                    bail!("sft window must be inside the horizon");
                }
                if *depth == 0 || *depth > 16 {
                    bail!("cylinder depth must be in 1..=16");
                }
                if *beta <= 0.0 {
                    bail!("Hölder exponent must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Interval observable → the core observable spec.
pub fn build_interval_observable(
    obs: &IntervalObservable,
    backend: &BackendSpec,
    window_len: usize,
) -> Result<ObservableSpec> {
    Ok(match obs {
        IntervalObservable::None => ObservableSpec::None,
        IntervalObservable::Explicit { f } => ObservableSpec::Explicit(build_assign(f, backend)?),
        IntervalObservable::Planted { h } => {
            ObservableSpec::PlantedCoboundary(build_assign(h, backend)?)
        }
        IntervalObservable::GeometricSawtooth { decay } => {
            let saw = |cells: usize| {
                FiberFunction::Ulam(UlamFn::project(
                    |x| Complex64::new(x - 0.5, 0.0),
                    cells,
                ))
            };
            let base = match backend {
                BackendSpec::Ulam { cells } => saw(*cells),
                BackendSpec::Fourier { .. } => {
                    bail!("the sawtooth sequence needs the Ulam backend")
                }
            };
            // F_j = decay^j (x − 1/2) for j >= 0, zero on negative fibers
            let half = window_len / 2;
            let fs: Vec<FiberFunction> = (0..window_len)
                .map(|i| {
                    let j = i as i64 - half as i64;
                    if j < 0 {
                        base.scale(Complex64::new(0.0, 0.0))
                    } else {
                        base.scale(Complex64::new(decay.powi(j as i32), 0.0))
                    }
                })
                .collect();
            ObservableSpec::ExplicitPerTime(fs)
        }
    })
}

fn build_assign(
    assign: &Assign<TrigFn>,
    backend: &BackendSpec,
) -> Result<Assignment<FiberFunction>> {
    Ok(match assign {
        Assign::Uniform { value } => Assignment::Uniform(value.build(backend)),
        Assign::BySymbol { values } => {
            Assignment::BySymbol(values.iter().map(|v| v.build(backend)).collect())
        }
    })
}

pub fn build_maps(maps: &Assign<MapSpec>) -> Result<Assignment<BranchMap>> {
    Ok(match maps {
        Assign::Uniform { value } => Assignment::Uniform(value.build()?),
        Assign::BySymbol { values } => {
            Assignment::BySymbol(values.iter().map(|v| v.build()).collect::<Result<_>>()?)
        }
    })
}

pub fn build_backend(spec: &BackendSpec) -> SystemBackend {
    match spec {
        BackendSpec::Fourier { cutoff } => SystemBackend::Fourier { cutoff: *cutoff },
        BackendSpec::Ulam { cells } => SystemBackend::Ulam { cells: *cells },
    }
}

pub fn build_matrix_assign(assign: &Assign<Vec<Vec<u8>>>) -> Result<Assignment<Array2<u8>>> {
    let build = |rows: &Vec<Vec<u8>>| -> Result<Array2<u8>> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if r == 0 || rows.iter().any(|row| row.len() != c) {
            bail!("adjacency matrix must be rectangular and nonempty");
        }
        Ok(Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]))
    };
    Ok(match assign {
        Assign::Uniform { value } => Assignment::Uniform(build(value)?),
        Assign::BySymbol { values } => {
            Assignment::BySymbol(values.iter().map(build).collect::<Result<_>>()?)
        }
    })
}

pub fn build_potential_assign(assign: &Assign<Vec<Vec<f64>>>) -> Result<Assignment<Array2<f64>>> {
    let build = |rows: &Vec<Vec<f64>>| -> Result<Array2<f64>> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if r == 0 || rows.iter().any(|row| row.len() != c) {
            bail!("potential matrix must be rectangular and nonempty");
        }
        Ok(Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]))
    };
    Ok(match assign {
        Assign::Uniform { value } => Assignment::Uniform(build(value)?),
        Assign::BySymbol { values } => {
            Assignment::BySymbol(values.iter().map(build).collect::<Result<_>>()?)
        }
    })
}
