//! Assembly of a driven fiber system: for every time step of a realized
//! orbit (or of an explicit sequence), the transfer operator into the next
//! fiber, the reference measure, and the observable on that fiber.
//!
//! Solvers only ever see this time-indexed view; whether the data came from a
//! random draw, a deterministic cycle, or an explicit sequence is decided at
//! construction.

use crate::driving::{DrivingOrbit, FiberLabel};
use crate::fiberspace::{CylinderFn, FiberFunction, FourierFn, ReferenceMeasure, UlamFn};
use crate::symbolic::lattice::SftLattice;
use crate::transfer::{BranchMap, TransferOperator};
use crate::{CoreError, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Per-label assignment of fiber data.
#[derive(Debug, Clone)]
pub enum Assignment<T> {
    /// Same payload on every fiber.
    Uniform(T),
    /// Indexed by the symbol of the fiber label.
    BySymbol(Vec<T>),
}

impl<T> Assignment<T> {
    pub fn get(&self, label: FiberLabel) -> Result<&T> {
        match self {
            Assignment::Uniform(t) => Ok(t),
            Assignment::BySymbol(v) => match label {
                FiberLabel::Symbol(s) if s < v.len() => Ok(&v[s]),
                FiberLabel::Symbol(s) => Err(CoreError::InvalidParameter(format!(
                    "no data assigned to symbol {s}"
                ))),
                FiberLabel::Angle(_) => Err(CoreError::InvalidParameter(
                    "symbol-keyed data cannot serve a rotation base".into(),
                )),
            },
        }
    }
}

/// Backend resolution shared by all fibers of a system.
#[derive(Debug, Clone)]
pub enum SystemBackend {
    Fourier { cutoff: usize },
    Ulam { cells: usize },
    Cylinder { lattice: Arc<SftLattice>, depth: usize },
}

/// Observable configuration: either the observable itself per fiber, or a
/// planted transfer map H per fiber from which F = H∘τ − H is derived.
/// The `PerTime` variants carry one function per fiber of the window, in
/// window order.
#[derive(Debug, Clone)]
pub enum ObservableSpec {
    Explicit(Assignment<FiberFunction>),
    PlantedCoboundary(Assignment<FiberFunction>),
    ExplicitPerTime(Vec<FiberFunction>),
    PlantedPerTime(Vec<FiberFunction>),
    /// No observable; only density/operator work is possible.
    None,
}

/// A fibered system over the time window [lo, hi]: operators ops[t−lo] map
/// fiber t to fiber t+1.
#[derive(Debug)]
pub struct FiberSystem {
    lo: i64,
    hi: i64,
    labels: Vec<FiberLabel>,
    ops: Vec<TransferOperator>,
    measures: Vec<ReferenceMeasure>,
    observables: Option<Vec<FiberFunction>>,
    planted: Option<Vec<FiberFunction>>,
    backend: SystemBackend,
}

impl FiberSystem {
    /// Builds an interval-map system over the materialized window of `orbit`.
    pub fn interval(
        orbit: &DrivingOrbit,
        maps: &Assignment<BranchMap>,
        backend: SystemBackend,
        observable: &ObservableSpec,
    ) -> Result<Self> {
        let n = orbit.horizon();
        let (lo, hi) = (-n, n);
        let labels: Vec<FiberLabel> =
            (lo..=hi).map(|t| orbit.label(t)).collect::<Result<_>>()?;

        // one operator per distinct symbol, shared across the window
        let mut cache: BTreeMap<usize, TransferOperator> = BTreeMap::new();
        let mut op_for = |label: FiberLabel| -> Result<TransferOperator> {
            let map = maps.get(label)?;
            let key = label.symbol();
            if let Some(k) = key {
                if let Some(op) = cache.get(&k) {
                    return Ok(op.clone());
                }
            }
            let op = match &backend {
                SystemBackend::Fourier { .. } => {
                    let (slope, offset) = map.as_linear().ok_or_else(|| {
                        CoreError::InvalidParameter(
                            "Fourier backend needs linear full-branch maps".into(),
                        )
                    })?;
                    TransferOperator::fourier_linear(slope, offset)?
                }
                SystemBackend::Ulam { cells } => TransferOperator::ulam(map.clone(), *cells),
                SystemBackend::Cylinder { .. } => {
                    return Err(CoreError::BackendMismatch(
                        "interval systems use Fourier or Ulam backends".into(),
                    ))
                }
            };
            if let Some(k) = key {
                cache.insert(k, op.clone());
            }
            Ok(op)
        };

        let ops: Vec<TransferOperator> =
            labels[..labels.len() - 1].iter().map(|&l| op_for(l)).collect::<Result<_>>()?;
        let measures = vec![ReferenceMeasure::Lebesgue; labels.len()];

        let mut system = FiberSystem {
            lo,
            hi,
            labels,
            ops,
            measures,
            observables: None,
            planted: None,
            backend,
        };
        system.attach_observable(observable)?;
        Ok(system)
    }

    /// Builds a system from explicit per-time parts (used by the symbolic
    /// pipeline and by sequential scenarios).
    pub fn from_parts(
        lo: i64,
        labels: Vec<FiberLabel>,
        ops: Vec<TransferOperator>,
        measures: Vec<ReferenceMeasure>,
        observables: Option<Vec<FiberFunction>>,
        backend: SystemBackend,
    ) -> Result<Self> {
        if ops.len() + 1 != measures.len() || labels.len() != measures.len() {
            return Err(CoreError::InvalidParameter(
                "need one measure and label per fiber and one operator per step".into(),
            ));
        }
        let hi = lo + ops.len() as i64;
        Ok(FiberSystem { lo, hi, labels, ops, measures, observables, planted: None, backend })
    }

    /// Re-attaches observables after construction (builder form).
    pub fn with_observable(mut self, spec: &ObservableSpec) -> Result<Self> {
        self.attach_observable(spec)?;
        Ok(self)
    }

    fn attach_observable(&mut self, spec: &ObservableSpec) -> Result<()> {
        match spec {
            ObservableSpec::None => Ok(()),
            ObservableSpec::Explicit(assign) => {
                let obs = self
                    .labels
                    .iter()
                    .map(|&l| assign.get(l).cloned())
                    .collect::<Result<_>>()?;
                self.observables = Some(obs);
                Ok(())
            }
            ObservableSpec::ExplicitPerTime(obs) => {
                if obs.len() != self.labels.len() {
                    return Err(CoreError::InvalidParameter(
                        "need one observable per fiber of the window".into(),
                    ));
                }
                self.observables = Some(obs.clone());
                Ok(())
            }
            ObservableSpec::PlantedCoboundary(assign) => {
                let h: Vec<FiberFunction> =
                    self.labels.iter().map(|&l| assign.get(l).cloned()).collect::<Result<_>>()?;
                self.plant(h)
            }
            ObservableSpec::PlantedPerTime(h) => {
                if h.len() != self.labels.len() {
                    return Err(CoreError::InvalidParameter(
                        "need one transfer map per fiber of the window".into(),
                    ));
                }
                self.plant(h.clone())
            }
        }
    }

    fn plant(&mut self, h: Vec<FiberFunction>) -> Result<()> {
        let mut obs = Vec::with_capacity(self.labels.len());
        for t in self.lo..self.hi {
            let i = (t - self.lo) as usize;
            let h_next_pulled = self.op(t)?.koopman(&h[i + 1])?;
            obs.push(h_next_pulled.sub(&h[i])?);
        }
        // no operator leaves the last fiber; F there is unused
        obs.push(h.last().unwrap().scale(Complex64::new(0.0, 0.0)));
        self.observables = Some(obs);
        self.planted = Some(h);
        Ok(())
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn backend(&self) -> &SystemBackend {
        &self.backend
    }

    pub fn label(&self, t: i64) -> Result<FiberLabel> {
        self.check(t)?;
        Ok(self.labels[(t - self.lo) as usize])
    }

    fn check(&self, t: i64) -> Result<()> {
        if t < self.lo || t > self.hi {
            return Err(CoreError::HorizonExceeded {
                index: t,
                horizon: self.hi,
            });
        }
        Ok(())
    }

    /// Transfer operator from fiber t to fiber t+1.
    pub fn op(&self, t: i64) -> Result<&TransferOperator> {
        if t < self.lo || t >= self.hi {
            return Err(CoreError::HorizonExceeded { index: t, horizon: self.hi });
        }
        Ok(&self.ops[(t - self.lo) as usize])
    }

    pub fn measure(&self, t: i64) -> Result<&ReferenceMeasure> {
        self.check(t)?;
        Ok(&self.measures[(t - self.lo) as usize])
    }

    pub fn observable(&self, t: i64) -> Result<&FiberFunction> {
        self.check(t)?;
        self.observables
            .as_ref()
            .map(|o| &o[(t - self.lo) as usize])
            .ok_or_else(|| CoreError::InvalidParameter("system has no observable".into()))
    }

    /// The planted transfer map H at fiber t, when the observable was built
    /// from one.
    pub fn planted(&self, t: i64) -> Option<&FiberFunction> {
        self.check(t).ok()?;
        self.planted.as_ref().map(|h| &h[(t - self.lo) as usize])
    }

    /// Constant 1 on fiber t in the system backend.
    pub fn one(&self, t: i64) -> Result<FiberFunction> {
        self.check(t)?;
        let one = Complex64::new(1.0, 0.0);
        Ok(match &self.backend {
            SystemBackend::Fourier { .. } => FiberFunction::Fourier(FourierFn::constant(one)),
            SystemBackend::Ulam { cells } => FiberFunction::Ulam(UlamFn::constant(*cells, one)),
            SystemBackend::Cylinder { lattice, depth } => {
                FiberFunction::Cylinder(CylinderFn::constant(lattice.table(t, *depth)?, one))
            }
        })
    }

    /// 𝓛_{t+n−1} ∘ … ∘ 𝓛_t applied to φ; n = 0 is the identity.
    pub fn compose_apply(&self, t: i64, n: usize, phi: &FiberFunction) -> Result<FiberFunction> {
        let mut cur = phi.clone();
        for k in 0..n {
            cur = self.op(t + k as i64)?.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Twisted composition 𝓛^{θ,(n)} built from the per-fiber observables.
    pub fn compose_apply_twisted(
        &self,
        t: i64,
        n: usize,
        theta: Complex64,
        phi: &FiberFunction,
    ) -> Result<FiberFunction> {
        let mut cur = phi.clone();
        for k in 0..n {
            let tk = t + k as i64;
            cur = self.op(tk)?.apply_twisted(theta, self.observable(tk)?, &cur)?;
        }
        Ok(cur)
    }

    /// ψ ∘ T_t^{(n)} for ψ on fiber t+n.
    pub fn compose_koopman(&self, t: i64, n: usize, psi: &FiberFunction) -> Result<FiberFunction> {
        let mut cur = psi.clone();
        for k in (0..n).rev() {
            cur = self.op(t + k as i64)?.koopman(&cur)?;
        }
        Ok(cur)
    }

    /// ‖𝓛_t 1 − 1‖_B, the defect of measure equivariance across step t.
    pub fn equivariance_defect(&self, t: i64) -> Result<f64> {
        let pushed = self.op(t)?.apply(&self.one(t)?)?;
        pushed.sub(&self.one(t + 1)?)?.norm_b(self.measure(t + 1)?)
    }

    /// Birkhoff sum S_n G as a fiber function on fiber t, for the sequence of
    /// per-fiber observables currently attached.
    pub fn birkhoff_sum(&self, t: i64, n: usize) -> Result<FiberFunction> {
        let mut acc = self.observable(t)?.scale(Complex64::new(0.0, 0.0));
        for k in 0..n {
            let pulled = self.compose_koopman(t, k, self.observable(t + k as i64)?)?;
            acc = acc.add(&pulled)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::BaseSystem;
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn doubling_system(observable: ObservableSpec) -> FiberSystem {
        let orbit =
            DrivingOrbit::materialize(BaseSystem::FiniteCycle { period: 1 }, None, 24).unwrap();
        FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::doubling()),
            SystemBackend::Fourier { cutoff: 64 },
            &observable,
        )
        .unwrap()
    }

    #[test]
    fn composition_cocycle_property() {
        let sys = doubling_system(ObservableSpec::None);
        let phi = FiberFunction::Fourier(FourierFn::cosine(8));
        let whole = sys.compose_apply(0, 3, &phi).unwrap();
        let split = sys
            .compose_apply(2, 1, &sys.compose_apply(0, 2, &phi).unwrap())
            .unwrap();
        assert_abs_diff_eq!(
            whole.as_fourier().unwrap().mode(1).re,
            split.as_fourier().unwrap().mode(1).re,
            epsilon = 1e-15
        );
        let id = sys.compose_apply(0, 0, &phi).unwrap();
        assert_eq!(id.as_fourier().unwrap().mode(8), phi.as_fourier().unwrap().mode(8));
    }

    #[test]
    fn planted_observable_telescopes() {
        let h = FiberFunction::Fourier(FourierFn::cosine(1));
        let sys = doubling_system(ObservableSpec::PlantedCoboundary(Assignment::Uniform(h)));
        // F = cos(4πx) − cos(2πx)
        let f = sys.observable(0).unwrap().as_fourier().unwrap();
        assert_abs_diff_eq!(f.mode(2).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.mode(1).re, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn birkhoff_sum_of_two_steps() {
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        let sys = doubling_system(ObservableSpec::Explicit(Assignment::Uniform(f)));
        // S_2 = cos(2πx) + cos(4πx)
        let s2 = sys.birkhoff_sum(0, 2).unwrap();
        let g = s2.as_fourier().unwrap();
        assert_abs_diff_eq!(g.mode(1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.mode(2).re, 0.5, epsilon = 1e-15);
        // S_0 = 0, S_1 = F
        assert_eq!(sys.birkhoff_sum(0, 0).unwrap().ess_sup(), 0.0);
    }

    #[test]
    fn equivariance_defect_vanishes_for_lebesgue_maps() {
        let sys = doubling_system(ObservableSpec::None);
        assert!(sys.equivariance_defect(0).unwrap() < 1e-14);
    }

    #[test]
    fn two_symbol_assignment_follows_labels() {
        let orbit = DrivingOrbit::materialize(
            BaseSystem::IidSymbols { alphabet: 2, seed: 3 },
            None,
            10,
        )
        .unwrap();
        let maps = Assignment::BySymbol(vec![
            BranchMap::linear_full_branch(2, 0.0).unwrap(),
            BranchMap::linear_full_branch(3, 0.0).unwrap(),
        ]);
        let sys = FiberSystem::interval(
            &orbit,
            &maps,
            SystemBackend::Fourier { cutoff: 16 },
            &ObservableSpec::None,
        )
        .unwrap();
        for t in -10..10 {
            let slope = match sys.op(t).unwrap() {
                TransferOperator::FourierLinear { slope, .. } => *slope,
                _ => unreachable!(),
            };
            let expect = 2 + orbit.label(t).unwrap().symbol().unwrap() as u32;
            assert_eq!(slope, expect);
        }
    }

    #[test]
    fn birkhoff_cocycle_identity() {
        let f = FiberFunction::Fourier(FourierFn::cosine(1));
        let sys = doubling_system(ObservableSpec::Explicit(Assignment::Uniform(f)));
        // S_{n+m}(t) = S_n(t) + S_m(t+n)∘T^{(n)}
        let lhs = sys.birkhoff_sum(0, 5).unwrap();
        let tail = sys.compose_koopman(0, 2, &sys.birkhoff_sum(2, 3).unwrap()).unwrap();
        let rhs = sys.birkhoff_sum(0, 2).unwrap().add(&tail).unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        assert!(diff.ess_sup() < 1e-12);
    }

    #[test]
    fn window_bounds_are_enforced() {
        let sys = doubling_system(ObservableSpec::None);
        assert!(sys.op(24).is_err());
        assert!(sys.op(-25).is_err());
        assert!(sys.one(24).is_ok());
    }

    #[test]
    fn rotation_base_serves_uniform_fiber_data() {
        let orbit = DrivingOrbit::materialize(
            BaseSystem::CircleRotation { angle: 0.25 },
            Some(crate::driving::FiberLabel::Angle(0.1)),
            16,
        )
        .unwrap();
        let sys = FiberSystem::interval(
            &orbit,
            &Assignment::Uniform(BranchMap::doubling()),
            SystemBackend::Fourier { cutoff: 16 },
            &ObservableSpec::Explicit(Assignment::Uniform(FiberFunction::Fourier(
                FourierFn::cosine(1),
            ))),
        )
        .unwrap();
        assert!(matches!(sys.label(2).unwrap(), FiberLabel::Angle(x) if (x - 0.6).abs() < 1e-14));
        assert!(sys.observable(3).is_ok());
        // symbol-keyed data cannot serve a rotation base
        let bad = FiberSystem::interval(
            &orbit,
            &Assignment::BySymbol(vec![BranchMap::doubling()]),
            SystemBackend::Fourier { cutoff: 16 },
            &ObservableSpec::None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn planted_constant_h_gives_zero_observable() {
        let h = FiberFunction::Fourier(FourierFn::constant(c(5.0)));
        let sys = doubling_system(ObservableSpec::PlantedCoboundary(Assignment::Uniform(h)));
        assert!(sys.observable(0).unwrap().ess_sup() < 1e-14);
    }
}
