//! Observable fields on two-sided shift spaces, with the Hölder data the
//! reduction and reconstruction machinery needs: a uniform bound, a uniform
//! β-Hölder constant, and evaluation to a requested tolerance.

use crate::symbolic::points::SymbolicPoint;

/// A time-indexed family f_j of real observables on the two-sided shift.
pub trait TwoSidedObservable: Send + Sync {
    /// f_j(x) with absolute error at most `tol`.
    fn eval(&self, j: i64, x: &SymbolicPoint, tol: f64) -> f64;
    /// Uniform bound on the β-Hölder constants of the family.
    fn holder_const(&self) -> f64;
    /// Uniform sup bound.
    fn sup_bound(&self) -> f64;
}

/// f_j(x) = scale_j · Σ_k ratio^{|k|} g(x_k): an infinite-range field with a
/// geometric coefficient envelope. With ratio = 2^{−β} its Hölder constant
/// (for the 2^{−k} metric with exponent β) is explicitly computable.
pub struct GeometricField {
    pub g: Vec<f64>,
    pub ratio: f64,
    pub scale: f64,
}

impl GeometricField {
    pub fn new(g: Vec<f64>, ratio: f64, scale: f64) -> Self {
        assert!(ratio > 0.0 && ratio < 1.0);
        GeometricField { g, ratio, scale }
    }

    /// Rescaled so that the certified Hölder constant is exactly 1 for β with
    /// 2^{−β} = ratio.
    pub fn unit_holder(g: Vec<f64>, ratio: f64) -> Self {
        let raw = GeometricField::new(g, ratio, 1.0);
        let c = raw.holder_const();
        GeometricField { scale: 1.0 / c, ..raw }
    }

    fn g_max(&self) -> f64 {
        self.g.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

impl TwoSidedObservable for GeometricField {
    fn eval(&self, _j: i64, x: &SymbolicPoint, tol: f64) -> f64 {
        // truncate once the two-sided tail 2 g_max ratio^{D+1}/(1−ratio) < tol
        let gm = self.g_max().max(1e-300);
        let needed = tol.max(1e-15) * (1.0 - self.ratio) / (2.0 * gm * self.scale.abs());
        let depth = (needed.ln() / self.ratio.ln()).ceil().max(1.0) as i64;
        let mut acc = self.g[x.coord(0)];
        let mut w = 1.0;
        for k in 1..=depth {
            w *= self.ratio;
            acc += w * (self.g[x.coord(k)] + self.g[x.coord(-k)]);
        }
        self.scale * acc
    }

    fn holder_const(&self) -> f64 {
        // points at distance 2^{−s} differ only at |k| >= s:
        // |f(x)−f(y)| <= 2 g_osc Σ_{|k|>=s} ratio^{|k|} = 4 g_osc ratio^s/(1−ratio)
        // and ratio^s = (2^{−s})^β when ratio = 2^{−β}
        let osc = self.g.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - self.g.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        self.scale.abs() * 4.0 * osc / (1.0 - self.ratio)
    }

    fn sup_bound(&self) -> f64 {
        self.scale.abs() * self.g_max() * (1.0 + self.ratio) / (1.0 - self.ratio)
    }
}

/// f_j(x) = table over the coordinates [−radius, radius]; exact finite range.
/// Tables may vary with j through the supplied closure.
pub struct FiniteRangeField<F>
where
    F: Fn(i64, &[u8]) -> f64 + Send + Sync,
{
    pub radius: i64,
    pub value: F,
    pub holder: f64,
    pub sup: f64,
}

impl<F> TwoSidedObservable for FiniteRangeField<F>
where
    F: Fn(i64, &[u8]) -> f64 + Send + Sync,
{
    fn eval(&self, j: i64, x: &SymbolicPoint, _tol: f64) -> f64 {
        let word = x.word(-self.radius, (2 * self.radius + 1) as usize);
        (self.value)(j, &word)
    }

    fn holder_const(&self) -> f64 {
        self.holder
    }

    fn sup_bound(&self) -> f64 {
        self.sup
    }
}

/// The coboundary field h_{j+1}∘S − h_j of a transfer field h.
pub struct CoboundaryField<'a> {
    pub h: &'a dyn TwoSidedObservable,
}

impl TwoSidedObservable for CoboundaryField<'_> {
    fn eval(&self, j: i64, x: &SymbolicPoint, tol: f64) -> f64 {
        self.h.eval(j + 1, &x.shift(1), tol / 2.0) - self.h.eval(j, x, tol / 2.0)
    }

    fn holder_const(&self) -> f64 {
        // d(Sx, Sy) <= 2 d(x, y) two-sidedly
        3.0 * self.h.holder_const()
    }

    fn sup_bound(&self) -> f64 {
        2.0 * self.h.sup_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::lattice::SftLattice;
    use crate::symbolic::points::sample_points;
    use ndarray::array;

    #[test]
    fn geometric_field_respects_its_own_certificates() {
        let lat = SftLattice::stationary(array![[1, 1], [1, 1]], 80, 1.0).unwrap();
        let f = GeometricField::unit_holder(vec![0.0, 1.0], 0.5);
        let pts = sample_points(&lat, 0, -40, 40, 60, 7);
        for pair in pts.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let (x, y) = (&pair[0], &pair[1]);
            let d = x.distance(y, 40);
            let diff = (f.eval(0, x, 1e-12) - f.eval(0, y, 1e-12)).abs();
            assert!(diff <= f.holder_const() * d + 1e-9, "diff {diff} at distance {d}");
            assert!(f.eval(0, x, 1e-12).abs() <= f.sup_bound() + 1e-12);
        }
    }

    #[test]
    fn geometric_eval_tolerance_is_honoured() {
        let lat = SftLattice::stationary(array![[1, 1], [1, 1]], 200, 1.0).unwrap();
        let f = GeometricField::new(vec![0.0, 1.0], 0.5, 1.0);
        let x = sample_points(&lat, 0, -150, 150, 1, 3).pop().unwrap();
        let coarse = f.eval(0, &x, 1e-3);
        let fine = f.eval(0, &x, 1e-14);
        assert!((coarse - fine).abs() <= 1e-3);
    }

    #[test]
    fn coboundary_field_telescopes_on_orbits() {
        let lat = SftLattice::stationary(array![[1, 1], [1, 1]], 80, 1.0).unwrap();
        let h = GeometricField::unit_holder(vec![0.0, 1.0], 0.5);
        let f = CoboundaryField { h: &h };
        let x = sample_points(&lat, 0, -30, 30, 1, 11).pop().unwrap();
        // Σ_{j<n} f_j(S^j x) = h_n(Sⁿx) − h_0(x)
        let n = 5;
        let mut sum = 0.0;
        for j in 0..n {
            sum += f.eval(j, &x.shift(j), 1e-13);
        }
        let expect = h.eval(n, &x.shift(n), 1e-13) - h.eval(0, &x, 1e-13);
        assert!((sum - expect).abs() < 1e-11);
    }
}
