//! Reduction of two-sided Hölder observables to one-sided ones plus a
//! coboundary: grafting the canonical past onto each point and telescoping
//! the (geometrically small) disagreement down the forward orbit,
//!
//!   f_j = F_j∘π_j + u_{j+1}∘S_j − u_j,
//!
//! with both F and u Hölder for the halved exponent. Truncation depths are
//! chosen against the conservative β/2 envelope, and the certificates carry
//! that envelope rather than the (faster) observed decay.

use crate::symbolic::observable::TwoSidedObservable;
use crate::symbolic::points::SymbolicPoint;

/// Truncated Sinai reduction of an observable field.
pub struct SinaiReduction<'a> {
    pub field: &'a dyn TwoSidedObservable,
    pub beta: f64,
    /// Series truncation depth D.
    pub depth: usize,
    /// Certified bound on one truncated series tail, Σ_{k>D} 2 C_f 2^{−kβ/2}.
    pub series_tail: f64,
    /// Per-evaluation tolerance handed to the field.
    pub eval_tol: f64,
}

impl<'a> SinaiReduction<'a> {
    /// Chooses the depth so that each truncated series tail is below `tol`.
    pub fn new(field: &'a dyn TwoSidedObservable, beta: f64, tol: f64) -> Self {
        let c = field.holder_const().max(1e-300);
        let q = (2f64).powf(-beta / 2.0);
        // tail(D) = 2 c q^{D+1} / (1 − q) <= tol
        let depth = ((tol * (1.0 - q) / (2.0 * c)).ln() / q.ln() - 1.0).ceil().max(1.0) as usize;
        let series_tail = 2.0 * c * q.powi(depth as i32 + 1) / (1.0 - q);
        let eval_tol = tol / (8.0 * (depth as f64 + 1.0));
        SinaiReduction { field, beta, depth, series_tail, eval_tol }
    }

    /// Certified exponent of the reduced data.
    pub fn certified_exponent(&self) -> f64 {
        self.beta / 2.0
    }

    /// Certified envelope of the k-th series term.
    pub fn term_bound(&self, k: usize) -> f64 {
        2.0 * self.field.holder_const() * (2f64).powf(-(k as f64) * self.beta / 2.0)
    }

    /// u_j(x) = Σ_{k=0}^{D} [f_{j+k}(S^k x*) − f_{j+k}(S^k x)], x* the
    /// canonical-past representative of x; the sign makes the corrector enter
    /// the identity as u_{j+1}∘S − u_j.
    pub fn u(&self, j: i64, x: &SymbolicPoint) -> f64 {
        let star = x.clip_past();
        let mut acc = 0.0;
        for k in 0..=self.depth as i64 {
            let a = self.field.eval(j + k, &star.shift(k), self.eval_tol);
            let b = self.field.eval(j + k, &x.shift(k), self.eval_tol);
            acc += a - b;
        }
        acc
    }

    /// F_j(x₊) = f_j(x*) + Σ_{k=1}^{D} [f_{j+k}(S^k x*) − f_{j+k}(S^{k−1}(Sx)*)];
    /// reads only the coordinates k >= 0 of its argument.
    pub fn one_sided(&self, j: i64, x_plus: &SymbolicPoint) -> f64 {
        let star = x_plus.clip_past();
        let shifted_star = x_plus.shift(1).clip_past();
        let mut acc = self.field.eval(j, &star, self.eval_tol);
        for k in 1..=self.depth as i64 {
            let a = self.field.eval(j + k, &star.shift(k), self.eval_tol);
            let b = self.field.eval(j + k, &shifted_star.shift(k - 1), self.eval_tol);
            acc += a - b;
        }
        acc
    }

    /// |f_j(x) − F_j(π_j x) − u_{j+1}(S_j x) + u_j(x)|.
    pub fn residual(&self, j: i64, x: &SymbolicPoint) -> f64 {
        let f = self.field.eval(j, x, self.eval_tol);
        let reduced = self.one_sided(j, &x.clip_past());
        let u_next = self.u(j + 1, &x.shift(1));
        let u_here = self.u(j, x);
        (f - reduced - u_next + u_here).abs()
    }

    /// Bound on the residual implied by the three truncated series and the
    /// evaluation tolerances.
    pub fn certified_residual_bound(&self) -> f64 {
        3.0 * self.series_tail + 8.0 * (self.depth as f64 + 1.0) * self.eval_tol
    }

    /// Certified Hölder data of the reduced one-sided observable at the
    /// halved exponent: |F(x) − F(y)| <= bound · d(x,y)^{β/2} plus tails.
    pub fn reduced_holder_bound(&self) -> f64 {
        // each series term moves by at most 2 C_f (2^{−k} d)^{β} relative to
        // the base point; summing the β/2 envelope keeps a finite constant
        let c = self.field.holder_const();
        let q = (2f64).powf(-self.beta / 2.0);
        2.0 * c / (1.0 - q) + c
    }
}
