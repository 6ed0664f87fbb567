//! Machine-readable run reports. Every verdict ships with the numeric
//! evidence that produced it, and everything serializes deterministically
//! (struct order, no maps with unstable iteration). Wall-clock timing is
//! written to a separate file so reports stay byte-identical across runs.

use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub backend: String,
    pub steps: Vec<StepReport>,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tail_tol: f64,
    pub series_cap: usize,
    pub density_depth: usize,
    /// Resolution notes: variation partitions, cell counts, cylinder depths.
    pub resolutions: Vec<String>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum StepReport {
    Solve(SolveStep),
    Detect(DetectStep),
    DecomposeSeq(DecomposeStep),
    Gibbs(GibbsStep),
    SinaiReduce(SinaiStep),
    Triplet(TripletStep),
    Signature(SignatureStep),
    Counterexample(CounterexampleStep),
    TwoSided(TwoSidedStep),
    Verify(VerifyStep),
}

#[derive(Debug, Serialize)]
pub struct SolveStep {
    pub verdict: String,
    pub diagnostic: Option<String>,
    pub sigma2: f64,
    pub sigma2_raw: f64,
    pub sigma2_boundary_correction: f64,
    pub sigma2_tail_bound: f64,
    pub sigma2_birkhoff: f64,
    pub autocovariances: Vec<f64>,
    pub fibers: Vec<FiberRow>,
    pub recovery_error: Option<f64>,
    pub density_residual: f64,
    pub density_lower_bound: f64,
    pub density_sup_norm: f64,
    pub sigma_tol: f64,
    pub pi_tol: f64,
    pub c_tol: f64,
    /// Sampled-point residual of the lifted solution (subshift systems).
    pub lifted_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FiberRow {
    pub t: i64,
    pub c: f64,
    pub coboundary_residual: f64,
    pub martingale_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct DetectStep {
    pub candidate: String,
    pub rows: Vec<DetectRow>,
}

#[derive(Debug, Serialize)]
pub struct DetectRow {
    pub t: f64,
    pub residual: f64,
    pub functional_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct DecomposeStep {
    pub horizon: usize,
    pub max_identity_residual: f64,
    pub max_martingale_residual: f64,
    pub max_u_mean: f64,
    pub orthogonality_defect: f64,
    pub variance_slope: f64,
    pub variance_bounded: bool,
    pub variances: Vec<f64>,
    pub cauchy_blocks: Vec<f64>,
    pub series_converged: bool,
    pub reconstructions: Vec<ReconRow>,
    pub limexp: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ReconRow {
    pub n: usize,
    pub sup_error: Option<f64>,
    pub tail_estimate: f64,
}

#[derive(Debug, Serialize)]
pub struct GibbsStep {
    pub eigen_residual: f64,
    pub boundary_gap: f64,
    pub positivity_window: usize,
    pub mass_defects: Vec<f64>,
    pub equivariance_defect: f64,
}

#[derive(Debug, Serialize)]
pub struct SinaiStep {
    pub depth: usize,
    pub series_tail: f64,
    pub certified_bound: f64,
    pub certified_exponent: f64,
    pub max_residual: f64,
    pub max_past_dependence: f64,
    pub points: usize,
    pub resamples: usize,
}

#[derive(Debug, Serialize)]
pub struct TripletStep {
    pub rows: Vec<TripletRow>,
}

#[derive(Debug, Serialize)]
pub struct TripletRow {
    pub theta_re: f64,
    pub theta_im: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub lambda_abs: f64,
    pub eigen_residual: f64,
    pub adjoint_residual: f64,
    pub cauchy_gap: f64,
}

#[derive(Debug, Serialize)]
pub struct SignatureStep {
    pub rows: Vec<SignatureRow>,
    /// File the per-frequency product curves were written to.
    pub curves_csv: String,
}

#[derive(Debug, Serialize)]
pub struct SignatureRow {
    pub t: f64,
    pub kappa: f64,
    pub kappa_over_t2: f64,
    pub min_product: f64,
}

#[derive(Debug, Serialize)]
pub struct CounterexampleStep {
    pub sup_partial_sums: f64,
    pub tv_over_n: Vec<(usize, f64)>,
    pub tv_slope: f64,
    pub h_variation_growth: Vec<(usize, f64)>,
    pub max_martingale_residual: f64,
    pub max_identity_residual: f64,
    pub reconstruction_sup_error: f64,
    pub curves_csv: String,
}

#[derive(Debug, Serialize)]
pub struct TwoSidedStep {
    pub pairs: usize,
    pub window: usize,
    pub max_error: f64,
    pub max_tail: f64,
    pub holder_estimate: f64,
    pub exact_zero_on_equal_points: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyStep {
    pub duality_max_defect: f64,
    pub mass_conservation_defect: f64,
    pub equivariance_defect: f64,
    pub op_bound: f64,
    pub decay_c: f64,
    pub decay_lambda: f64,
    pub cone_minorant: f64,
    pub density_residual: f64,
    pub density_lower_bound: f64,
}

/// Writes a (n, value, tail_bound) series as diff-able CSV.
pub fn write_series_csv(
    path: &Path,
    rows: impl IntoIterator<Item = (usize, f64, f64)>,
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "value", "tail_bound"])?;
    for (n, v, t) in rows {
        w.write_record([n.to_string(), format!("{v:.17e}"), format!("{t:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
