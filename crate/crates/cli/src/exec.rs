//! Executes a parsed scenario: builds the driven system, runs each pipeline
//! step, and collects the numeric evidence into the report.

use crate::report::*;
use crate::spec::*;
use anyhow::{anyhow, bail, Result};
use coblab_core::cocycle::{self, DensityCocycle};
use coblab_core::driving::DrivingOrbit;
use coblab_core::fiberspace::FiberFunction;
use coblab_core::livsic::{CoboundaryProblem, Verdict};
use coblab_core::sequential::SequentialProblem;
use coblab_core::spectral;
use coblab_core::symbolic::points::sample_points;
use coblab_core::symbolic::solve::{gibbs_from_orbit, lattice_from_orbit, solve_sft};
use coblab_core::symbolic::{GibbsState, SftLattice, SinaiReduction};
use coblab_core::system::{FiberSystem, SystemBackend};
use coblab_core::transfer::BranchMap;
use num_complex::Complex64;
use std::path::Path;
use std::sync::Arc;

pub struct RunOutcome {
    pub report: Report,
    /// Verdict of the last solve step, if any.
    pub verdict: Option<Verdict>,
}

enum Built {
    Interval {
        system: FiberSystem,
        maps_for_eval: Vec<BranchMap>,
        horizon: i64,
    },
    Sft {
        lattice: Arc<SftLattice>,
        state: GibbsState,
        holder: SymbolicFieldHolder,
        depth: usize,
    },
}

pub fn run(scenario: &Scenario, out_dir: &Path, seed_override: Option<u64>) -> Result<RunOutcome> {
    scenario.validate()?;
    let seed = seed_override.unwrap_or(scenario.seed);
    let built = build_system(scenario, seed)?;
    let tol = &scenario.tolerances;

    let mut steps = Vec::new();
    let mut verdict = None;
    let mut resolutions = Vec::new();
    match &built {
        Built::Interval { system, .. } => match system.backend() {
            SystemBackend::Fourier { cutoff } => {
                resolutions.push(format!("fourier cutoff {cutoff}, variation partition {}", 16 * cutoff));
            }
            SystemBackend::Ulam { cells } => resolutions.push(format!("ulam cells {cells}")),
            _ => {}
        },
        Built::Sft { depth, .. } => resolutions.push(format!("cylinder depth {depth}")),
    }

    for (idx, step) in scenario.pipeline.iter().enumerate() {
        let step_seed = seed.wrapping_add(1000 + idx as u64);
        let rep = execute_step(step, &built, tol, out_dir, step_seed, &scenario.name)?;
        if let StepReport::Solve(s) = &rep {
            verdict = Some(if s.verdict == "coboundary" {
                Verdict::Coboundary
            } else {
                Verdict::NotACoboundary {
                    diagnostic: s.diagnostic.clone().unwrap_or_default(),
                }
            });
        }
        steps.push(rep);
    }

    let backend = match &built {
        Built::Interval { system, .. } => match system.backend() {
            SystemBackend::Fourier { cutoff } => format!("fourier:{cutoff}"),
            SystemBackend::Ulam { cells } => format!("ulam:{cells}"),
            _ => "cylinder".into(),
        },
        Built::Sft { depth, .. } => format!("cylinder:{depth}"),
    };

    Ok(RunOutcome {
        report: Report {
            scenario: scenario.name.clone(),
            seed,
            backend,
            steps,
            provenance: Provenance {
                tail_tol: tol.tail,
                series_cap: tol.series_cap,
                density_depth: tol.density_depth,
                resolutions,
            },
        },
        verdict,
    })
}

fn build_system(scenario: &Scenario, seed: u64) -> Result<Built> {
    match &scenario.system {
        SystemSpec::Interval { base, horizon, backend, maps, observable } => {
            let base = override_base_seed(base, seed);
            let orbit = DrivingOrbit::materialize(base, None, *horizon)?;
            let window_len = (2 * horizon + 1) as usize;
            let obs = build_interval_observable(observable, backend, window_len)?;
            let assignment = build_maps(maps)?;
            let system =
                FiberSystem::interval(&orbit, &assignment, build_backend(backend), &obs)?;
            let maps_for_eval: Vec<BranchMap> = (-*horizon..*horizon)
                .map(|t| Ok(assignment.get(orbit.label(t)?)?.clone()))
                .collect::<coblab_core::Result<_>>()?;
            Ok(Built::Interval { system, maps_for_eval, horizon: *horizon })
        }
        SystemSpec::Sft {
            base,
            horizon,
            window,
            margin,
            matrices,
            potentials,
            beta,
            depth,
            observable,
        } => {
            let base = override_base_seed(base, seed);
            let orbit = DrivingOrbit::materialize(base, None, *horizon)?;
            let lattice = lattice_from_orbit(&orbit, &build_matrix_assign(matrices)?, *beta)?;
            let state = gibbs_from_orbit(
                &orbit,
                &lattice,
                &build_potential_assign(potentials)?,
                window.0,
                window.1,
                *margin,
            )?;
            let holder = SymbolicFieldHolder::build(observable);
            Ok(Built::Sft { lattice, state, holder, depth: *depth })
        }
    }
}

fn override_base_seed(base: &coblab_core::driving::BaseSystem, seed: u64) -> coblab_core::driving::BaseSystem {
    use coblab_core::driving::BaseSystem as B;
    match base {
        B::IidSymbols { alphabet, .. } => B::IidSymbols { alphabet: *alphabet, seed },
        B::MarkovSymbols { matrix, start, .. } => {
            B::MarkovSymbols { matrix: matrix.clone(), start: *start, seed }
        }
        other => other.clone(),
    }
}

fn execute_step(
    step: &Step,
    built: &Built,
    tol: &Tolerances,
    out_dir: &Path,
    seed: u64,
    scenario_name: &str,
) -> Result<StepReport> {
    match (step, built) {
        (Step::Solve { sample_span, sigma_n }, Built::Interval { system, .. }) => {
            interval_solve(system, tol, *sample_span, *sigma_n)
        }
        (Step::Solve { sample_span, sigma_n }, Built::Sft { lattice, state, holder, depth, .. }) => {
            sft_solve(lattice, state, holder, *depth, tol, *sample_span, *sigma_n, seed)
        }
        (Step::Detect { t_grid, use_planted }, Built::Interval { system, .. }) => {
            detect(system, tol, t_grid, *use_planted)
        }
        (
            Step::DecomposeSeq { horizon, reconstruct_at, tail_k, limexp_n, variance_n },
            Built::Interval { system, .. },
        ) => decompose_seq(system, tol, *horizon, reconstruct_at, *tail_k, *limexp_n, *variance_n),
        (Step::Gibbs { check_depth }, Built::Sft { state, .. }) => gibbs_step(state, *check_depth),
        (Step::SinaiReduce { points, past_resamples }, Built::Sft { lattice, state, holder, .. }) => {
            sinai_step(lattice, state, holder, tol, *points, *past_resamples, seed)
        }
        (Step::Triplet { thetas, depth }, Built::Interval { system, .. }) => {
            triplet_step(system, tol, thetas, *depth)
        }
        (Step::Signature { t_grid, n_max }, Built::Interval { system, .. }) => {
            signature_step(system, tol, t_grid, *n_max, out_dir, scenario_name)
        }
        (Step::Counterexample { n_max }, Built::Interval { system, maps_for_eval, horizon }) => {
            counterexample_step(system, maps_for_eval, *horizon, tol, *n_max, out_dir, scenario_name)
        }
        (Step::TwoSided { pairs, window }, Built::Sft { lattice, holder, .. }) => {
            two_sided_step(lattice, holder, *pairs, *window, seed)
        }
        (Step::Verify { duality_pairs, decay_n }, Built::Interval { system, maps_for_eval, .. }) => {
            verify_step(system, maps_for_eval, *duality_pairs, *decay_n, seed)
        }
        (step, _) => bail!(
            "step {} is not applicable to this system kind",
            serde_json::to_value(step)?["cmd"].as_str().unwrap_or("?")
        ),
    }
}

fn interval_cocycle(
    system: &FiberSystem,
    tol: &Tolerances,
    left: i64,
    right: i64,
) -> Result<DensityCocycle> {
    let (lo, hi) = system.window();
    if -left - (tol.density_depth as i64) < lo || right > hi {
        bail!(
            "horizon too small: the density cocycle needs fibers in [{}, {right}]",
            -left - tol.density_depth as i64
        );
    }
    Ok(cocycle::density_cocycle(system, -left, right, tol.density_depth)?)
}

fn interval_solve(
    system: &FiberSystem,
    tol: &Tolerances,
    span: i64,
    sigma_n: usize,
) -> Result<StepReport> {
    let left = span + tol.series_cap as i64 + 2;
    let right = span + sigma_n as i64 + 2;
    let coc = interval_cocycle(system, tol, left, right)?;
    let problem = CoboundaryProblem::new(system, &coc, tol.tail, tol.series_cap);
    let samples: Vec<i64> = (-span..=span).collect();
    let report = problem.solve(&samples, sigma_n)?;
    let recovery = problem.recovery_error(&samples).ok();
    Ok(StepReport::Solve(solve_report_from(&report, recovery, &coc, None)))
}

fn solve_report_from(
    report: &coblab_core::livsic::SolveReport,
    recovery: Option<f64>,
    coc: &DensityCocycle,
    lifted_residual: Option<f64>,
) -> SolveStep {
    let (verdict, diagnostic) = match &report.verdict {
        Verdict::Coboundary => ("coboundary".to_string(), None),
        Verdict::NotACoboundary { diagnostic } => {
            ("not_a_coboundary".to_string(), Some(diagnostic.clone()))
        }
    };
    SolveStep {
        verdict,
        diagnostic,
        sigma2: report.sigma2.green_kubo,
        sigma2_raw: report.sigma2.green_kubo_raw,
        sigma2_boundary_correction: report.sigma2.boundary_correction,
        sigma2_tail_bound: report.sigma2.tail_bound,
        sigma2_birkhoff: report.sigma2.birkhoff,
        autocovariances: report.sigma2.autocovariances.clone(),
        fibers: report
            .fibers
            .iter()
            .map(|f| FiberRow {
                t: f.t,
                c: f.c,
                coboundary_residual: f.coboundary_residual,
                martingale_residual: f.martingale_residual,
            })
            .collect(),
        recovery_error: recovery,
        density_residual: coc.max_residual(),
        density_lower_bound: coc.rho,
        density_sup_norm: coc.sup_norm_b,
        sigma_tol: report.tolerances.sigma_tol,
        pi_tol: report.tolerances.pi_tol,
        c_tol: report.tolerances.c_tol,
        lifted_residual,
    }
}

#[allow(clippy::too_many_arguments)]
fn sft_solve(
    lattice: &Arc<SftLattice>,
    state: &GibbsState,
    holder: &SymbolicFieldHolder,
    depth: usize,
    tol: &Tolerances,
    span: i64,
    sigma_n: usize,
    seed: u64,
) -> Result<StepReport> {
    let field = holder.observable();
    let samples: Vec<i64> = (0..=span).collect();
    let checks = sample_points(lattice, 0, -8, 8, 32, seed);
    let solution = solve_sft(
        state,
        field.as_ref(),
        depth,
        tol.series_cap,
        tol.tail,
        &samples,
        &checks,
        tol.density_depth.min(16),
    )?;
    let _ = sigma_n;
    // recovery against the planted field, when available
    let recovery = holder.planted.as_ref().map(|h| {
        let pts = sample_points(lattice, 0, -7, 7, 40, seed.wrapping_add(7));
        let mut worst = 0.0f64;
        for pair in pts.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let est = solution.transfer_map(0, &pair[0]).unwrap_or(f64::NAN)
                - solution.transfer_map(0, &pair[1]).unwrap_or(f64::NAN);
            let truth = h.eval(0, &pair[0], 1e-13) - h.eval(0, &pair[1], 1e-13);
            worst = worst.max((est - truth).abs());
        }
        worst
    });
    let (verdict, diagnostic) = match &solution.verdict {
        Verdict::Coboundary => ("coboundary".to_string(), None),
        Verdict::NotACoboundary { diagnostic } => {
            ("not_a_coboundary".to_string(), Some(diagnostic.clone()))
        }
    };
    let rep = &solution.report;
    Ok(StepReport::Solve(SolveStep {
        verdict,
        diagnostic,
        sigma2: rep.sigma2.green_kubo,
        sigma2_raw: rep.sigma2.green_kubo_raw,
        sigma2_boundary_correction: rep.sigma2.boundary_correction,
        sigma2_tail_bound: rep.sigma2.tail_bound,
        sigma2_birkhoff: rep.sigma2.birkhoff,
        autocovariances: rep.sigma2.autocovariances.clone(),
        fibers: rep
            .fibers
            .iter()
            .map(|f| FiberRow {
                t: f.t,
                c: f.c,
                coboundary_residual: f.coboundary_residual,
                martingale_residual: f.martingale_residual,
            })
            .collect(),
        recovery_error: recovery,
        density_residual: 0.0,
        density_lower_bound: 1.0,
        density_sup_norm: 1.0,
        sigma_tol: rep.tolerances.sigma_tol,
        pi_tol: rep.tolerances.pi_tol,
        c_tol: rep.tolerances.c_tol,
        lifted_residual: Some(solution.residual_sup),
    }))
}

fn detect(
    system: &FiberSystem,
    tol: &Tolerances,
    t_grid: &[f64],
    use_planted: bool,
) -> Result<StepReport> {
    let left = tol.series_cap as i64 + 4;
    let coc = interval_cocycle(system, tol, left, 8)?;
    let problem = CoboundaryProblem::new(system, &coc, tol.tail, tol.series_cap);
    let tests: Vec<FiberFunction> = {
        let mut v = vec![system.one(0)?];
        v.extend(cocycle::mean_zero_corpus(system, 0, 6, 41)?);
        v
    };
    let candidate: Box<dyn Fn(i64) -> coblab_core::Result<FiberFunction>> = if use_planted {
        Box::new(move |t| {
            system
                .planted(t)
                .cloned()
                .ok_or_else(|| coblab_core::CoreError::InvalidParameter("no planted map".into()))
        })
    } else {
        let p = &problem;
        Box::new(move |t| p.chi(t))
    };
    let mut rows = Vec::new();
    for &s in t_grid {
        let (residual, norm) = problem.detector_residual(candidate.as_ref(), s, 0, &tests)?;
        rows.push(DetectRow { t: s, residual, functional_norm: norm });
    }
    Ok(StepReport::Detect(DetectStep {
        candidate: if use_planted { "planted".into() } else { "solved".into() },
        rows,
    }))
}

fn decompose_seq(
    system: &FiberSystem,
    tol: &Tolerances,
    horizon: usize,
    reconstruct_at: &[usize],
    tail_k: usize,
    limexp_n: usize,
    variance_n: usize,
) -> Result<StepReport> {
    let prob = SequentialProblem::new(system, horizon, tol.tail)?;
    let dec = prob.decompose()?;
    let pairs: Vec<(usize, usize)> = (0..horizon.saturating_sub(1).min(20))
        .flat_map(|j| [(j, j + 1), (j, (j + 7).min(horizon - 1))])
        .filter(|(a, b)| a < b)
        .collect();
    let ortho = prob.orthogonality_defect(&dec, &pairs)?;
    let probe = prob.variance_sup_probe(variance_n)?;
    let (blocks, converged) = prob.martingale_series_cauchy(&dec);

    let mut recons = Vec::new();
    for &n in reconstruct_at {
        let (h_rec, tail) = prob.reconstruct_h(&dec, n, tail_k)?;
        let sup_error = system.planted(n as i64).map(|h| {
            let q = h.integrate(system.measure(n as i64).unwrap()).unwrap();
            let centered = h.sub(&system.one(n as i64).unwrap().scale(q)).unwrap();
            h_rec.sub(&centered).unwrap().ess_sup()
        });
        recons.push(ReconRow { n, sup_error, tail_estimate: tail });
    }
    let limexp = if system.planted(0).is_some() {
        prob.limexp_curve(&dec, limexp_n)?
    } else {
        Vec::new()
    };
    Ok(StepReport::DecomposeSeq(DecomposeStep {
        horizon,
        max_identity_residual: dec.identity_residuals.iter().cloned().fold(0.0, f64::max),
        max_martingale_residual: dec.martingale_residuals.iter().cloned().fold(0.0, f64::max),
        max_u_mean: dec.u_means.iter().map(|x| x.abs()).fold(0.0, f64::max),
        orthogonality_defect: ortho,
        variance_slope: probe.slope,
        variance_bounded: probe.bounded,
        variances: probe.variances,
        cauchy_blocks: blocks,
        series_converged: converged,
        reconstructions: recons,
        limexp,
    }))
}

fn gibbs_step(state: &GibbsState, check_depth: usize) -> Result<StepReport> {
    let (lo, hi) = state.window();
    let mid = (lo + hi) / 2;
    let mut mass_defects = Vec::new();
    for depth in 1..=check_depth {
        if let coblab_core::fiberspace::ReferenceMeasure::CylinderWeights { weights, .. } =
            state.measure(mid, depth)?
        {
            mass_defects.push((weights.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let sys = state.fiber_system(2.min(check_depth), None)?;
    let equivariance = sys.equivariance_defect(mid)?;
    Ok(StepReport::Gibbs(GibbsStep {
        eigen_residual: state.eigen_residual,
        boundary_gap: state.boundary_gap,
        positivity_window: state.lattice.positivity_window(),
        mass_defects,
        equivariance_defect: equivariance,
    }))
}

fn sinai_step(
    lattice: &Arc<SftLattice>,
    state: &GibbsState,
    holder: &SymbolicFieldHolder,
    tol: &Tolerances,
    points: usize,
    past_resamples: usize,
    seed: u64,
) -> Result<StepReport> {
    let _ = state;
    let field = holder.observable();
    let red = SinaiReduction::new(field.as_ref(), lattice.holder_beta(), tol.tail.max(1e-8));
    let pts = sample_points(lattice, 0, -60, 60, points, seed);
    let mut max_residual = 0.0f64;
    for x in &pts {
        max_residual = max_residual.max(red.residual(0, x));
    }
    // past invariance: resample the strictly negative coordinates
    let mut max_past = 0.0f64;
    if let Some(base) = pts.first() {
        let base_val = red.one_sided(0, &base.clip_past());
        let variants = sample_points(lattice, 0, -60, -1, past_resamples, seed.wrapping_add(1));
        for v in variants {
            // same future as the base point, resampled past
            let coords: Vec<u8> = (-60..=60)
                .map(|k| if k >= 0 { base.coord(k) as u8 } else { v.coord(k) as u8 })
                .collect();
            let Ok(hybrid) =
                coblab_core::symbolic::SymbolicPoint::new(lattice.clone(), 0, -60, coords)
            else {
                continue;
            };
            let combo = field.eval(0, &hybrid, red.eval_tol) - red.u(1, &hybrid.shift(1))
                + red.u(0, &hybrid);
            max_past = max_past.max((combo - base_val).abs());
        }
    }
    Ok(StepReport::SinaiReduce(SinaiStep {
        depth: red.depth,
        series_tail: red.series_tail,
        certified_bound: red.certified_residual_bound(),
        certified_exponent: red.certified_exponent(),
        max_residual,
        max_past_dependence: max_past,
        points: pts.len(),
        resamples: past_resamples,
    }))
}

fn triplet_step(
    system: &FiberSystem,
    tol: &Tolerances,
    thetas: &[(f64, f64)],
    depth: usize,
) -> Result<StepReport> {
    let left = depth as i64 + 8;
    let coc = interval_cocycle(system, tol, left, 2)?;
    let mut rows = Vec::new();
    for &(re, im) in thetas {
        let theta = Complex64::new(re, im);
        let trip = spectral::triplet(system, &coc, 0, theta, depth, 1e-6)?;
        rows.push(TripletRow {
            theta_re: re,
            theta_im: im,
            lambda_re: trip.lambda.re,
            lambda_im: trip.lambda.im,
            lambda_abs: trip.lambda.norm(),
            eigen_residual: trip.eigen_residual,
            adjoint_residual: trip.adjoint_residual,
            cauchy_gap: trip.cauchy_gap,
        });
    }
    Ok(StepReport::Triplet(TripletStep { rows }))
}

fn signature_step(
    system: &FiberSystem,
    tol: &Tolerances,
    t_grid: &[f64],
    n_max: usize,
    out_dir: &Path,
    scenario_name: &str,
) -> Result<StepReport> {
    let coc = interval_cocycle(system, tol, 48 + 8, 2)?;
    let curves = spectral::coboundary_signature(system, &coc, 0, t_grid, n_max, 48)?;
    let csv_name = format!("{scenario_name}_signature.csv");
    let mut all_rows = Vec::new();
    for c in &curves {
        for (i, &p) in c.products.iter().enumerate() {
            // reuse the (n, value, tail) convention; third column is the
            // frequency tag rather than a bound
            all_rows.push((i + 1, p, c.t));
        }
    }
    write_series_csv(&out_dir.join(&csv_name), all_rows)?;
    Ok(StepReport::Signature(SignatureStep {
        rows: curves
            .iter()
            .map(|c| SignatureRow {
                t: c.t,
                kappa: c.kappa,
                kappa_over_t2: c.kappa / (c.t * c.t).max(1e-300),
                min_product: c.min_product,
            })
            .collect(),
        curves_csv: csv_name,
    }))
}

fn counterexample_step(
    system: &FiberSystem,
    maps: &[BranchMap],
    horizon: i64,
    tol: &Tolerances,
    n_max: usize,
    out_dir: &Path,
    scenario_name: &str,
) -> Result<StepReport> {
    // the scenario contract: doubling map, F_j = 2^{−j}(x − 1/2) for j >= 0
    let map = &maps[(horizon) as usize];
    if map.as_linear() != Some((2, 0.0)) {
        bail!("the counterexample step expects the doubling map");
    }
    let f = |x: f64| x - 0.5;
    let grid = 4096usize;

    // (i) sup-norm of the partial sums Σ_{k<n} 2^{−k} f(T^k x)
    let mut sup_partial = 0.0f64;
    for i in 0..grid {
        let mut x = (i as f64 + 0.5) / grid as f64;
        let mut acc = 0.0;
        let mut w = 1.0;
        for _ in 0..n_max {
            acc += w * f(x);
            sup_partial = sup_partial.max(acc.abs());
            x = map.eval(x);
            w *= 0.5;
        }
    }

    // (ii) variation of the partial sums: var = ∫|Σ_{k<n} f'(T^k x)| dx with
    // f' ≡ 1, computed by quadrature of the derivative cocycle
    let checkpoints: Vec<usize> =
        vec![1, 2, 5, 10, 25, 50, 100, n_max.max(101)].into_iter().filter(|&n| n <= n_max).collect();
    let mut tv_over_n = Vec::new();
    for &n in &checkpoints {
        let mut acc = 0.0;
        for i in 0..grid {
            let mut x = (i as f64 + 0.5) / grid as f64;
            let mut d = 0.0f64;
            for _ in 0..n {
                d += 1.0; // f'(T^k x) = 1 for f(x) = x − 1/2
                x = map.eval(x);
            }
            acc += d.abs();
        }
        tv_over_n.push((n, acc / grid as f64 / n as f64));
    }
    let tv_slope = {
        // linear fit of var(n) = n·(tv/n) against n across checkpoints
        let pts: Vec<(f64, f64)> =
            tv_over_n.iter().map(|&(n, v)| (n as f64, v * n as f64)).collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };

    // (iii) variation of the truncated transfer maps H_j grows linearly in
    // the truncation depth: var = 2^{−j}(D+1) by the same derivative cocycle
    let mut h_growth = Vec::new();
    for depth in [10usize, 20, 40, 80] {
        let mut acc = 0.0;
        for i in 0..grid {
            let mut x = (i as f64 + 0.5) / grid as f64;
            let mut d = 0.0f64;
            for _ in 0..=depth {
                d += 1.0;
                x = map.eval(x);
            }
            acc += d.abs();
        }
        h_growth.push((depth, acc / grid as f64));
    }

    // decomposition diagnostics over the Ulam backend
    let seq_horizon = 40usize.min((horizon - 2) as usize);
    let prob = SequentialProblem::new(system, seq_horizon, tol.tail)?;
    let dec = prob.decompose()?;
    let max_m = dec.martingale_residuals.iter().cloned().fold(0.0, f64::max);
    let max_id = dec.identity_residuals.iter().cloned().fold(0.0, f64::max);

    // reconstruction against the direct series −Σ_{k>=j} 2^{−k} f∘T^{k−j}
    let mut recon_err = 0.0f64;
    for n in [2usize, 4, 6] {
        let (h_rec, _tail) = prob.reconstruct_h(&dec, n, 20)?;
        let h_rec = h_rec.as_ulam()?;
        let cells = h_rec.len();
        for i in (0..256).map(|i| i * cells / 256) {
            let x0 = (i as f64 + 0.5) / cells as f64;
            let mut x = x0;
            let mut truth = 0.0;
            let mut w = 0.5f64.powi(n as i32);
            for _ in 0..45 {
                truth -= w * f(x);
                x = map.eval(x);
                w *= 0.5;
            }
            recon_err = recon_err.max((h_rec.eval(x0).re - truth).abs());
        }
    }

    let csv_name = format!("{scenario_name}_variance.csv");
    write_series_csv(
        &out_dir.join(&csv_name),
        tv_over_n.iter().map(|&(n, v)| (n, v * n as f64, 0.0)),
    )?;

    Ok(StepReport::Counterexample(CounterexampleStep {
        sup_partial_sums: sup_partial,
        tv_over_n,
        tv_slope,
        h_variation_growth: h_growth.iter().map(|&(d, v)| (d, v)).collect(),
        max_martingale_residual: max_m,
        max_identity_residual: max_id,
        reconstruction_sup_error: recon_err,
        curves_csv: csv_name,
    }))
}

fn two_sided_step(
    lattice: &Arc<SftLattice>,
    holder: &SymbolicFieldHolder,
    pairs: usize,
    window: usize,
    seed: u64,
) -> Result<StepReport> {
    let h = holder
        .planted
        .as_ref()
        .ok_or_else(|| anyhow!("the two-sided step needs a planted transfer map"))?;
    let field = holder.observable();
    let radius = window as i64 + 24;
    let pts = sample_points(lattice, 0, -radius, radius, 2 * pairs, seed);
    let mut max_err = 0.0f64;
    let mut max_tail = 0.0f64;
    let mut used = 0usize;
    let mut holder_est = 0.0f64;
    for pair in pts.chunks(2) {
        if pair.len() < 2 || pair[0].coord(0) != pair[1].coord(0) {
            continue;
        }
        let (x, y) = (&pair[0], &pair[1]);
        let (est, tail) = coblab_core::symbolic::reconstruct::two_sided_difference(
            field.as_ref(),
            0,
            x,
            y,
            window,
            lattice.holder_beta(),
        )?;
        let truth = h.eval(0, x, 1e-13) - h.eval(0, y, 1e-13);
        max_err = max_err.max((est - truth).abs());
        max_tail = max_tail.max(tail);
        let d = x.distance(y, radius);
        if d > 0.0 {
            holder_est = holder_est.max(est.abs() / d.powf(lattice.holder_beta()));
        }
        used += 1;
    }
    // x = y must give exactly zero
    let x = &pts[0];
    let (zero, _) = coblab_core::symbolic::reconstruct::two_sided_difference(
        field.as_ref(),
        0,
        x,
        x,
        window,
        lattice.holder_beta(),
    )?;
    Ok(StepReport::TwoSided(TwoSidedStep {
        pairs: used,
        window,
        max_error: max_err,
        max_tail,
        holder_estimate: holder_est,
        exact_zero_on_equal_points: zero == 0.0,
    }))
}

fn verify_step(
    system: &FiberSystem,
    maps: &[BranchMap],
    duality_pairs: usize,
    decay_n: usize,
    seed: u64,
) -> Result<StepReport> {
    let (lo, _) = system.window();
    let m0 = system.measure(0)?;
    let corpus = cocycle::mean_zero_corpus(system, 0, duality_pairs.max(4), seed)?;
    let corpus_next = cocycle::mean_zero_corpus(system, 1, duality_pairs.max(4), seed + 1)?;
    let map = &maps[(-lo) as usize];

    // duality against pointwise quadrature of ∫ φ (ψ∘T) dm
    let mut duality = 0.0f64;
    let quad = 1 << 15;
    for (phi, psi) in corpus.iter().zip(corpus_next.iter()) {
        let lhs = system
            .op(0)?
            .apply(phi)?
            .mul(psi)?
            .integrate(system.measure(1)?)?;
        let mut rhs = Complex64::new(0.0, 0.0);
        for i in 0..quad {
            let x = (i as f64 + 0.5) / quad as f64;
            rhs += eval_interval(phi, x) * eval_interval(psi, map.eval(x));
        }
        rhs /= quad as f64;
        duality = duality.max((lhs - rhs).norm());
    }

    // mass conservation on a positive function
    let one = system.one(0)?;
    let test = one.add(&corpus[0].scale(Complex64::new(0.1, 0.0)))?;
    let mass_defect = (system.op(0)?.apply(&test)?.integrate(system.measure(1)?)?
        - test.integrate(m0)?)
    .norm();

    let equivariance = system.equivariance_defect(0)?;
    let adm = cocycle::admissibility_probe(system, 0, decay_n, 3, seed + 2)?;
    let coc = cocycle::density_cocycle(system, 0, 2, 40)?;
    Ok(StepReport::Verify(VerifyStep {
        duality_max_defect: duality,
        mass_conservation_defect: mass_defect,
        equivariance_defect: equivariance,
        op_bound: adm.op_bound,
        decay_c: adm.decay.c,
        decay_lambda: adm.decay.lambda,
        cone_minorant: adm.cone_minorant,
        density_residual: coc.max_residual(),
        density_lower_bound: coc.rho,
    }))
}

fn eval_interval(f: &FiberFunction, x: f64) -> Complex64 {
    match f {
        FiberFunction::Fourier(g) => g.eval(x),
        FiberFunction::Ulam(g) => g.eval(x),
        FiberFunction::Cylinder(_) => Complex64::new(f64::NAN, 0.0),
    }
}
