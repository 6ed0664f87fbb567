//! Bundled scenarios. Each preset is constructed as a typed `Scenario` (so it
//! is schema-valid by construction) and serialized on demand.

use crate::spec::*;
use coblab_core::driving::BaseSystem;

fn cos1() -> TrigFn {
    TrigFn { constant: 0.0, terms: vec![TrigTerm { freq: 1, cos: 1.0, sin: 0.0 }] }
}

fn sin1() -> TrigFn {
    TrigFn { constant: 0.0, terms: vec![TrigTerm { freq: 1, cos: 0.0, sin: 1.0 }] }
}

fn deterministic(period: usize) -> BaseSystem {
    BaseSystem::FiniteCycle { period }
}

fn fourier(cutoff: usize) -> BackendSpec {
    BackendSpec::Fourier { cutoff }
}

fn doubling() -> Assign<MapSpec> {
    Assign::Uniform { value: MapSpec::Linear { slope: 2, offset: 0.0 } }
}

fn two_slopes() -> Assign<MapSpec> {
    Assign::BySymbol {
        values: vec![
            MapSpec::Linear { slope: 2, offset: 0.0 },
            MapSpec::Linear { slope: 3, offset: 0.0 },
        ],
    }
}

fn ones2() -> Vec<Vec<u8>> {
    vec![vec![1, 1], vec![1, 1]]
}

pub fn preset(name: &str) -> Option<Scenario> {
    let s = match name {
        "doubling_coboundary" => Scenario {
            name: name.into(),
            seed: 7,
            expect: Some(Expectation::Coboundary),
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 120,
                backend: fourier(64),
                maps: doubling(),
                observable: IntervalObservable::Planted { h: Assign::Uniform { value: cos1() } },
            },
            pipeline: vec![
                Step::Solve { sample_span: 2, sigma_n: 24 },
                Step::Detect { t_grid: vec![0.0, 1.0], use_planted: false },
                Step::Verify { duality_pairs: 50, decay_n: 6 },
            ],
            tolerances: Tolerances::default(),
        },
        "doubling_noncoboundary" => Scenario {
            name: name.into(),
            seed: 7,
            expect: Some(Expectation::NotACoboundary),
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 170,
                backend: fourier(64),
                maps: doubling(),
                observable: IntervalObservable::Explicit { f: Assign::Uniform { value: cos1() } },
            },
            pipeline: vec![
                Step::Solve { sample_span: 2, sigma_n: 24 },
                Step::Signature { t_grid: vec![0.05, 0.1, 0.2], n_max: 100 },
            ],
            tolerances: Tolerances::default(),
        },
        "two_fiber_random" => Scenario {
            name: name.into(),
            seed: 42,
            expect: Some(Expectation::Coboundary),
            system: SystemSpec::Interval {
                base: BaseSystem::IidSymbols { alphabet: 2, seed: 42 },
                horizon: 130,
                backend: fourier(64),
                maps: two_slopes(),
                observable: IntervalObservable::Planted {
                    h: Assign::BySymbol { values: vec![cos1(), sin1()] },
                },
            },
            pipeline: vec![
                Step::Solve { sample_span: 16, sigma_n: 24 },
                Step::Verify { duality_pairs: 50, decay_n: 6 },
            ],
            tolerances: Tolerances::default(),
        },
        "ulam_doubling_coboundary" => Scenario {
            name: name.into(),
            seed: 7,
            expect: Some(Expectation::Coboundary),
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 40,
                backend: BackendSpec::Ulam { cells: 2048 },
                maps: doubling(),
                observable: IntervalObservable::Planted { h: Assign::Uniform { value: cos1() } },
            },
            pipeline: vec![Step::Solve { sample_span: 1, sigma_n: 10 }],
            tolerances: Tolerances { tail: 1e-9, series_cap: 16, density_depth: 8 },
        },
        "markov_saw_density" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 64,
                backend: BackendSpec::Ulam { cells: 1024 },
                maps: Assign::Uniform { value: MapSpec::MarkovSaw },
                observable: IntervalObservable::None,
            },
            pipeline: vec![Step::Verify { duality_pairs: 12, decay_n: 6 }],
            tolerances: Tolerances { tail: 1e-8, series_cap: 24, density_depth: 40 },
        },
        "sequential_planted" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Interval {
                base: deterministic(2),
                horizon: 100,
                backend: fourier(64),
                maps: two_slopes(),
                observable: IntervalObservable::Planted {
                    h: Assign::BySymbol {
                        values: vec![
                            cos1(),
                            TrigFn {
                                constant: 0.0,
                                terms: vec![
                                    TrigTerm { freq: 1, cos: 0.4, sin: 0.0 },
                                    TrigTerm { freq: 2, cos: 0.0, sin: 0.6 },
                                ],
                            },
                        ],
                    },
                },
            },
            pipeline: vec![Step::DecomposeSeq {
                horizon: 64,
                reconstruct_at: vec![6, 12, 20],
                tail_k: 12,
                limexp_n: 30,
                variance_n: 60,
            }],
            tolerances: Tolerances::default(),
        },
        "remark36_counterexample" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 64,
                backend: BackendSpec::Ulam { cells: 2048 },
                maps: doubling(),
                observable: IntervalObservable::GeometricSawtooth { decay: 0.5 },
            },
            pipeline: vec![Step::Counterexample { n_max: 200 }],
            tolerances: Tolerances { tail: 1e-9, series_cap: 24, density_depth: 8 },
        },
        "sft_gibbs_bernoulli" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Sft {
                base: deterministic(1),
                horizon: 140,
                window: (-20, 20),
                margin: 64,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::Uniform { value: vec![vec![0.0, 0.0], vec![0.0, 0.0]] },
                beta: 1.0,
                depth: 8,
                observable: SymbolicObservable::Coordinate { center: 0.5 },
            },
            pipeline: vec![Step::Gibbs { check_depth: 8 }],
            tolerances: Tolerances::default(),
        },
        "sft_gibbs_markov" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Sft {
                base: deterministic(1),
                horizon: 180,
                window: (-20, 20),
                margin: 96,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::Uniform {
                    value: vec![
                        vec![(0.7f64).ln(), (0.3f64).ln()],
                        vec![(0.4f64).ln(), (0.6f64).ln()],
                    ],
                },
                beta: 1.0,
                depth: 8,
                observable: SymbolicObservable::Coordinate { center: 3.0 / 7.0 },
            },
            pipeline: vec![Step::Gibbs { check_depth: 8 }],
            tolerances: Tolerances::default(),
        },
        "sft_sinai_geometric" => Scenario {
            name: name.into(),
            seed: 11,
            expect: None,
            system: SystemSpec::Sft {
                base: deterministic(1),
                horizon: 220,
                window: (-30, 30),
                margin: 48,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::Uniform { value: vec![vec![0.0, 0.0], vec![0.0, 0.0]] },
                beta: 1.0,
                depth: 8,
                observable: SymbolicObservable::GeometricUnit { g: vec![0.0, 1.0], ratio: 0.5 },
            },
            pipeline: vec![Step::SinaiReduce { points: 1000, past_resamples: 100 }],
            tolerances: Tolerances { tail: 1e-6, series_cap: 48, density_depth: 16 },
        },
        "sft_two_sided_planted" => Scenario {
            name: name.into(),
            seed: 13,
            expect: None,
            system: SystemSpec::Sft {
                base: deterministic(1),
                horizon: 260,
                window: (-30, 30),
                margin: 48,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::Uniform { value: vec![vec![0.0, 0.0], vec![0.0, 0.0]] },
                beta: 1.0,
                depth: 8,
                observable: SymbolicObservable::PlantedGeometric { g: vec![0.0, 1.0], ratio: 0.5 },
            },
            pipeline: vec![Step::TwoSided { pairs: 1000, window: 40 }],
            tolerances: Tolerances::default(),
        },
        "sft_random_planted_solve" => Scenario {
            name: name.into(),
            seed: 2024,
            expect: Some(Expectation::Coboundary),
            system: SystemSpec::Sft {
                base: BaseSystem::IidSymbols { alphabet: 2, seed: 2024 },
                horizon: 220,
                window: (-60, 60),
                margin: 48,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::BySymbol {
                    values: vec![
                        vec![vec![0.2, -0.1], vec![0.0, 0.25]],
                        vec![vec![-0.3, 0.1], vec![0.15, 0.0]],
                    ],
                },
                beta: 1.0,
                depth: 9,
                observable: SymbolicObservable::PlantedFiniteRange {
                    radius: 2,
                    weights: vec![-0.2, 0.0, 0.8, 0.0, 0.1],
                    quads: vec![(-1, 1, 0.3)],
                },
            },
            pipeline: vec![Step::Solve { sample_span: 1, sigma_n: 24 }],
            tolerances: Tolerances { tail: 1e-9, series_cap: 40, density_depth: 16 },
        },
        "sft_coordinate_noncoboundary" => Scenario {
            name: name.into(),
            seed: 5,
            expect: Some(Expectation::NotACoboundary),
            system: SystemSpec::Sft {
                base: deterministic(1),
                horizon: 200,
                window: (-60, 60),
                margin: 64,
                matrices: Assign::Uniform { value: ones2() },
                potentials: Assign::Uniform {
                    value: vec![
                        vec![(0.7f64).ln(), (0.3f64).ln()],
                        vec![(0.4f64).ln(), (0.6f64).ln()],
                    ],
                },
                beta: 1.0,
                depth: 6,
                observable: SymbolicObservable::Coordinate { center: 3.0 / 7.0 },
            },
            pipeline: vec![Step::Solve { sample_span: 1, sigma_n: 24 }],
            tolerances: Tolerances { tail: 1e-9, series_cap: 40, density_depth: 16 },
        },
        "spectral_triplet_probe" => Scenario {
            name: name.into(),
            seed: 7,
            expect: None,
            system: SystemSpec::Interval {
                base: deterministic(1),
                horizon: 170,
                backend: fourier(24),
                maps: doubling(),
                observable: IntervalObservable::Explicit { f: Assign::Uniform { value: cos1() } },
            },
            pipeline: vec![Step::Triplet {
                thetas: vec![(0.0, 0.0), (0.0, 0.1), (0.0, 0.2), (0.001, 0.0), (-0.001, 0.0)],
                depth: 48,
            }],
            tolerances: Tolerances::default(),
        },
        _ => return None,
    };
    Some(s)
}

pub const PRESET_NAMES: &[&str] = &[
    "doubling_coboundary",
    "doubling_noncoboundary",
    "two_fiber_random",
    "ulam_doubling_coboundary",
    "markov_saw_density",
    "sequential_planted",
    "remark36_counterexample",
    "sft_gibbs_bernoulli",
    "sft_gibbs_markov",
    "sft_sinai_geometric",
    "sft_two_sided_planted",
    "sft_random_planted_solve",
    "sft_coordinate_noncoboundary",
    "spectral_triplet_probe",
];
