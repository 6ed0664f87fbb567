//! Internal uniform-grid and FFT helpers shared by the interval backends.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Smallest power of two that is >= `n`.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Evaluates a trigonometric polynomial with modes `c[-k..k]` (stored with
/// offset `k`) on the uniform grid `x_i = i/len`, via a zero-padded inverse
/// FFT. Exact for `len >= 2k + 1`.
pub fn eval_modes_on_grid(modes: &[Complex64], len: usize) -> Vec<Complex64> {
    let cutoff = (modes.len() - 1) / 2;
    assert!(len >= 2 * cutoff + 1, "grid too coarse for mode count");
    let mut bins = vec![Complex64::new(0.0, 0.0); len];
    for (i, &c) in modes.iter().enumerate() {
        let freq = i as i64 - cutoff as i64;
        let bin = freq.rem_euclid(len as i64) as usize;
        bins[bin] = c;
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut bins);
    bins
}

/// Recovers modes `[-cutoff..cutoff]` from samples on the uniform grid
/// `x_i = i/len`. Exact for trigonometric polynomials of degree < len/2.
pub fn modes_from_grid(samples: &[Complex64], cutoff: usize) -> Vec<Complex64> {
    let len = samples.len();
    assert!(2 * cutoff + 1 <= len);
    let mut bins = samples.to_vec();
    FftPlanner::new().plan_fft_forward(len).process(&mut bins);
    let scale = 1.0 / len as f64;
    (0..2 * cutoff + 1)
        .map(|i| {
            let freq = i as i64 - cutoff as i64;
            bins[freq.rem_euclid(len as i64) as usize] * scale
        })
        .collect()
}

/// 32-point Gauss–Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre_32() -> (Vec<f64>, Vec<f64>) {
    let n = 32usize;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fractional part mapped into [0, 1).
pub fn frac(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
