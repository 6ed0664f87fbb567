//! Points of one- and two-sided shift spaces: an explicit coordinate window
//! plus a canonical (lexicographically minimal) admissible extension on both
//! sides. The extension rule makes every point totally defined, so series
//! evaluations never run out of symbols.

use crate::symbolic::lattice::SftLattice;
use crate::{CoreError, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// A point of the shift space whose coordinate k lives at lattice time
/// `time + k`. Coordinates outside [lo, hi] follow the canonical extension.
#[derive(Debug, Clone)]
pub struct SymbolicPoint {
    pub lattice: Arc<SftLattice>,
    pub time: i64,
    lo: i64,
    coords: Vec<u8>,
}

impl SymbolicPoint {
    /// Builds a point from explicit coordinates for k = lo..lo+coords.len().
    pub fn new(lattice: Arc<SftLattice>, time: i64, lo: i64, coords: Vec<u8>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CoreError::InvalidParameter("point needs at least one coordinate".into()));
        }
        for (i, w) in coords.windows(2).enumerate() {
            let t = time + lo + i as i64;
            if !lattice.admissible(t, w[0] as usize, w[1] as usize) {
                return Err(CoreError::InvalidParameter(format!(
                    "inadmissible pair ({}, {}) at time {t}",
                    w[0], w[1]
                )));
            }
        }
        for (i, &c) in coords.iter().enumerate() {
            if c as usize >= lattice.alphabet(time + lo + i as i64) {
                return Err(CoreError::InvalidParameter("symbol outside alphabet".into()));
            }
        }
        Ok(SymbolicPoint { lattice, time, lo, coords })
    }

    /// One-sided point from the word `coords` at positions 0..len.
    pub fn one_sided(lattice: Arc<SftLattice>, time: i64, coords: Vec<u8>) -> Result<Self> {
        Self::new(lattice, time, 0, coords)
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.coords.len() as i64 - 1)
    }

    /// Coordinate at position k, following the canonical minimal extension
    /// outside the stored window.
    pub fn coord(&self, k: i64) -> usize {
        let (lo, hi) = self.window();
        if k >= lo && k <= hi {
            return self.coords[(k - lo) as usize] as usize;
        }
        if k > hi {
            let mut s = self.coords[self.coords.len() - 1] as usize;
            for j in hi..k {
                s = self.lattice.min_successor(self.time + j, s);
            }
            s
        } else {
            let mut s = self.coords[0] as usize;
            for j in (k..lo).rev() {
                s = self.lattice.min_predecessor(self.time + j + 1, s);
            }
            s
        }
    }

    fn coords_at(&self, k: i64) -> u8 {
        self.coord(k) as u8
    }

    /// Materializes the window [new_lo, new_hi] (canonical symbols become
    /// explicit); widens only.
    pub fn extended(&self, new_lo: i64, new_hi: i64) -> SymbolicPoint {
        let (lo, hi) = self.window();
        let new_lo = new_lo.min(lo);
        let new_hi = new_hi.max(hi);
        let coords = (new_lo..=new_hi).map(|k| self.coords_at(k)).collect();
        SymbolicPoint { lattice: self.lattice.clone(), time: self.time, lo: new_lo, coords }
    }

    /// The shifted point S^n x with (S^n x)_k = x_{k+n}, living at time+n.
    pub fn shift(&self, n: i64) -> SymbolicPoint {
        SymbolicPoint {
            lattice: self.lattice.clone(),
            time: self.time + n,
            lo: self.lo - n,
            coords: self.coords.clone(),
        }
    }

    /// The canonical-past representative: same coordinates for k >= 0, the
    /// canonical extension below. This is the section used by the one-sided
    /// reduction.
    pub fn clip_past(&self) -> SymbolicPoint {
        let (_, hi) = self.window();
        let hi = hi.max(0);
        let coords = (0..=hi).map(|k| self.coords_at(k)).collect();
        SymbolicPoint { lattice: self.lattice.clone(), time: self.time, lo: 0, coords }
    }

    /// First disagreement radius inf{|k| : x_k ≠ y_k}, searched up to
    /// `radius`; `None` when the points agree on the whole search window.
    pub fn agreement_radius(&self, other: &SymbolicPoint, radius: i64) -> Option<i64> {
        for k in 0..=radius {
            if self.coord(k) != other.coord(k) {
                return Some(k);
            }
            if k > 0 && self.coord(-k) != other.coord(-k) {
                return Some(k);
            }
        }
        None
    }

    /// Two-sided metric 2^{−inf{|k|: x_k≠y_k}}, evaluated to `radius`.
    pub fn distance(&self, other: &SymbolicPoint, radius: i64) -> f64 {
        match self.agreement_radius(other, radius) {
            Some(k) => (2f64).powi(-(k as i32)),
            None => (2f64).powi(-(radius as i32 + 1)),
        }
    }

    /// Word of coordinates [at, at+len).
    pub fn word(&self, at: i64, len: usize) -> Vec<u8> {
        (at..at + len as i64).map(|k| self.coords_at(k)).collect()
    }
}

/// The local-product (bracket) point: future of x, past of y. Defined when
/// the points share the coordinate at time zero.
pub fn bracket(x: &SymbolicPoint, y: &SymbolicPoint) -> Result<SymbolicPoint> {
    if !Arc::ptr_eq(&x.lattice, &y.lattice) || x.time != y.time {
        return Err(CoreError::DomainMismatch("bracket of points in different spaces".into()));
    }
    if x.coord(0) != y.coord(0) {
        return Err(CoreError::NotBracketable);
    }
    let (xlo, xhi) = x.window();
    let (ylo, yhi) = y.window();
    let lo = xlo.min(ylo);
    let hi = xhi.max(yhi);
    let coords = (lo..=hi)
        .map(|k| if k >= 0 { x.coords_at(k) } else { y.coords_at(k) })
        .collect();
    SymbolicPoint::new(x.lattice.clone(), x.time, lo, coords)
}

/// Draws a random admissible two-sided point on the window [lo, hi] at the
/// given time, choosing uniformly among admissible continuations.
pub fn random_point(
    lattice: &Arc<SftLattice>,
    time: i64,
    lo: i64,
    hi: i64,
    rng: &mut ChaCha8Rng,
) -> SymbolicPoint {
    let mut unit = |n: usize| (rng.next_u64() % n as u64) as usize;
    let d0 = lattice.alphabet(time + lo);
    let mut coords = vec![unit(d0) as u8];
    for j in lo..hi {
        let t = time + j;
        let m = lattice.matrix(t);
        let last = *coords.last().unwrap() as usize;
        let options: Vec<usize> =
            (0..m.ncols()).filter(|&b| m[(last, b)] == 1).collect();
        coords.push(options[unit(options.len())] as u8);
    }
    SymbolicPoint { lattice: lattice.clone(), time, lo, coords }
}

/// Seeded sampler for batches of points.
pub fn sample_points(
    lattice: &Arc<SftLattice>,
    time: i64,
    lo: i64,
    hi: i64,
    count: usize,
    seed: u64,
) -> Vec<SymbolicPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_point(lattice, time, lo, hi, &mut rng)).collect()
}
