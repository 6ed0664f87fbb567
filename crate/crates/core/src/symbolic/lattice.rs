//! Time-indexed subshift-of-finite-type lattices and admissible-word tables.
//!
//! A lattice fixes, for every time step in a window, an alphabet and the 0–1
//! adjacency matrix connecting it to the next one. Matrices and alphabets are
//! clamped to the window edges, so stationary shifts extend naturally and
//! inhomogeneous scenarios simply build wide enough windows.

use crate::{CoreError, Result};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Sequential/random SFT data over a window of time steps.
#[derive(Debug)]
pub struct SftLattice {
    lo: i64,
    hi: i64,
    alphabets: Vec<usize>,
    /// matrices[i] connects time lo+i to lo+i+1; dims d_t × d_{t+1}.
    matrices: Vec<Array2<u8>>,
    positivity_window: usize,
    holder_beta: f64,
    tables: Mutex<BTreeMap<(i64, usize), Arc<WordTable>>>,
}

impl SftLattice {
    /// Builds a stationary lattice: one alphabet, one matrix, all times.
    pub fn stationary(matrix: Array2<u8>, window: i64, beta: f64) -> Result<Arc<Self>> {
        let d = matrix.nrows();
        if matrix.ncols() != d {
            return Err(CoreError::InvalidParameter("stationary matrix must be square".into()));
        }
        let n = (2 * window) as usize;
        Self::new(-window, vec![d; n + 1], vec![matrix; n], beta)
    }

    /// Builds an inhomogeneous lattice from explicit per-time data.
    pub fn new(
        lo: i64,
        alphabets: Vec<usize>,
        matrices: Vec<Array2<u8>>,
        holder_beta: f64,
    ) -> Result<Arc<Self>> {
        if alphabets.is_empty() || matrices.len() + 1 != alphabets.len() {
            return Err(CoreError::InvalidParameter(
                "need one alphabet per time and one matrix per step".into(),
            ));
        }
        if holder_beta <= 0.0 {
            return Err(CoreError::InvalidParameter("Hölder exponent must be positive".into()));
        }
        for (i, m) in matrices.iter().enumerate() {
            if m.nrows() != alphabets[i] || m.ncols() != alphabets[i + 1] {
                return Err(CoreError::InvalidParameter(format!(
                    "matrix {i} has shape {:?}, expected {}x{}",
                    m.dim(),
                    alphabets[i],
                    alphabets[i + 1]
                )));
            }
            for (r, row) in m.outer_iter().enumerate() {
                if row.iter().all(|&e| e == 0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "matrix {i} row {r} has no admissible successor"
                    )));
                }
            }
            for c in 0..m.ncols() {
                if (0..m.nrows()).all(|r| m[(r, c)] == 0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "matrix {i} column {c} has no admissible predecessor"
                    )));
                }
            }
        }
        let hi = lo + matrices.len() as i64;
        let mut lattice = SftLattice {
            lo,
            hi,
            alphabets,
            matrices,
            positivity_window: 0,
            holder_beta,
            tables: Mutex::new(BTreeMap::new()),
        };
        lattice.positivity_window = lattice.find_positivity_window()?;
        Ok(Arc::new(lattice))
    }

    /// Smallest M such that every product of M consecutive matrices in the
    /// window is strictly positive.
    fn find_positivity_window(&self) -> Result<usize> {
        let steps = self.matrices.len();
        'outer: for m in 1..=steps.max(1).min(64) {
            for start in 0..steps.saturating_sub(m - 1) {
                let mut prod = self.matrices[start].mapv(|e| e as u64);
                for k in 1..m {
                    let next = self.matrices[start + k].mapv(|e| e as u64);
                    prod = prod.dot(&next);
                    // saturate to keep entries small
                    prod.mapv_inplace(|e| e.min(1_000_000));
                }
                if prod.iter().any(|&e| e == 0) {
                    continue 'outer;
                }
            }
            return Ok(m);
        }
        Err(CoreError::NotPrimitive(
            "no positivity window M <= 64 makes all M-step products positive".into(),
        ))
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn positivity_window(&self) -> usize {
        self.positivity_window
    }

    pub fn holder_beta(&self) -> f64 {
        self.holder_beta
    }

    fn clamp_time(&self, t: i64) -> usize {
        (t.clamp(self.lo, self.hi) - self.lo) as usize
    }

    pub fn alphabet(&self, t: i64) -> usize {
        self.alphabets[self.clamp_time(t)]
    }

    /// Adjacency matrix from time t to t+1, clamped at the window edges.
    pub fn matrix(&self, t: i64) -> &Array2<u8> {
        let i = (t.clamp(self.lo, self.hi - 1) - self.lo) as usize;
        &self.matrices[i]
    }

    pub fn admissible(&self, t: i64, a: usize, b: usize) -> bool {
        self.matrix(t)[(a, b)] == 1
    }

    /// Lexicographically minimal admissible successor of `a` at time t.
    pub fn min_successor(&self, t: i64, a: usize) -> usize {
        let m = self.matrix(t);
        (0..m.ncols()).find(|&b| m[(a, b)] == 1).expect("row has a successor")
    }

    /// Lexicographically minimal admissible predecessor of `b` at time t-1,
    /// i.e. the smallest a with A^{(t-1)}(a, b) = 1.
    pub fn min_predecessor(&self, t: i64, b: usize) -> usize {
        let m = self.matrix(t - 1);
        (0..m.nrows()).find(|&a| m[(a, b)] == 1).expect("column has a predecessor")
    }

    /// Cached word table for (time, depth).
    pub fn table(self: &Arc<Self>, time: i64, depth: usize) -> Result<Arc<WordTable>> {
        if let Some(t) = self.tables.lock().unwrap().get(&(time, depth)) {
            return Ok(t.clone());
        }
        let built = WordTable::build(self.clone(), time, depth)?;
        self.tables.lock().unwrap().insert((time, depth), built.clone());
        Ok(built)
    }
}

/// Enumeration of the admissible words of a given depth starting at a given
/// time, in lexicographic order. Shared by cylinder functions and measures.
#[derive(Debug)]
pub struct WordTable {
    pub lattice: Arc<SftLattice>,
    pub time: i64,
    pub depth: usize,
    words: Vec<Vec<u8>>,
}

impl WordTable {
    pub fn build(lattice: Arc<SftLattice>, time: i64, depth: usize) -> Result<Arc<Self>> {
        if depth == 0 {
            return Err(CoreError::InvalidParameter("word depth must be >= 1".into()));
        }
        let mut words = Vec::new();
        let mut stack: Vec<Vec<u8>> =
            (0..lattice.alphabet(time)).rev().map(|a| vec![a as u8]).collect();
        while let Some(w) = stack.pop() {
            if w.len() == depth {
                words.push(w);
                continue;
            }
            let t = time + w.len() as i64 - 1;
            let last = *w.last().unwrap() as usize;
            let m = lattice.matrix(t);
            for b in (0..m.ncols()).rev() {
                if m[(last, b)] == 1 {
                    let mut next = w.clone();
                    next.push(b as u8);
                    stack.push(next);
                }
            }
        }
        Ok(Arc::new(WordTable { lattice, time, depth, words }))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        &self.words[i]
    }

    pub fn words(&self) -> impl Iterator<Item = &[u8]> {
        self.words.iter().map(|w| w.as_slice())
    }

    /// Index of an admissible word (words are stored in lex order).
    pub fn index_of(&self, w: &[u8]) -> Option<usize> {
        self.words.binary_search_by(|probe| probe.as_slice().cmp(w)).ok()
    }

    /// Maximal spread max−min of `values` within every class of words sharing
    /// a prefix of length k, for k = 0..depth; used for the Hölder seminorm.
    /// Words in a class are contiguous because the table is lex-sorted.
    pub fn prefix_spreads(&self, values: &[f64]) -> Vec<f64> {
        let mut spreads = vec![0.0f64; self.depth];
        for k in 0..self.depth {
            let mut i = 0;
            while i < self.words.len() {
                let mut j = i + 1;
                let prefix = &self.words[i][..k];
                let mut lo = values[i];
                let mut hi = values[i];
                while j < self.words.len() && &self.words[j][..k] == prefix {
                    lo = lo.min(values[j]);
                    hi = hi.max(values[j]);
                    j += 1;
                }
                spreads[k] = spreads[k].max(hi - lo);
                i = j;
            }
        }
        spreads
    }
}
