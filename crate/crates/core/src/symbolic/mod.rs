//! Subshifts of finite type: lattices, symbolic points, Gibbs measures for
//! short-range potentials, the Sinai reduction of two-sided observables, the
//! bracket, and the two-sided difference reconstructor.

pub mod gibbs;
pub mod lattice;
pub mod observable;
pub mod points;
pub mod reconstruct;
pub mod sinai;
pub mod solve;

pub use gibbs::{gibbs, GibbsState};
pub use lattice::{SftLattice, WordTable};
pub use observable::TwoSidedObservable;
pub use points::{bracket, SymbolicPoint};
pub use sinai::SinaiReduction;
