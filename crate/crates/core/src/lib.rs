//! Numerical laboratory for transfer-operator methods on non-autonomous
//! dynamics: equivariant density cocycles, twisted-operator triplets,
//! martingale–coboundary decompositions, and solvers for cohomological
//! equations `F = H∘τ − H` over random and sequential expanding maps and
//! subshifts of finite type.
//!
//! The crate is organised around the fiber picture: a driving base system
//! selects, at every time step, an expanding map (or shift) acting between
//! fiber spaces, and all statistics are carried by the associated transfer
//! operators.

pub mod cocycle;
pub mod driving;
pub mod error;
pub mod fiberspace;
pub mod livsic;
pub mod sequential;
pub mod spectral;
pub mod symbolic;
pub mod system;
pub mod transfer;

mod grid;

pub use error::CoreError;
pub use fiberspace::{FiberFunction, ReferenceMeasure};
pub use transfer::{BranchMap, TransferOperator};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
