//! Collective emission of dipole-coupled two-level atoms.
//!
//! The crate evaluates cutoff-regularized dipole-dipole coefficients, builds
//! the corresponding Lindblad generator on the `2^N`-dimensional atomic
//! space, integrates it, and unravels it into photon-counting trajectories.
//!
//! Conventions used throughout:
//!
//! * lengths are stored as `k0 * r` (dimensionless), rates in units of the
//!   single-atom decay rate unless a different `gamma` is supplied, `hbar = 1`;
//! * basis index bits run from atom 0 (most significant) to atom `N-1`, and a
//!   set bit means the atom is excited, so the ket `|001>` is index 1 and
//!   has atom 2 (zero based) excited;
//! * dynamics are written in the frame rotating at the bare transition
//!   frequency, and the single-atom Lamb shift is absorbed into it.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod coupling;
pub mod ddouble;
pub mod error;
pub mod geometry;
pub mod master;
pub mod operators;
pub mod trajectories;
pub mod validation;

mod expm;
mod series;

pub use error::{Error, Result};

/// Complex scalar used for all state and operator entries.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
