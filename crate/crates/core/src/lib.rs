//! Exact simulation of a cluster of two-level atoms, one of them incoherently
//! pumped, coupled through the free-space electromagnetic vacuum.
//!
//! The pipeline is
//!
//! 1. [`coupling`]: pairwise collective shifts and rates from the dyadic
//!    Green function,
//! 2. [`hilbert`]: the Liouvillian superoperator on the `4^N` dimensional
//!    space of density matrices, split into coherence sectors,
//! 3. [`steady`]: the stationary state,
//! 4. [`spectrum`]: the emission spectrum as an exact sum of Lorentzians
//!    obtained from the quantum regression theorem,
//! 5. [`analysis`]: line width, photon number, pump sweeps and the
//!    saturation point.
//!
//! All rates and frequencies are expressed in units of the single-atom decay
//! rate `Γ_ca`; lengths are expressed in units of `c/ω_ca`. Frequencies are
//! detunings from the atomic transition.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coupling;
mod error;
pub mod hilbert;
pub mod linalg;
pub mod sparse;
pub mod spectrum;
pub mod steady;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Cartesian 3-vector.
pub type Vec3 = [f64; 3];
