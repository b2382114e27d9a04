//! Quantum Fisher information toolkit for estimating a three-component
//! field with an ensemble of spin-1/2 particles.
//!
//! Everything noiseless lives in the (N+1)-dimensional Dicke basis of the
//! symmetric subspace, ordered from m = +J down to m = −J. The [`noise`]
//! module is the exception: it works on the full 2^N product space and is
//! therefore limited to small ensembles.

pub mod analysis;
pub mod encoding;
mod error;
pub mod fisher;
pub mod noise;
pub mod probes;
pub mod spinspace;
pub mod squeezing;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
