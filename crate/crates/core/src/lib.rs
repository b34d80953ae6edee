//! Theta-function numerics for invariant Kähler metrics on principally
//! polarized Abelian varieties: exact Monge–Ampère geodesics by Legendre
//! duality, their Bergman approximations from level-k theta bases, and the
//! Poisson-integral harmonic maps built the same way.

// NaN-rejecting `!(x <= tol)` checks and index loops over small matrices are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bergman;
pub mod error;
pub mod fit;
pub mod harmonic;
pub mod lattice;
pub mod legendre;
pub mod norming;
pub mod potential;

mod numeric;

pub use nalgebra;
pub use num_complex;

pub use error::{Error, Result};
pub use lattice::{Lattice, ThetaIndex, TruncationPolicy};
pub use potential::{ConvexPotential, FourierTerm, KahlerPotential, PotentialPath, TrigPolynomial};
