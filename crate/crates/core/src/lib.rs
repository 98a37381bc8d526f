//! Census of Lamé equations with finite cyclic monodromy.
//!
//! Three independent routes are reconciled:
//!
//! - [`census`]: the closed-form counting formulas and their divisor-sum identities;
//! - [`torus`]: a combinatorial oracle enumerating spherical tori with one conical
//!   singularity and counting relabelling orbits (Burnside);
//! - [`weier`] and [`solver`]: double-precision Weierstrass/Hecke analytics and Newton
//!   solves of the unitary-monodromy conditions for `n = 1, 2`.
//!
//! [`dessin`] builds the dessins d'enfants attached to rational configurations, and
//! [`cli`] is the batch front-end.

pub mod arith;
pub mod census;
pub mod cli;
pub mod dessin;
pub mod solver;
pub mod torus;
pub mod weier;

pub use arith::Rational;
pub use torus::Mode;
