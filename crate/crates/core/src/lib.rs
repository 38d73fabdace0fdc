//! Approximate controllability of impulsive linear evolution systems.
//!
//! The state obeys `x' = Ax + Bu` between impulse times and jumps by
//! `Δx(t_k) = C_k x(t_k) + D_k v_k` at `t_1 < ... < t_p` inside `(0, b)`.
//! Everything is realized on a finite-dimensional truncation with the
//! Euclidean inner product, so adjoints are transposes.
//!
//! Modules, bottom-up:
//!
//! - [`system`]: problem data, semigroup providers and jump propagators.
//! - [`quadrature`]: composite Gauss-Legendre rules shared by every integral.
//! - [`control`]: control pairs `(u(·), {v_k})` and their inner product.
//! - [`propagation`]: forward mild solutions, adjoint solutions, duality gap.
//! - [`gramian`]: the four controllability Gramians and the `M`/`M*` actions.
//! - [`controllability`]: positivity, resolvent and rank tests.
//! - [`synthesis`]: regularized minimum-energy steering.
//! - [`wave`]: the truncated impulsive wave equation.
//! - [`io`]: JSON file formats shared by the command-line front end.

pub mod control;
pub mod controllability;
mod error;
pub mod fixtures;
pub mod gramian;
pub mod io;
pub mod linalg;
pub mod propagation;
pub mod quadrature;
pub mod synthesis;
pub mod system;
pub mod wave;

pub use error::{Error, Result};

/// Column vector type used for states, targets and adjoint states.
pub type StateVector = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
