//! Numerical laboratory for relativistic rotators: a worldline carrying a
//! single null direction, with Lagrangian `-m sqrt(1 - v.v) f(Q)`.
//!
//! The crate evaluates the velocity Hessian of every member of the family,
//! detects the two fundamental shapes for which it is singular, integrates
//! the regular members, and checks exact solutions by their residuals.
//!
//! ```
//! use rand::SeedableRng;
//! use rotator_core::dynamics::ELSystem;
//! use rotator_core::hessian::probe;
//! use rotator_core::model::StateSampler;
//! use rotator_core::ShapeFunction;
//!
//! let shape = ShapeFunction::from_tag("fundamental+", 1.0, 1.0)?;
//! let s = StateSampler::new(1.0, (1e-3, 0.9)).sample(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
//! let rep = probe(&ELSystem::free(shape), &s)?;
//! assert_eq!(rep.rank, 4);
//! # Ok::<(), rotator_core::Error>(())
//! ```

pub mod dual;
pub mod dynamics;
pub mod em;
pub mod error;
pub mod euler_lagrange;
pub mod free_solution;
pub mod hessian;
pub mod minkowski;
pub mod model;
pub mod ode;
pub mod profile;
pub mod shape;
pub mod toy;

pub use error::{Error, Result, SingularityKind};
pub use minkowski::FourVector;
pub use model::ChartState;
pub use shape::{Branch, ShapeFunction, ShapeKind};
