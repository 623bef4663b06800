//! Numerical and exact machinery for semisimple Frobenius manifolds and their
//! supersymmetric extension.
//!
//! The crate is `no_std` with `alloc`. Everything that touches files or
//! processes lives in the `frobenius-cli` crate.
//!
//! Module overview:
//! - [`gw_recursion`]: Gromov–Witten numbers of projective spaces from the
//!   associativity equations, and evaluation of the truncated potential.
//! - [`frobenius_geometry`]: pointwise engine (quantum product, idempotents,
//!   canonical coordinates, operators U and V, structure connections).
//! - [`schlesinger`]: Schlesinger systems, special initial data, integration,
//!   tau functions and reconstruction of Frobenius data.
//! - [`pr_bridge`]: closed forms for quantum cohomology of projective spaces
//!   and cross-validation against the numeric engine.
//! - [`grassmann`]: Grassmann algebra and jets in even directions.
//! - [`super_frobenius`]: Frobenius supermanifolds and super-Schlesinger systems.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod frobenius_geometry;
pub mod grassmann;
pub mod gw_recursion;
pub mod jet;
pub mod linalg;
pub mod numeric;
pub mod ode;
pub mod pr_bridge;
pub mod schlesinger;
pub mod super_frobenius;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
