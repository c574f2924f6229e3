//! Numerical toolkit for power partial isometries on finite-dimensional spaces
//! and on truncated vector-valued Hardy spaces.
//!
//! - [`numkit`]: complex linear algebra and subspace arithmetic.
//! - [`pisom`]: partial-isometry tests and the Halmos–Wallen decomposition.
//! - [`hardy`]: Laurent-polynomial symbols, Toeplitz and Hankel matrices, model spaces.
//! - [`lattice`]: commutants, invariance predicates and chain lattices of shift sums.
//! - [`beurling`]: inner-function factorizations and hyperinvariant candidates.
//! - [`random`]: seeded generators for test data.
//! - [`selftest`]: seeded end-to-end checks, shared by the acceptance suite and the CLI.

pub mod beurling;
pub mod error;
pub mod hardy;
pub mod lattice;
pub mod numkit;
pub mod pisom;
pub mod random;
pub mod selftest;

pub use error::{Error, Result};
