//! Lattice abelian gauge fields with heat-kernel (Villain-type) weights on
//! cubical complexes.
//!
//! The crate is organized around a chain of small pieces:
//!
//! - [`complex`]: boxes in Z^d, oriented cells, coboundary/restriction/
//!   subdivision matrices, and exact integer lattice computations (HNF,
//!   kernels, saturation).
//! - [`torus`]: tori presented by Gram matrices, heat-kernel Fourier data,
//!   certified series evaluation, and wrapped-Gaussian sampling.
//! - [`gauge`]: the gauge-field state space of a complex — the image torus of
//!   the edge-to-plaquette map — with exact and Monte Carlo Wilson
//!   expectations.
//! - [`renorm`]: renormalized inner products along a chain of complexes and
//!   the co-isometry identity that makes the heat measures projectively
//!   consistent.
//! - [`multiplier`]: translation-invariant symbol calculus on Z^d — the
//!   transverse projector for 2-forms and its lattice Fourier sums.
//! - [`correlation`]: two-point functions of plaquette observables in the
//!   infinite-volume gauge ensemble and their power-law decay.

pub mod complex;
pub mod correlation;
pub mod error;
pub mod gauge;
pub mod linalg;
pub mod multiplier;
pub mod renorm;
pub mod torus;

pub use complex::intmat::{Hnf, IntMat};
pub use complex::{Cell, CellBasis, LatticeBox};
pub use error::{Error, Result};
pub use torus::{MeasureFt, TorusGroup};
