//! Sparse-data image reconstruction by harmonic inpainting.
//!
//! The Laplace equation is discretised with linear finite elements on a
//! Delaunay triangulation whose vertices are the stored mask pixels plus a
//! set of free ("unknown") vertices. On top of the solver the crate provides
//!
//! * [`spatial`]: coarse-to-fine densification that grows a mask guided by
//!   per-triangle inpainting error,
//! * [`tonal`]: least-squares optimisation of the stored values, solved
//!   matrix-free with nested conjugate gradients (plus an IRLS L1 variant),
//! * [`codec`]: a compact binary payload from which the decoder rebuilds the
//!   identical mesh and reconstruction.

pub mod codec;
pub mod error;
pub mod femsolve;
pub mod image;
pub mod mesh;
pub mod spatial;
pub mod tonal;

pub use error::{Error, Result};
pub use image::{ErrorMap, Image};
