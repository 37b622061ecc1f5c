//! Laplace–Beltrami spectra of spheres with many small antipodal handles.
//!
//! A sphere with handles is represented as a relaxed manifold: the sphere
//! with small caps removed, a piecewise metric on the collars, the antipodal
//! involution and a coupling measure that glues each hole boundary to its
//! mirror. The crate builds these objects, discretizes them with P1 finite
//! elements and compares their spectra with the closed-form limit spectrum,
//! whose odd sector is shifted by the coupling constant.

pub mod capacity;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harmonics;
pub mod harness;
pub mod limit;
pub mod mesh;
pub mod packing;
pub mod relaxed;
pub mod sparse;

pub use error::{Error, Result};
