//! Training-free semantic rasterization of annotated driving scenes.
//!
//! The crate reconstructs camera views from map polylines, actor cuboids and
//! traffic lights, builds recovery-perturbed and cross-agent augmented
//! datasets, and carries a small hand-differentiated raster-to-real feature
//! alignment demo.

pub mod align;
pub mod augment;
pub mod clip;
pub mod error;
pub mod geometry;
pub mod io;
pub mod raster;
pub mod scene;

pub use error::{Error, Result};
