//! Joint camera-pose and hash-encoded neural field optimization.
//!
//! The crate is organised bottom-up: [`diff`] holds the differentiation and
//! optimizer primitives, [`hashgrid`] and [`field`] the learnable scene
//! representation, [`geom`] cameras and warps, [`render`] volume rendering,
//! [`metrics`] evaluation, and [`train`] the optimization loops.

pub mod c2f;
pub mod diff;
mod error;
pub mod field;
pub mod geom;
pub mod hashgrid;
pub mod image;
pub mod metrics;
mod real;
pub mod render;
pub mod train;

pub use error::{Error, Result};
pub use real::{axpy, dot, Real};
