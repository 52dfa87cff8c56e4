//! Two-dimensional Bloch-equation simulation of MRI pulse sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`phantom`] builds tissue maps, field-inhomogeneity surfaces and the
//!   position encoding template.
//! * [`sequence`] turns imaging parameters into explicit event timelines for
//!   fast spin echo, gradient-echo EPI and MOLED acquisitions.
//! * [`engine`] walks a timeline over a grid of isochromats using exact
//!   rotation/relaxation operators and reconstructs complex images.
//! * [`dataset`] samples parameters and phantoms and writes training sets.
//! * [`eval`] holds the image-quality and artifact metrics.

pub mod container;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod eval;
pub mod fft;
pub mod field;
pub mod phantom;
pub mod sequence;

pub use error::{Error, Result};
pub use field::{ComplexImage, ScalarField};

/// Version of the on-disk formats written by this crate.
pub const FORMAT_VERSION: u32 = 1;
