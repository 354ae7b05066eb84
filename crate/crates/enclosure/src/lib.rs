//! Enclosure-method toolkit for a first-order perturbation of the
//! biharmonic operator with Navier boundary data.
//!
//! The pipeline: build a [`geometry::Grid`] and a [`media::MediumSpec`],
//! construct logarithmic-phase CGO probes ([`cgo`]), evaluate the indicator
//! functional from boundary data ([`indicator`]) and turn indicator decay
//! rates into an enclosing region ([`reconstruct`]).

pub mod cgo;
pub mod error;
pub mod geometry;
pub mod indicator;
pub mod io;
pub mod media;
pub mod reconstruct;
pub mod solver;
pub mod sum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
