//! Robust least-squares frequency-invariant filter-and-sum beamformers.
//!
//! The crate covers the whole pipeline: array geometry and direction grids
//! ([`spatial`]), sensor response models ([`steering`]), the per-frequency
//! constrained least-squares design and its FIR approximation ([`design`]),
//! beampattern and white-noise-gain evaluation ([`analysis`]), and a
//! time-domain simulator that scores designs under localization errors
//! ([`sim`]).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod design;
pub mod error;
pub mod spatial;
pub mod sim;
pub mod steering;
pub mod wav;

pub use error::{Error, Result};
