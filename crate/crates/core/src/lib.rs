//! Frequency-domain ultrasound computed tomography toolkit.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod bench;
pub mod born;
pub mod boundary;
pub mod error;
pub mod fft;
pub mod field;
pub mod fwi;
pub mod io;
pub mod lbfgs;
pub mod medium;
pub mod metrics;
pub mod phantom;
pub mod plot;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
