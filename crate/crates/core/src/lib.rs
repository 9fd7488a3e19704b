//! Robust sigma points for the one-dimensional unscented transform when the
//! moments of the input distribution are only known to lie in intervals.

pub mod distortion;
pub mod error;
pub mod experiment;
pub mod lasserre;
pub mod momentset;
pub mod poly;
pub mod robust;
pub mod sdp;

pub use error::{Error, ErrorCategory, Result};
