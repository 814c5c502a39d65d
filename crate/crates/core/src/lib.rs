//! Variational quantum classifier simulation with random-rotation smoothing
//! and certified robustness bounds.

pub mod certify;
pub mod circuit;
pub mod cli;
pub mod encode;
pub mod error;
pub mod qla;
pub mod rotnoise;
pub mod seed;
pub mod stats;
pub mod vqc;

pub use error::{Error, Result};
