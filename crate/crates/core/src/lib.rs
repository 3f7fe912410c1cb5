//! Convolutional sparse coding with gradient-domain regularization.
//!
//! The crate solves convolutional BPDN and four gradient-penalized variants
//! (`Grd`, scalar TV, vector TV and image-domain TV) by ADMM with per-frequency
//! Sherman-Morrison solves, plus a patch-based BPDN baseline and a denoising
//! pipeline that compares them.

// `!(x > 0.0)` is deliberate: NaN must fail parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blocks;
pub mod cli;
pub mod error;
pub mod freq_solve;
pub mod pipeline;
pub mod prox;
pub mod solvers;
pub mod spectral;

pub use error::{CscError, Result};
