//! Sparse multi-class vector autoregression.
//!
//! Estimates `K` parallel VAR(P) models over the same `J` series, coupled by
//! lasso and cross-class fusion penalties on the autoregressive coefficients
//! and by a fused joint graphical lasso on the per-class inverse error
//! covariance matrices. Fitted coefficient supports are turned into directed,
//! signed effect networks with connectedness, shared-effect and
//! within/spillover statistics.
//!
//! The crate is `no_std` (with `alloc`); all file formats and the command
//! line front end live in the companion `mcvar-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod flt;

pub mod adf;
pub mod error;
pub mod estimator;
pub mod jgl;
pub mod mat;
pub mod model;
pub mod network;
pub mod panel;
pub mod rng;
pub mod sim;
pub mod spg;

pub use error::{Error, Result};
pub use mat::Mat;
pub use model::{count_parameters, objective, MultiClassVarFit, PenaltyConfig};
pub use panel::{LaggedDesign, PricePanel, ReturnPanel, SeriesInfo};
