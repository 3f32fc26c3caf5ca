//! Age-structured mortality reconstruction and nonnegative DMD forecasting.
//!
//! The crate is organised bottom-up:
//!
//! * [`interp`]: monotone piecewise cubic Hermite interpolation of mortality anchors.
//! * [`pde`]: the age-structured transport equation, its BDF2 discretisation and an
//!   exact characteristic solution used as a convergence oracle.
//! * [`eki`]: ensemble Kalman inversion of yearly mortality curves from bracketed deaths.
//! * [`nnls`]: Lawson–Hanson nonnegative least squares with a support-enumeration oracle.
//! * [`nndmd`]: nonnegative, standard and log DMD, forecasting and spectral limits.
//! * [`data_io`]: CSV bundles, synthetic twin generation and result writing.
//!
//! Data-parallel loops (ensemble members, DMD rows, Monte Carlo batches) go through
//! [`par::Execution`], which uses rayon when the `parallel` feature is on and falls back to
//! plain iteration otherwise. Results never depend on the execution mode.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data_io;
pub mod eki;
pub mod interp;
pub mod nndmd;
pub mod nnls;
pub mod par;
pub mod pde;
pub mod rng;

mod error;

pub use error::{Error, Result};
