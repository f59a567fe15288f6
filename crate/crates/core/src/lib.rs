//! Power-mean (q-) paths for annealed importance sampling.
//!
//! The q-path between unnormalized densities `p0` and `p1` is the weighted
//! power mean `[(1 - beta) p0^(1-q) + beta p1^(1-q)]^(1/(1-q))`, recovering
//! the geometric path at `q = 1` and the arithmetic mixture at `q = 0`.
//! The crate provides the deformed-logarithm arithmetic behind it, Gaussian
//! and Student-t endpoints, HMC transitions along the path, AIS and BDMC
//! estimators, α-divergence quadrature, and a config-driven harness.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ais;
pub mod checks;
pub mod deformed;
pub mod density;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod qpath;
pub mod sampler;

pub use ais::{run_ais, run_bdmc, AisResult, BdmcResult};
pub use deformed::QOrder;
pub use density::{make_gaussian, make_student_t, DensityHandle};
pub use error::{Error, Result};
pub use qpath::{linear_schedule, QPath, Schedule};
pub use sampler::{HmcConfig, RngStream};
