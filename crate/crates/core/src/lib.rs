//! Probabilistic comparison of the error sets produced by competing numerical
//! methods on a shared reference dataset.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: CSV ingestion, validation and paired error sets.
//! - [`estimators`]: scalar statistics (MSE, MUE, RMSD, quantiles) and
//!   uncertainty-weighted means.
//! - [`correlation`]: Pearson/Spearman coefficients and correlation matrices.
//! - [`sip`]: systematic improvement probability, mean gain/loss and the
//!   ECDF of absolute-error differences.
//! - [`inference`]: paired bootstrap engine, p-values, inversion and ranking
//!   probabilities.
//! - [`simulation`]: g-and-h generators and the validation studies.
//!
//! All randomness flows through [`rng::substream`], so every result is a pure
//! function of its inputs and seed, independent of the number of threads.

pub mod correlation;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod rng;
pub mod simulation;
pub mod sip;
pub mod special;

pub use error::{Error, Result};
