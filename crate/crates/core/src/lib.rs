//! Self-supervised time-series representation learning.
//!
//! The pipeline: a Daubechies-4 wavelet filter bank produces a low-pass
//! perturbed view of every training window ([`wavelet`]); two overlapping
//! crops of the raw and perturbed series ([`sampler`]) run through an
//! Inception-style dilated convolution encoder ([`encoder`]); and a
//! hierarchical triplet contrastive objective ([`loss`]) ties the four
//! representations together. [`trainer`] wires those into an optimisation
//! loop and [`tasks`] holds the downstream forecasting, classification and
//! anomaly heads.

// `ensure!` negates comparisons on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arraygrad;
pub mod checkpoint;
pub mod datasets;
pub mod encoder;
pub mod error;
pub mod loss;
pub mod rng;
pub mod sampler;
pub mod series;
pub mod tasks;
pub mod trainer;
pub mod wavelet;

pub use error::{Error, Result};
pub use series::Series;
