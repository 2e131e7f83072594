//! Kolmogorov–Arnold networks (B-spline, Gaussian RBF and RSWAF edge bases)
//! with an error-correcting output code ensemble for multi-class
//! classification.
//!
//! The crate is organised bottom-up:
//!
//! - [`grad_engine`]: dense matrices, Adam, central-difference gradients
//! - [`layers`]: basis functions, KAN layers with analytic backward passes, networks
//! - [`ecoc`]: coding matrices, encoding and Hamming decoding
//! - [`train`]: losses, the training loop, vanilla and ECOC paths
//! - [`data`]: CSV ingestion, normalization, stratified splits, synthetic blobs
//! - [`metrics`]: confusion matrices, weighted metrics, seed aggregation
//! - [`experiment`]: single runs, hyperparameter sweeps and variant ablations
//! - [`cli`]: the `kan-ecoc` command line

pub mod cli;
pub mod data;
pub mod ecoc;
pub mod error;
pub mod experiment;
pub mod grad_engine;
pub mod layers;
pub mod metrics;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
