//! Geometric mixup for semi-supervised node classification.
//!
//! Modules:
//! - [`graph`]: graph container, adjacency normalization, sparse aggregation
//! - [`augment`]: fixed-weight mixup operators and the multi-hop driver
//! - [`adaptive`]: learned all-pair mixup with exact gradients
//! - [`trainer`]: two-layer GCN trained on mixed inputs
//! - [`theory`]: Monte Carlo checks of the concentration and smoothness results
//! - [`io`]: dataset files, KNN graphs, splits and result tables

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod augment;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
