//! Bayesian clustering of high-dimensional data with a sparse Gaussian
//! mixture model and an unknown number of clusters.
//!
//! Observations `Y_i ∈ ℝ^p` follow `N(μ_{z_i}, I_p)`. The cluster means carry a
//! spike-and-slab LASSO prior with feature-level inclusion indicators, and
//! the number of clusters a truncated Poisson prior (a mixture of finite
//! mixtures). [`gibbs`] runs the sampler, [`summary`] aligns labels and forms
//! point estimates, [`metrics`] scores partitions, [`synth`] generates
//! benchmark data, and [`cmle`] provides an optimization baseline.
//!
//! Cluster labels are 0-based throughout.

pub mod assignment;
pub mod cmle;
pub mod data;
pub mod distributions;
mod error;
pub mod experiment;
pub mod gibbs;
pub mod hyper;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod ssl;
pub mod state;
pub mod summary;
pub mod synth;
pub mod trace;
pub mod urn;

pub use error::{Error, ErrorKind, Result};
