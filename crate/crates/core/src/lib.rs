//! Joint Bayesian selection of regression variables and of the directed
//! acyclic graph (DAG) linking the covariates.
//!
//! The model pairs a spike-and-slab regression on the response with a
//! DAG-Wishart prior on the modified Cholesky factor of the covariate
//! precision matrix. A Markov random field prior couples the two: included
//! variables that share an edge are rewarded. Everything after integrating
//! out the regression coefficients and the Cholesky parameter is available in
//! closed form, so this crate works purely in `(gamma, dag)` space:
//!
//! * [`scoring`] evaluates the unnormalized joint log posterior and, for small
//!   `p`, enumerates it exactly.
//! * [`sampler`] runs a Metropolis-Hastings-within-Gibbs chain over the pair,
//!   with per-column DAG updates that may run in parallel.
//! * [`simdata`] and [`metrics`] reproduce the simulation benchmarks.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `std` feature only adds thread-parallel column updates.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]
// `!(x > y)` is used on purpose so that NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cholesky;
pub mod dag_wishart;
pub mod dataset;
mod error;
pub mod graphs;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod scoring;
pub mod simdata;
pub mod spike_slab;

pub use cholesky::CholeskyParam;
pub use dag_wishart::DagWishartParams;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use graphs::{Adjacency, Dag};
pub use linalg::Matrix;
pub use sampler::{ChainControl, ChainSummary};
pub use scoring::{JointScore, PosteriorTable};
pub use spike_slab::{Hyperparameters, NoiseModel, VariableIndicator};
