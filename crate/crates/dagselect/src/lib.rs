//! Batch runner for the simulation experiments: simulate data, fit the joint
//! model, evaluate against the truth, and replicate whole comparison tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod io;
pub mod run;

pub use config::RunConfig;
pub use error::{Error, Result};
