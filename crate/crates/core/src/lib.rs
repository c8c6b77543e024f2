//! Compressive phase retrieval under random expansive ReLU generative priors.

pub mod baselines;
pub mod conditions;
pub mod error;
pub mod generator;
pub mod harness;
pub mod landscape;
pub mod linalg;
pub mod phaseless;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
