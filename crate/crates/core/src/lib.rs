//! Global vector autoregression with endogenous stochastic volatility.

pub mod domain;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod rng;
pub mod shock;
pub mod stack;
pub mod varx;

pub use error::{Error, Result};
