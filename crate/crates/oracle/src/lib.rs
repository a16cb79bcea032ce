//! Synthetic worlds with known parameters, and independent reference
//! computations to check the estimation and simulation code against.

pub mod bridge;
pub mod conjugate;
pub mod dense;
pub mod fixtures;
pub mod ks;
pub mod linear;
pub mod loglik;
pub mod simulate;
pub mod world;

pub use simulate::{brute_force_direct, brute_force_irf, generate, BruteShock, Generated, WorldStart};
pub use world::{TrueCountry, TrueWorld};
