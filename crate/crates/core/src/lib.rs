//! Halpern iteration on spherical model spaces M^n_κ together with the
//! quantitative rate functionals that bound its asymptotic regularity and
//! metastability.

pub mod bigcount;
pub mod browder;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod fuzz;
pub mod gfunction;
pub mod halpern;
pub mod model_space;
pub mod oracles;
pub mod rates;
pub mod rng;
pub mod schedule;
pub mod tower;

pub use error::{Error, Result};
