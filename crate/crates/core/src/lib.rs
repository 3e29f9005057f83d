pub mod action;
pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod integrators;
pub mod kolmogorov;
pub mod lie;
pub mod noise;
pub mod poisson;
pub mod scenario;
pub mod suites;

pub use error::{Error, Result};
