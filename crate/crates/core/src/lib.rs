pub mod dense;
pub mod error;
pub mod harness;
pub mod integrate;
pub mod krylov;
pub mod metrics;
pub mod problems;
pub mod reduction;
pub mod sparse;

pub use error::{Error, Result};
