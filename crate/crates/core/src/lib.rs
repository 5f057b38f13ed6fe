pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod hypercomplex;
pub mod patterns;
pub mod scoring;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
