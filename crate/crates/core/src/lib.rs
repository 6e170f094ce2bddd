pub mod classifier;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod harness;
pub mod numfmt;
pub mod occlusion;
pub mod reconstructor;

pub use error::{Error, Result};
