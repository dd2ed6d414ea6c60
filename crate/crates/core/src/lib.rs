pub mod dataset;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod seed;

pub use error::{Error, Result};
