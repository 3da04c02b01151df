pub mod error;
pub mod geometry;
pub mod labels;
pub mod learner;
pub mod metrics;
pub mod mpc;
pub mod perception;
pub mod sim;
pub mod synthesis;
pub mod vehicle;

pub use error::{Error, Result};
