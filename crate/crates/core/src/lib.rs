pub mod data;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod mogp;
pub mod pipeline;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
