pub mod energy;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod minimize;
pub mod mollifier;
pub mod potential;
pub mod special;
pub mod sum;
pub mod torus;
pub mod transport;

pub use error::{Error, Result};
