pub mod bench;
pub mod decoder;
pub mod dropout;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod math;
pub mod model;
pub mod rouge;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
