pub mod amn;
pub mod corpus;
pub mod error;
pub mod model;
pub mod retrieval;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
