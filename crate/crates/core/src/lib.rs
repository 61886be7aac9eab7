pub mod align;
pub mod data;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Rng, Scalar, Tensor};
