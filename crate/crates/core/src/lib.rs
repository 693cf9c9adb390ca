//! Cross-modal virtual sensing: reconstruct flame images from multichannel
//! acoustic pressure through embedding distillation, and classify combustion
//! state from the reconstructions.
//!
//! The numeric core is generic over [`Scalar`]; training uses `f32` and the
//! gradient-check harness uses `f64`.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod models;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod training;
pub mod util;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = numerics::Tensor<f32>;
pub type Tensor64 = numerics::Tensor<f64>;
pub type Adam32 = numerics::AdamState<f32>;
pub type Adam64 = numerics::AdamState<f64>;
