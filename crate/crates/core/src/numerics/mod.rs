//! Minimal deterministic tensor core: layers with explicit backward passes,
//! losses, the Adam optimizer and finite-difference gradient checks.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod fpmode;
pub mod gradcheck;
pub mod layer;
pub mod linalg;
pub mod loss;
pub mod lstm;
pub mod pool;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d, conv_transpose2d};
pub use dense::dense;
pub use dropout::{dropout, Mode};
pub use fpmode::FlushToZero;
pub use gradcheck::{check_module, finite_difference_check};
pub use layer::{
    Activation, Conv2d, ConvTranspose2d, Dense, Dropout, LastStep, Lstm, MaxPool2d, Module, Reshape, Sequential,
    Upsample2d,
};
pub use loss::{bce_loss, bce_with_logits, mse_loss, mse_loss_grad};
pub use lstm::{lstm_layer, LstmOutput, LstmParams};
pub use pool::{maxpool2d, upsample2d_nearest};
pub use tensor::Tensor;
