//! Dense f64 numerics: tensors, convolution, softmax, batch norm, dropout,
//! Adam, seeded random streams and a finite-difference gradient oracle.

pub mod adam;
pub mod batchnorm;
pub mod gradcheck;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use batchnorm::{batchnorm_apply, batchnorm_backward, BatchNormState, NormMode};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use ops::{
    conv2d_valid, conv2d_valid_backward, dropout_mask, masked_softmax, sigmoid, softmax,
};
pub use rng::RngStream;
pub use tensor::Tensor2;
