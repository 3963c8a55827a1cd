//! Forward and backward kernels on raw tensors.

pub mod broadcast;
pub mod conv;
pub mod norm;
pub mod pool;
