//! NCHW tensors, convolution kernels and reverse-mode autodiff sized for
//! small segmentation networks on the CPU.
//!
//! ```
//! use lvsnet_tensor::{backward, Conv2dOptions, Tensor, Var};
//!
//! let x = Var::input(Tensor::<f64>::full(&[1, 1, 4, 4], 1.0));
//! let w = Var::input(Tensor::full(&[2, 1, 3, 3], 0.5));
//! let loss = x.conv2d(&w, None, Conv2dOptions::same(3)).unwrap().relu().mean();
//! let grads = backward(&loss).unwrap();
//! assert_eq!(grads.wrt(&w).unwrap().shape(), &[2, 1, 3, 3]);
//! ```

mod error;
mod float;
pub mod kernels;
mod optim;
mod params;
mod tensor;
mod var;

pub use error::{Result, TensorError};
pub use float::Float;
pub use kernels::conv::{Conv2dOptions, ConvTranspose2dOptions};
pub use optim::Adam;
pub use params::{ParamEntry, ParamId, ParamKind, ParamStore};
pub use tensor::Tensor;
pub use var::{backward, Gradients, Var};
