//! A small reverse-mode autodiff engine over dense `f64` tensors.
//!
//! It provides exactly the differentiable layers needed by a multi-scale
//! 3D-CNN / LSTM-with-attention classifier (convolution, batch norm, max
//! pooling, LSTM, additive attention pooling, dense, dropout, softmax and
//! cross-entropy), the Adam optimizer and a flat checkpoint format.
//!
//! ```
//! use clmi_autodiff::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::new(&[2], vec![-1.0, 2.0]).unwrap());
//! let y = g.relu(x).unwrap();
//! let loss = g.sum(y).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.wrt(x).unwrap(), &[0.0, 1.0]);
//! ```

pub mod adam;
pub mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
pub mod init;
mod layer;
pub mod ops;
mod param;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use error::{AutodiffError, Result};
pub use graph::{BatchNormState, Gradients, Graph, Mode, Var};
pub use layer::LayerSpec;
pub use param::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
