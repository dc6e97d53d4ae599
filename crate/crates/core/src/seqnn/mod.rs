//! Differentiable sequence layers, losses and the Adam optimizer.
//!
//! Every layer works on `T × C` matrices in double precision and exposes an
//! exact analytic backward pass.

mod activation;
mod adam;
mod conv;
mod loss;
mod lstm;
mod pool;
mod tensor;

pub use activation::{sigmoid, Dropout, Relu, Sigmoid};
pub use adam::{AdamConfig, AdamState};
pub use conv::{CausalConv1d, Conv1x1, Linear};
pub use loss::{bce_loss, mse, mse_loss, BCE_EPS};
pub use lstm::{Lstm, LstmCache};
pub use pool::{AvgPoolTime, UpsampleMode, UpsampleTime};
pub use tensor::{zero_grads, Layer, Mat, Mode, Param, Phase, SeqTensor};
