//! Small deterministic neural-network kernel: dense, GRU and LSTM layers,
//! losses, backpropagation through time and Adam.

mod activation;
mod adam;
pub mod checkpoint;
mod dense;
mod gradcheck;
mod gru;
mod loss;
mod lstm;
pub mod ops;
mod params;
mod tensor;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_params, encode_params};
pub use dense::{Dense, DenseCache};
pub use gradcheck::{numeric_gradient, relative_error};
pub use gru::{gru_cell_forward, Gru, GruCache};
pub use loss::{categorical_crossentropy, mse_grad, mse_loss, softmax, softmax_crossentropy, CCE_EPSILON};
pub use lstm::{lstm_cell_forward, Lstm, LstmCache};
pub use params::ParamSet;
pub(crate) use params::prefixed;
pub use tensor::{Seq, Tensor};
