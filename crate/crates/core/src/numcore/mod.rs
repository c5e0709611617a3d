//! Minimal dense-tensor engine: tensors, activations, a reverse-mode tape
//! and a seeded random source.

mod activation;
mod rng;
mod tape;
mod tensor;

pub use activation::{apply_activation, relu, sigmoid, softplus, Activation};
pub use rng::{gaussian, RngState, SeededRng, RNG_STREAM_VERSION};
pub use tape::{Gradients, ParamId, Tape, Var};
pub use tensor::Tensor;
