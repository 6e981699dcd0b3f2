//! Convolutional classifier: layers with hand-written gradients, Adam,
//! training loop and the `RBNN` model format.

mod io;
mod layers;
mod model;
mod tensor;
mod train;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout, dropout_backward, leaky_relu,
    leaky_relu_backward, maxpool2, maxpool2_backward, softmax, softmax_xent, ConvCache,
};
pub use model::{adam_step, argmax, param_count, AdamParams, AdamState, ForwardCache, Model, ModelConfig};
pub use tensor::Tensor;
pub use train::{batch_tensor, evaluate, train, EpochStats, Evaluation, LabeledInput, TrainConfig, TrainHistory};
