//! Dense MLPs with hand-derived backprop, binary cross-entropy and Adam.

mod activation;
mod adam;
pub(crate) mod checkpoint;
mod loss;
mod mlp;
mod prediction;

pub use activation::{leaky_relu, leaky_relu_derivative, sigmoid, DEFAULT_LEAK};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_mlp, write_mlp};
pub use loss::{bce_loss, bce_loss_raw, LOG_CLAMP};
pub use mlp::{mlp_backward, mlp_forward, mlp_init, Dense, Gradients, MlpArchitecture, MlpModel};
pub use prediction::PredictionMatrix;
pub(crate) use prediction::common_shape as prediction_shape;
