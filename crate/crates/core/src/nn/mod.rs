//! Dense feed-forward networks with reverse-mode gradients, the losses used
//! for training and the Adam optimizer.

mod adam;
pub mod loss;
mod mlp;

pub use adam::AdamState;
pub use mlp::{Activation, MlpNet, OutputTransform, Tape};
pub use mlp::{sigmoid, softmax_in_place};
