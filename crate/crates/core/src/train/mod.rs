//! Cross-entropy, backpropagation, Adam and the training loop.

mod adam;
mod backprop;
mod fit;

pub use adam::{adam_step, AdamConfig, AdamParam, AdamState};
pub use backprop::{backward, crossentropy, Gradients};
pub use fit::{
    accuracy_on, stratified_split, train, EpochStats, TrainConfig, TrainHistory, TrainOutcome,
};
