//! Structured pruning of the hidden dense layer and int8 post-training
//! quantization.

mod prune;
mod qmodel;
mod quant;

pub use prune::{prune_dense_units, select_units, unit_norms, PruneConfig, DEFAULT_KEEP_UNITS};
pub use qmodel::{
    load_any, quantize_ptq, AnyModel, Boundary, QBias, QLayer, QTensor, QuantModel,
};
pub use quant::{calibrate, quantize_tensor, ActRange, QuantParams, QuantizedTensor, Scheme};
