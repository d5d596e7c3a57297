//! Float CNN: tensors, reference kernels, the default architecture and
//! `SDM1` serialization.

mod arch;
pub(crate) mod io;
pub mod kernels;
mod tensor;

pub use arch::{
    build_default_model, default_builder, image_tensor, Activation, Layer, Model, ModelBuilder,
    Trace, DEFAULT_HIDDEN_UNITS, DEFAULT_PARAM_COUNT,
};
pub use io::{
    load_model, model_file_bytes, model_from_bytes, model_to_bytes, save_model, SDM_MAGIC,
    SDM_VERSION,
};
pub use kernels::{conv2d, dense, maxpool2, softmax};
pub use tensor::Tensor;
