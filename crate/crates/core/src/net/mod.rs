//! Small dense networks with exact reverse-mode gradients, Adam and a
//! flat little-endian checkpoint format.

mod adam;
mod checkpoint;
mod dense;

pub use adam::{clip_grad_norm, soft_update, Adam};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, TensorEntry,
};
pub use dense::{argmax, log_softmax, softmax, DenseNetwork, ForwardCache, LayerShape};
