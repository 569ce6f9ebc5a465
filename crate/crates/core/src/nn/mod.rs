//! Small trainable layer set with hand-written backward passes.

mod adam;
mod checkpoint;
mod layers;
mod ops;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, SectionManifest, MAGIC, VERSION};
pub use layers::{Activation, ForwardCtx, GrlConfig, Layer, LayerSpec, Param, Sequential};
pub use ops::*;
pub use tensor::{ComplexTensor4, Dtype, Real, Tensor4};
