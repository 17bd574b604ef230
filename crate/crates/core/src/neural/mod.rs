//! Tree neural network over terms, its exact gradients, Adam and
//! checkpoints.
//!
//! Each operator has a two-layer net mapping its children's vectors to a
//! vector for the node; leaves are learned vectors. The node under the
//! cursor is passed through one more net. A three-layer predictor maps the
//! root vector to action logits, and an optional linear head reads a value
//! from the predictor's last hidden layer.

mod adam;
mod checkpoint;
mod context;
mod layout;
mod loss;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_path, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta,
    CHECKPOINT_VERSION,
};
pub use context::EpisodeContext;
pub use layout::{Block, Gradients, ParamLayout};
pub use loss::{LossKind, Sample, Target};
pub use net::{masked_softmax, ModelConfig, PolicyOutput, PredictorActivations, TreePolicy};
