//! One-layer GCN subgraph encoder with analytic gradients, the Adam optimizer,
//! a finite-difference gradient checker and the checkpoint format.

mod adam;
mod checkpoint;
mod gcn;
mod gradcheck;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use gcn::{encoder_backward, encoder_backward_hidden, gcn_forward, views, EncoderInput, GcnForward, ViewPair};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use params::{ModelGrads, ModelParams, Precision};
