//! Synthetic dataset, the end-to-end training loop and checkpoints.
//!
//! Only the encoder parameters `phi` are trainable. Decoder parameters are
//! recomputed from the observation on every forward pass.

mod checkpoint;
mod config;
mod data;
mod shapes;
mod trainer;

pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, write_atomic};
pub use config::{Regularizer, TrainConfig};
pub use data::{gen_dataset, gen_dataset_with, Sample};
pub use shapes::{PosedPrimitive, Primitive, ShapeKind, SynthShape};
pub use trainer::{
    chamfer_graph, eval_chamfer, eval_identity_baseline, loss_and_grad, loss_value, mean_loss, metrics_csv,
    reconstruct, train_step, LossParts, StepMetrics, Trainer,
};
