//! Braid prediction as an auxiliary task for joint trajectory prediction:
//! per-edge crossing classification from mode embeddings, the class-weighted
//! braid loss gated by the best joint mode, and a toy trainer.

mod features;
mod head;
mod loss;
pub mod nn;
mod trainer;

pub use features::{
    concat_features, edge_features, relative_feature, EdgeFeature, EmbeddingSet, RelativeEncoding, RELATIVE_FEATURE_DIM,
};
pub use head::{classify_edge_from_encodings, EdgeClassifierHead, DEFAULT_HEAD_HIDDEN};
pub use loss::{
    braid_loss, combined_loss, edge_loss, edge_loss_grad, mean_braid_loss, scene_braid_loss, softmax, BraidLossConfig, ClassWeights,
    SceneBraidLoss,
};
pub use trainer::{evaluate_model, train_toy, train_toy_split, EpochRecord, ToyModel, TrainOutcome, TrainerConfig};
