//! Neural deconstruction policy: features, attention encoder with
//! message-passing and tour-encoding layers, GRU pointer decoder,
//! reverse-mode gradients, checkpoints and policy-gradient training.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod features;
pub mod model;
pub mod policy;
pub mod tape;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Progress};
pub use error::{PolicyError, Result};
pub use features::{build_features, feature_width};
pub use model::{Model, ModelConfig, ParamView, Rollout, StepDistribution};
pub use policy::NeuralPolicy;
pub use train::{best_of_k, mean_search_objective, train, EpochMetrics, TrainConfig, TrainOutputs, Trainer};
