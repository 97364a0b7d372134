//! Multi-task quality and distortion predictor on statistical image features.

pub mod eval;
pub mod features;
pub mod model;
pub mod split;
pub mod train;

pub use eval::{evaluate, evaluate_predictions, EvalReport, Metric, Scored};
pub use features::{extract_features, FeatureConfig, FeatureVector, FEATURE_DIM};
pub use model::{gradient_check, MultiTaskModel, Prediction};
pub use split::{split_dataset, DatasetSplit, DEFAULT_PROPORTIONS};
pub use train::{build_samples, train, TrainConfig, TrainMode, TrainingSample};
