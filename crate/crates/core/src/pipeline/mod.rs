//! Datasets, statement encoders, preprocessing, training, prediction and
//! explanation reports.

pub mod dataset;
pub mod encoder;
pub mod predict;
pub mod prepare;
pub mod scorer;
pub mod train;

pub use dataset::{letters, load_dataset, parse_dataset, split_held_out, write_dataset, QAExample};
pub use encoder::{FeatureStore, StatementEncoder, ToyEncoder};
pub use predict::{
    choose, explain, predict, prediction_accuracy, write_predictions, ExplanationReport,
    PairExplanation, PathExplanation, Prediction,
};
pub use prepare::{
    candidate_key, CandidateGraph, GroundingConfig, PreparedCandidate, PreparedExample, Preprocessor,
};
pub use scorer::{EncoderSpec, Scorer, ScorerGrads, ScorerSpec};
pub use train::{accuracy, example_gradients, question_loss, train, EpochMetrics, Loss, TrainConfig, TrainReport};
