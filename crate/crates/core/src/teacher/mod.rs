//! Multimodal teacher: a divided space-time video transformer whose first
//! spatial block carries the gaze attention prior, a gaze-crop encoder and a
//! gaze-dynamics encoder, fused by an MLP.

mod config;
mod model;
mod train;

pub use config::{CropConfig, EncoderConfig, ImageEncoderSpec, TeacherAblation, TeacherConfig, TrainConfig};
pub use model::{
    geometry, CropEncoder, GazeEncoder, SequenceEncoder, Teacher, TeacherEmbeddings, TeacherVars, VideoClassifier,
    VideoEncoder,
};
pub use train::{
    check_labels, evaluate_teacher, resolve_scenarios, train_teacher, EpochMetrics, TeacherCheckpoint, TeacherSample,
    TrainOutcome,
};
