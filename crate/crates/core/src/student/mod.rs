//! Gaze-only student distilled from the teacher's fused embeddings.

mod config;
mod model;
mod train;

pub use config::StudentConfig;
pub use model::{Student, StudentOutput, StudentVars, SPECIAL_TOKENS};
pub use train::{
    evaluate_student, resolve_subtasks, train_student, LossTerms, StudentCheckpoint, StudentEpochMetrics,
    StudentOutcome, StudentSample, TeacherSource,
};
