//! Gaze-based skill assessment.
//!
//! A multimodal teacher fuses egocentric video with gaze through a
//! gaze-centered attention prior; a gaze-only student is distilled from it
//! for low-power deployment. The crate also provides the analytic power
//! model, gaze-behavior analytics and a deterministic synthetic data
//! generator.
//!
//! Numeric code is generic over [`Scalar`]; the aliases at the crate root fix
//! it to `f32`, the training default.

pub mod analysis;
pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod gaze;
pub mod nn;
pub mod power;
pub mod scalar;
pub mod student;
pub mod synth;
pub mod teacher;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Teacher = teacher::Teacher<f32>;
pub type VideoClassifier = teacher::VideoClassifier<f32>;
pub type Student = student::Student<f32>;
pub type Graph = nn::Graph<f32>;
pub type ParamStore = nn::ParamStore<f32>;
