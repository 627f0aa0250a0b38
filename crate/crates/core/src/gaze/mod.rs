//! Gaze and recording data model, on-disk format, normalization and the
//! clip-sampling protocol shared by every model.

mod clips;
mod io;
mod normalize;
mod quat;
mod types;

pub use clips::{clip_starts, segment_clips, segment_gaze_clips, DEFAULT_CLIPS};
pub use io::{load_dataset, load_recording, save_recording};
pub use normalize::{col, normalize_gaze, normalize_samples, NormalizedGaze, FEATURE_WIDTH};
pub use quat::Quat;
pub use types::{Clip, FrameSource, FrameStorage, GazeSample, GazeSequence, Recording, RecordingMeta, Split};

pub(crate) use types::norm3;

pub const CLIP_FRAMES: usize = 16;
pub const CLIP_FPS: f64 = 2.0;
/// Time from the first to the last frame of a clip.
pub const CLIP_DURATION_S: f64 = (CLIP_FRAMES as f64 - 1.0) / CLIP_FPS;
