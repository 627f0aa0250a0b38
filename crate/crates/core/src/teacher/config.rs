use serde::{Deserialize, Serialize};

use crate::attention::AttentionConfig;
use crate::error::{Error, Result};
use crate::gaze::CLIP_FRAMES;
use crate::nn::optim::SgdConfig;

/// Width and depth of one transformer encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ffn_hidden: usize,
}

impl EncoderConfig {
    pub fn validate(&self, what: &str) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.width == 0 || self.ffn_hidden == 0 {
            return Err(Error::Config(format!("{what}: layers, heads and widths must be > 0")));
        }
        if self.width % self.heads != 0 {
            return Err(Error::Config(format!(
                "{what}: width {} not divisible by {} heads",
                self.width, self.heads
            )));
        }
        Ok(())
    }
}

/// Per-frame image embedder used on gaze crops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageEncoderSpec {
    /// Trainable strided patch convolution, ReLU, mean pool, projection.
    StubSmall { patch: usize, channels: usize },
    /// Precomputed embeddings from an external model; not available here.
    ExternalPretrained { name: String, dim: usize },
}

/// Missing fields take the teacher defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CropConfig {
    /// Crop side as a fraction of the shorter image side.
    pub crop_frac: f64,
    /// Side length crops are resized to before embedding.
    pub input_size: usize,
    pub image_encoder: ImageEncoderSpec,
    /// Temporal encoder over the per-frame crop embeddings.
    pub temporal: EncoderConfig,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            crop_frac: 0.25,
            input_size: 16,
            image_encoder: ImageEncoderSpec::StubSmall { patch: 4, channels: 64 },
            temporal: EncoderConfig {
                layers: 2,
                heads: 4,
                width: 128,
                ffn_hidden: 256,
            },
        }
    }
}

/// Which teacher components are active. Disabled embeddings are left out of
/// the fusion input, which is the same as zeroing them before a fusion
/// layer of matching width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherAblation {
    pub gaze_attention: bool,
    pub crop_encoder: bool,
    pub gaze_encoder: bool,
}

impl Default for TeacherAblation {
    fn default() -> Self {
        Self {
            gaze_attention: true,
            crop_encoder: true,
            gaze_encoder: true,
        }
    }
}

impl TeacherAblation {
    /// All eight on/off combinations.
    pub fn all() -> Vec<Self> {
        (0..8u8)
            .map(|m| Self {
                gaze_attention: m & 1 != 0,
                crop_encoder: m & 2 != 0,
                gaze_encoder: m & 4 != 0,
            })
            .collect()
    }

    pub fn label(&self) -> String {
        let flag = |b: bool| if b { "on" } else { "off" };
        format!(
            "att={},crop={},gaze={}",
            flag(self.gaze_attention),
            flag(self.crop_encoder),
            flag(self.gaze_encoder)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Clips drawn from each training recording (the evaluation protocol
    /// always uses all of them).
    pub clips_per_recording: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    pub frames: usize,
    pub k_classes: usize,
    pub attention: AttentionConfig,
    pub video: EncoderConfig,
    pub crop: CropConfig,
    pub gaze: EncoderConfig,
    /// Hidden widths of the 3-layer fusion MLP.
    pub fusion_hidden: [usize; 2],
    #[serde(default)]
    pub ablation: TeacherAblation,
    pub optimizer: SgdConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            frames: CLIP_FRAMES,
            k_classes: 2,
            attention: AttentionConfig::default(),
            video: EncoderConfig {
                layers: 4,
                heads: 4,
                width: 128,
                ffn_hidden: 512,
            },
            crop: CropConfig::default(),
            gaze: EncoderConfig {
                layers: 4,
                heads: 4,
                width: 128,
                ffn_hidden: 512,
            },
            fusion_hidden: [256, 128],
            ablation: TeacherAblation::default(),
            optimizer: SgdConfig {
                lr: 5e-3,
                momentum: 0.9,
                weight_decay: 0.0,
            },
            train: TrainConfig {
                epochs: 15,
                batch_size: 8,
                clips_per_recording: 10,
            },
            seed: 0,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        self.attention.validate()?;
        self.video.validate("video encoder")?;
        self.crop.temporal.validate("crop temporal encoder")?;
        self.gaze.validate("gaze encoder")?;
        if self.frames == 0 || self.k_classes < 2 {
            return Err(Error::Config("teacher needs frames >= 1 and k_classes >= 2".into()));
        }
        if !(self.crop.crop_frac > 0.0 && self.crop.crop_frac <= 1.0) {
            return Err(Error::Config(format!(
                "crop_frac must be in (0, 1], got {}",
                self.crop.crop_frac
            )));
        }
        match &self.crop.image_encoder {
            ImageEncoderSpec::StubSmall { patch, channels } => {
                if *patch == 0 || *channels == 0 || self.crop.input_size % patch != 0 {
                    return Err(Error::Config(format!(
                        "crop input size {} must be a positive multiple of the stem patch {patch}",
                        self.crop.input_size
                    )));
                }
            }
            ImageEncoderSpec::ExternalPretrained { name, .. } => {
                return Err(Error::Config(format!(
                    "external image encoder `{name}` is not bundled; use stub_small"
                )));
            }
        }
        if self.fusion_hidden.contains(&0) {
            return Err(Error::Config("fusion widths must be > 0".into()));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 || self.train.clips_per_recording == 0 {
            return Err(Error::Config(
                "epochs, batch_size and clips_per_recording must be > 0".into(),
            ));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        Ok(())
    }

    pub fn crop_patch(&self) -> usize {
        match self.crop.image_encoder {
            ImageEncoderSpec::StubSmall { patch, .. } => patch,
            ImageEncoderSpec::ExternalPretrained { .. } => self.crop.input_size,
        }
    }

    /// Width of the concatenated embeddings fed to the fusion MLP.
    pub fn fusion_input(&self) -> usize {
        self.video.width
            + if self.ablation.crop_encoder {
                self.crop.temporal.width
            } else {
                0
            }
            + if self.ablation.gaze_encoder { self.gaze.width } else { 0 }
    }

    /// Width of the full three-way concatenation, whatever is masked.
    pub fn embedding_width(&self) -> usize {
        self.video.width + self.crop.temporal.width + self.gaze.width
    }
}
