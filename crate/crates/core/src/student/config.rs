use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::CLIP_FRAMES;
use crate::nn::optim::AdamWConfig;
use crate::teacher::{EncoderConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudentConfig {
    pub frames: usize,
    pub k_classes: usize,
    /// Subtask names in head order; filled from the data when empty.
    #[serde(default)]
    pub subtasks: Vec<String>,
    pub encoder: EncoderConfig,
    pub lambda_dis: f64,
    pub lambda_act: f64,
    /// Enables the distillation term.
    #[serde(default = "yes")]
    pub distill: bool,
    /// Enables the subtask (action) term.
    #[serde(default = "yes")]
    pub action: bool,
    /// Also train the teacher-side projection. With both projections free
    /// the L1 term is minimized by shrinking them together towards zero, so
    /// by default the teacher side keeps its random initialization.
    pub train_teacher_projection: bool,
    pub optimizer: AdamWConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            frames: CLIP_FRAMES,
            k_classes: 2,
            subtasks: Vec::new(),
            encoder: EncoderConfig {
                layers: 4,
                heads: 4,
                width: 128,
                ffn_hidden: 512,
            },
            lambda_dis: 1.0,
            lambda_act: 0.5,
            distill: true,
            action: true,
            train_teacher_projection: false,
            optimizer: AdamWConfig {
                lr: 1e-4,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.01,
            },
            train: TrainConfig {
                epochs: 10,
                batch_size: 32,
                clips_per_recording: 10,
            },
            seed: 0,
        }
    }
}

impl StudentConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate("student encoder")?;
        if self.frames == 0 || self.k_classes < 2 {
            return Err(Error::Config("student needs frames >= 1 and k_classes >= 2".into()));
        }
        if !(self.lambda_dis >= 0.0 && self.lambda_act >= 0.0) {
            return Err(Error::Config("loss weights must be >= 0".into()));
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

    /// Effective distillation weight after the switch.
    pub fn dis_weight(&self) -> f64 {
        if self.distill {
            self.lambda_dis
        } else {
            0.0
        }
    }

    /// Effective action weight after the switch.
    pub fn act_weight(&self) -> f64 {
        if self.action {
            self.lambda_act
        } else {
            0.0
        }
    }

    /// Same architecture trained with cross-entropy only.
    pub fn gaze_only(mut self) -> Self {
        self.distill = false;
        self.action = false;
        self
    }

    pub fn common_dim(&self) -> usize {
        self.encoder.width
    }

    pub fn n_subtasks(&self) -> usize {
        self.subtasks.len().max(1)
    }
}
