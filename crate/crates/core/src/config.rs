//! Experiment configuration: one file holding every knob of a run.
//!
//! Top-level sections override the matching fields nested inside the model
//! configs, so a file can stay short:
//!
//! ```toml
//! seed = 3
//! [teacher.video]
//! layers = 2
//! heads = 4
//! width = 64
//! ffn_hidden = 128
//! [loss]
//! lambda_dis = 1.0
//! lambda_act = 0.5
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionConfig;
use crate::error::Result;
use crate::power::PowerConstants;
use crate::student::StudentConfig;
use crate::teacher::{TeacherAblation, TeacherConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_dis: f64,
    pub lambda_act: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ablations {
    #[serde(default)]
    pub teacher: TeacherAblation,
    #[serde(default = "yes")]
    pub distill: bool,
    #[serde(default = "yes")]
    pub action: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Single source of randomness; overrides the model seeds.
    pub seed: Option<u64>,
    pub teacher: TeacherConfig,
    pub student: StudentConfig,
    pub attention: Option<AttentionConfig>,
    pub power: Option<PowerConstants>,
    pub loss: Option<LossWeights>,
    pub ablation: Option<Ablations>,
}

impl ExperimentConfig {
    /// Applies the top-level overrides and validates everything that does
    /// not depend on the data.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.teacher.seed = seed;
            self.student.seed = seed;
        }
        if let Some(att) = self.attention.take() {
            self.teacher.attention = att;
        }
        if let Some(l) = self.loss.take() {
            self.student.lambda_dis = l.lambda_dis;
            self.student.lambda_act = l.lambda_act;
        }
        if let Some(a) = self.ablation.take() {
            self.teacher.ablation = a.teacher;
            self.student.distill = a.distill;
            self.student.action = a.action;
        }
        let mut probe = self.teacher.clone();
        if probe.attention.scenarios.is_empty() {
            probe.attention.scenarios.push("_".into());
        }
        probe.validate()?;
        self.student.validate()?;
        if let Some(p) = &self.power {
            p.validate()?;
        }
        Ok(self)
    }
}
