use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::arch::{count_macs, estimate_bytes, Architecture};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Rgb,
    Imu,
    Audio,
    Eye,
}

impl Sensor {
    pub const ALL: [Sensor; 4] = [Sensor::Rgb, Sensor::Imu, Sensor::Audio, Sensor::Eye];
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sensor::Rgb => "rgb",
            Sensor::Imu => "imu",
            Sensor::Audio => "audio",
            Sensor::Eye => "eye",
        })
    }
}

impl FromStr for Sensor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" | "video" => Ok(Sensor::Rgb),
            "imu" => Ok(Sensor::Imu),
            "audio" => Ok(Sensor::Audio),
            "eye" | "gaze" => Ok(Sensor::Eye),
            other => Err(Error::Config(format!("unknown sensor `{other}`"))),
        }
    }
}

/// Energy coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConstants {
    pub alpha_pj_per_mac: f64,
    pub beta_pj_per_byte: f64,
    /// Continuous sensing power per sensor.
    pub gamma_mw: BTreeMap<Sensor, f64>,
    /// Where overridden values came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Default for PowerConstants {
    fn default() -> Self {
        Self {
            alpha_pj_per_mac: 4.6,
            beta_pj_per_byte: 80.0,
            gamma_mw: BTreeMap::from([
                (Sensor::Rgb, 35.0),
                (Sensor::Imu, 1.2),
                (Sensor::Audio, 0.3),
                (Sensor::Eye, 7.8),
            ]),
            provenance: None,
        }
    }
}

impl PowerConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_pj_per_mac > 0.0 && self.beta_pj_per_byte > 0.0) {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        if let Some((s, g)) = self.gamma_mw.iter().find(|(_, &g)| !(g > 0.0)) {
            return Err(Error::Config(format!("gamma for {s} must be positive, got {g}")));
        }
        Ok(())
    }
}

/// Per-inference workload plus sensing duty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerProfile {
    pub macs: u64,
    pub bytes: u64,
    pub interval_s: f64,
    /// Active sensors with duty fraction in `[0, 1]`.
    pub sensors: BTreeMap<Sensor, f64>,
}

pub const DEFAULT_INTERVAL_S: f64 = 8.0;

impl PowerProfile {
    pub fn from_arch(arch: &Architecture, interval_s: f64, sensors: &[Sensor]) -> Self {
        Self {
            macs: count_macs(arch),
            bytes: estimate_bytes(arch),
            interval_s,
            sensors: sensors.iter().map(|&s| (s, 1.0)).collect(),
        }
    }

    pub fn sensors_only(sensors: &[(Sensor, f64)]) -> Self {
        Self {
            macs: 0,
            bytes: 0,
            interval_s: DEFAULT_INTERVAL_S,
            sensors: sensors.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub compute_mw: f64,
    pub memory_mw: f64,
    pub sensor_mw: f64,
    pub total_mw: f64,
}

/// pJ/s to mW.
const PJ_PER_S_TO_MW: f64 = 1e-9;

/// `P = alpha N / T + beta B / T + sum_m gamma_m delta_m`, in mW.
pub fn power_mw(profile: &PowerProfile, consts: &PowerConstants) -> Result<PowerBreakdown> {
    if !(profile.interval_s > 0.0) {
        return Err(Error::Config(format!(
            "inference interval must be > 0 s, got {}",
            profile.interval_s
        )));
    }
    let mut sensor_mw = 0.0;
    for (&sensor, &duty) in &profile.sensors {
        if !(0.0..=1.0).contains(&duty) {
            return Err(Error::Config(format!(
                "duty for {sensor} must be in [0, 1], got {duty}"
            )));
        }
        let gamma = consts
            .gamma_mw
            .get(&sensor)
            .ok_or_else(|| Error::Config(format!("no sensing power constant for {sensor}")))?;
        sensor_mw += gamma * duty;
    }
    let compute_mw = consts.alpha_pj_per_mac * profile.macs as f64 / profile.interval_s * PJ_PER_S_TO_MW;
    let memory_mw = consts.beta_pj_per_byte * profile.bytes as f64 / profile.interval_s * PJ_PER_S_TO_MW;
    Ok(PowerBreakdown {
        compute_mw,
        memory_mw,
        sensor_mw,
        total_mw: compute_mw + memory_mw + sensor_mw,
    })
}

/// Fraction of samples in which a sensor produced data. At least one second
/// of samples is required.
pub fn sensor_duty(active: &[bool], rate_hz: f64) -> Result<f64> {
    if rate_hz <= 0.0 || (active.len() as f64) < rate_hz {
        return Err(Error::EmptyInput(format!(
            "sensor duty needs at least 1 s of samples ({} at {rate_hz} Hz)",
            active.len()
        )));
    }
    Ok(active.iter().filter(|&&a| a).count() as f64 / active.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub profile: PowerProfile,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub accuracy: Option<f64>,
    pub macs: u64,
    pub bytes: u64,
    pub interval_s: f64,
    #[serde(flatten)]
    pub power: PowerBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    /// Sorted by model name.
    pub rows: Vec<ReportRow>,
    /// `ratios[a][b] = P_a / P_b` for every ordered pair of distinct models.
    pub ratios: BTreeMap<String, BTreeMap<String, f64>>,
}

impl PowerReport {
    pub fn ratio(&self, a: &str, b: &str) -> Option<f64> {
        self.ratios.get(a)?.get(b).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,accuracy,macs,bytes,interval_s,compute_mw,memory_mw,sensor_mw,total_mw\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.name,
                r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
                r.macs,
                r.bytes,
                r.interval_s,
                r.power.compute_mw,
                r.power.memory_mw,
                r.power.sensor_mw,
                r.power.total_mw
            ));
        }
        s
    }
}

pub fn power_report(models: &[ModelEntry], consts: &PowerConstants) -> Result<PowerReport> {
    let mut rows = models
        .iter()
        .map(|m| {
            Ok(ReportRow {
                name: m.name.clone(),
                accuracy: m.accuracy,
                macs: m.profile.macs,
                bytes: m.profile.bytes,
                interval_s: m.profile.interval_s,
                power: power_mw(&m.profile, consts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    let mut ratios: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for a in &rows {
        for b in rows.iter().filter(|b| b.name != a.name) {
            ratios
                .entry(a.name.clone())
                .or_default()
                .insert(b.name.clone(), a.power.total_mw / b.power.total_mw);
        }
    }
    Ok(PowerReport { rows, ratios })
}
