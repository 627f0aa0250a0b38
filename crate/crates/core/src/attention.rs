//! Gaze-induced spatial attention prior.
//!
//! A frame split into a `p x p` grid of `L x L` patches gets a Gaussian map
//! centered on the patch under the gaze point. The map is added, scaled by a
//! learnable per-scenario weight, to the pre-softmax attention logits against
//! the patch keys.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::softmax_rows_inplace;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    /// Patches per image side.
    pub grid_p: usize,
    /// Pixels per patch side.
    pub patch_len: usize,
    /// Gaussian width in patch units.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Initial value of every per-scenario weight.
    #[serde(default = "default_lambda")]
    pub lambda_init: f64,
    /// Scenario names that get their own weight. Training fills an empty
    /// list from the scenarios present in the data.
    #[serde(default)]
    pub scenarios: Vec<String>,
}

fn default_sigma() -> f64 {
    1.5
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            grid_p: 8,
            patch_len: 8,
            sigma: default_sigma(),
            lambda_init: default_lambda(),
            scenarios: Vec::new(),
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_p == 0 || self.patch_len == 0 {
            return Err(Error::Config("attention grid_p and patch_len must be >= 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "attention sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config(
                "attention needs at least one scenario (set attention.scenarios or resolve them from data)".into(),
            ));
        }
        Ok(())
    }

    pub fn image_size(&self) -> usize {
        self.grid_p * self.patch_len
    }

    pub fn scenario_index(&self, scenario: &str) -> Result<usize> {
        self.scenarios
            .iter()
            .position(|s| s == scenario)
            .ok_or_else(|| Error::Config(format!("scenario `{scenario}` has no attention weight")))
    }

    /// Initial weights keyed by scenario.
    pub fn initial_lambdas(&self) -> BTreeMap<String, f64> {
        self.scenarios.iter().map(|s| (s.clone(), self.lambda_init)).collect()
    }
}

/// Grid cell `(row, col)` containing the gaze point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GazePatchIndex {
    pub row: usize,
    pub col: usize,
}

/// `floor(g2d * image_size / L)` per axis, clamped into the grid. `g2d` is
/// `(u, v)` = (horizontal, vertical), so `col` comes from `u`.
pub fn gaze_patch(g2d: [f64; 2], grid_p: usize, patch_len: usize, image_size: usize) -> GazePatchIndex {
    let cell = |u: f64| -> usize {
        let c = (u * image_size as f64 / patch_len as f64).floor();
        if c.is_nan() || c < 0.0 {
            0
        } else {
            (c as usize).min(grid_p - 1)
        }
    };
    GazePatchIndex {
        row: cell(g2d[1]),
        col: cell(g2d[0]),
    }
}

/// Normalized Gaussian over the `p x p` grid:
/// `exp(-d/(2 sigma^2)) / sum exp(-d'/(2 sigma^2))`, `d` the squared grid
/// distance to `c`.
pub fn gaussian_map<T: Scalar>(c: GazePatchIndex, grid_p: usize, sigma: f64) -> Result<Array2<T>> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be > 0, got {sigma}")));
    }
    if c.row >= grid_p || c.col >= grid_p {
        return Err(Error::Config(format!("patch {c:?} outside {grid_p}x{grid_p} grid")));
    }
    let denom = 2.0 * sigma * sigma;
    let raw = Array2::from_shape_fn((grid_p, grid_p), |(m, n)| {
        let dm = m as f64 - c.row as f64;
        let dn = n as f64 - c.col as f64;
        (-(dm * dm + dn * dn) / denom).exp()
    });
    let total: f64 = raw.sum();
    Ok(raw.mapv(|v| T::of(v / total)))
}

/// `softmax(logits + lambda * A_g)` row-wise. `logits` is
/// `[queries, p*p]`; `gaze_map` is the `p x p` map flattened row-major.
pub fn modify_attention<T: Scalar>(logits: ArrayView2<T>, gaze_map: ArrayView2<T>, lambda: T) -> Result<Array2<T>> {
    let flat: Array1<T> = gaze_map.iter().copied().collect();
    if logits.ncols() != flat.len() {
        return Err(Error::Shape(format!(
            "attention logits have {} keys but gaze map has {}x{} = {} cells",
            logits.ncols(),
            gaze_map.nrows(),
            gaze_map.ncols(),
            flat.len()
        )));
    }
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        row.scaled_add(lambda, &flat);
    }
    softmax_rows_inplace(&mut out);
    Ok(out)
}

/// Analytic `d modify_attention / d lambda`: for row weights `a`,
/// `a_j (A_j - sum_k a_k A_k)`.
pub fn modify_attention_dlambda<T: Scalar>(
    logits: ArrayView2<T>,
    gaze_map: ArrayView2<T>,
    lambda: T,
) -> Result<Array2<T>> {
    let a = modify_attention(logits, gaze_map, lambda)?;
    let flat: Vec<T> = gaze_map.iter().copied().collect();
    let mut out = a.clone();
    for (mut orow, arow) in out.rows_mut().into_iter().zip(a.rows()) {
        let mean: T = arow.iter().zip(&flat).map(|(&w, &g)| w * g).sum();
        for (o, (&w, &g)) in orow.iter_mut().zip(arow.iter().zip(&flat)) {
            *o = w * (g - mean);
        }
    }
    Ok(out)
}
