//! Model-ready tensors built from clips.
//!
//! [`GazeInput`] is the only input the student accepts; it is derived from
//! normalized gaze and cannot carry frame data. [`VisualInput`] holds the
//! teacher's pixel-derived tensors.

use image::imageops::{self, FilterType};
use image::RgbImage;
use ndarray::Array2;

use crate::attention::{gaussian_map, gaze_patch, AttentionConfig};
use crate::error::{Error, Result};
use crate::gaze::{normalize_samples, Clip, GazeSample, NormalizedGaze, FEATURE_WIDTH};
use crate::scalar::Scalar;

/// Normalized gaze rows, `[frames, FEATURE_WIDTH]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeInput<T>(Array2<T>);

impl<T: Scalar> GazeInput<T> {
    pub fn from_normalized(norm: &NormalizedGaze) -> Self {
        Self(norm.to_matrix())
    }

    /// Normalizes the clip's gaze. When the first sample is invalid the
    /// sequence is re-anchored: leading invalid samples take the eye values
    /// of the first valid one and keep `valid = 0`.
    pub fn from_clip(clip: &Clip) -> Result<Self> {
        Ok(Self::from_normalized(&normalize_clip_gaze(&clip.gaze)?))
    }

    pub fn from_matrix(m: Array2<T>) -> Result<Self> {
        if m.ncols() != FEATURE_WIDTH {
            return Err(Error::Shape(format!(
                "gaze feature rows must have {FEATURE_WIDTH} columns, got {}",
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.0
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }
}

pub fn normalize_clip_gaze(samples: &[GazeSample]) -> Result<NormalizedGaze> {
    match normalize_samples(samples) {
        Err(Error::InvalidAnchor { first_valid }) => {
            let anchor = samples[first_valid];
            let patched: Vec<GazeSample> = samples
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if i < first_valid {
                        GazeSample {
                            fix3d: anchor.fix3d,
                            dir3d: anchor.dir3d,
                            g2d: anchor.g2d,
                            depth_m: anchor.depth_m,
                            ..*s
                        }
                    } else {
                        *s
                    }
                })
                .collect();
            let mut norm = normalize_samples(&{
                let mut p = patched.clone();
                p[0].valid = true;
                p
            })?;
            norm.rows[0][crate::gaze::col::VALID] = 0.0;
            Ok(norm)
        }
        other => other,
    }
}

/// Geometry of the teacher's pixel inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualGeometry {
    pub image_size: usize,
    pub grid_p: usize,
    pub patch_len: usize,
    pub sigma: f64,
    pub crop_frac: f64,
    pub crop_size: usize,
    pub crop_patch: usize,
}

impl VisualGeometry {
    pub fn from_attention(att: &AttentionConfig, crop_frac: f64, crop_size: usize, crop_patch: usize) -> Self {
        Self {
            image_size: att.image_size(),
            grid_p: att.grid_p,
            patch_len: att.patch_len,
            sigma: att.sigma,
            crop_frac,
            crop_size,
            crop_patch,
        }
    }

    pub fn patches_per_frame(&self) -> usize {
        self.grid_p * self.grid_p
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_len * self.patch_len
    }

    pub fn crop_patches(&self) -> usize {
        (self.crop_size / self.crop_patch).pow(2)
    }

    pub fn crop_patch_dim(&self) -> usize {
        3 * self.crop_patch * self.crop_patch
    }
}

/// Pixel-derived teacher tensors for one clip.
#[derive(Debug, Clone)]
pub struct VisualInput<T> {
    /// `[frames * p*p, 3 L^2]`, frame-major, patches row-major.
    pub patches: Array2<T>,
    /// `[frames, p*p]` gaze Gaussian per frame.
    pub gaze_maps: Array2<T>,
    /// `[frames * q, 3 k^2]` patches of each gaze crop.
    pub crop_patches: Array2<T>,
}

fn pixel<T: Scalar>(v: u8) -> T {
    T::of((f64::from(v) / 255.0 - 0.5) / 0.25)
}

/// Splits an image into `patch x patch` tiles (row-major), each flattened
/// as `(y, x, channel)`.
pub fn patchify<T: Scalar>(img: &RgbImage, patch: usize) -> Array2<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (pw, ph) = (w / patch, h / patch);
    let mut out = Array2::zeros((pw * ph, 3 * patch * patch));
    for py in 0..ph {
        for px in 0..pw {
            let row = py * pw + px;
            let mut k = 0;
            for y in 0..patch {
                for x in 0..patch {
                    let p = img.get_pixel((px * patch + x) as u32, (py * patch + y) as u32);
                    for c in 0..3 {
                        out[[row, k]] = pixel(p[c]);
                        k += 1;
                    }
                }
            }
        }
    }
    out
}

/// Square crop window `[x0, x0 + size) x [y0, y0 + size)` centered on the
/// gaze point and shifted to lie inside the image.
pub fn crop_box(g2d: [f64; 2], crop_frac: f64, width: u32, height: u32) -> (u32, u32, u32) {
    let side = width.min(height);
    let size = ((crop_frac * f64::from(side)).ceil() as u32).clamp(1, side);
    let place = |u: f64, extent: u32| -> u32 {
        let center = u.clamp(0.0, 1.0) * f64::from(extent);
        let start = (center - f64::from(size) / 2.0).round();
        start.clamp(0.0, f64::from(extent - size)) as u32
    };
    (place(g2d[0], width), place(g2d[1], height), size)
}

pub fn gaze_crop(img: &RgbImage, g2d: [f64; 2], crop_frac: f64, out_size: usize) -> RgbImage {
    let (x0, y0, size) = crop_box(g2d, crop_frac, img.width(), img.height());
    let view = imageops::crop_imm(img, x0, y0, size, size).to_image();
    if size as usize == out_size {
        view
    } else {
        imageops::resize(&view, out_size as u32, out_size as u32, FilterType::Triangle)
    }
}

impl<T: Scalar> VisualInput<T> {
    pub fn from_clip(clip: &Clip, geo: &VisualGeometry) -> Result<Self> {
        let frames = clip
            .frames
            .as_ref()
            .ok_or_else(|| Error::UnsupportedModality("the teacher requires video frames".into()))?;
        let n = frames.len();
        let pp = geo.patches_per_frame();
        let mut patches = Array2::zeros((n * pp, geo.patch_dim()));
        let mut gaze_maps = Array2::zeros((n, pp));
        let q = geo.crop_patches();
        let mut crop_patches = Array2::zeros((n * q, geo.crop_patch_dim()));
        for (f, (img, s)) in frames.iter().zip(&clip.gaze).enumerate() {
            let sized;
            let img = if img.width() as usize == geo.image_size && img.height() as usize == geo.image_size {
                img
            } else {
                sized = imageops::resize(img, geo.image_size as u32, geo.image_size as u32, FilterType::Triangle);
                &sized
            };
            patches
                .slice_mut(ndarray::s![f * pp..(f + 1) * pp, ..])
                .assign(&patchify::<T>(img, geo.patch_len));
            let c = gaze_patch(s.g2d, geo.grid_p, geo.patch_len, geo.image_size);
            let map = gaussian_map::<T>(c, geo.grid_p, geo.sigma)?;
            gaze_maps
                .row_mut(f)
                .assign(&map.into_shape_with_order(pp).expect("p*p cells"));
            let crop = gaze_crop(img, s.g2d, geo.crop_frac, geo.crop_size);
            crop_patches
                .slice_mut(ndarray::s![f * q..(f + 1) * q, ..])
                .assign(&patchify::<T>(&crop, geo.crop_patch));
        }
        Ok(Self {
            patches,
            gaze_maps,
            crop_patches,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_box_clamps_inside_image() {
        // size ceil(0.3 * 64) = 20; centered at 57.6 it would overflow, so it
        // is shifted to [44, 64).
        assert_eq!(crop_box([0.9, 0.9], 0.3, 64, 64), (44, 44, 20));
        assert_eq!(crop_box([0.5, 0.5], 1.0, 64, 64), (0, 0, 64));
        assert_eq!(crop_box([0.0, 0.0], 0.25, 64, 64), (0, 0, 16));
    }

    #[test]
    fn patchify_orders_rows_then_columns() {
        let img = RgbImage::from_fn(4, 4, |x, y| image::Rgb([(x * 10) as u8, (y * 10) as u8, 0]));
        let p: Array2<f64> = patchify(&img, 2);
        assert_eq!(p.dim(), (4, 12));
        // patch 1 is the top-right tile: first pixel x = 2, y = 0
        assert_eq!(p[[1, 0]], pixel::<f64>(20));
        assert_eq!(p[[1, 1]], pixel::<f64>(0));
        // patch 2 is bottom-left: first pixel x = 0, y = 2
        assert_eq!(p[[2, 1]], pixel::<f64>(20));
    }
}
