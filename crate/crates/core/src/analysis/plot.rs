//! Minimal static histogram rendering (no text; the file name names the
//! metric and groups are drawn side by side in fixed colors).

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const WIDTH: u32 = 480;
const HEIGHT: u32 = 240;
const MARGIN: u32 = 16;
const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

/// Renders per-group histograms over a shared bin range as grouped bars.
pub fn histogram_png(path: &Path, groups: &BTreeMap<usize, Vec<f64>>, bins: usize) -> Result<()> {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let all: Vec<f64> = groups.values().flatten().copied().filter(|v| v.is_finite()).collect();
    if !all.is_empty() && bins > 0 {
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if hi > lo { hi - lo } else { 1.0 };
        let counts: Vec<Vec<f64>> = groups
            .values()
            .map(|vals| {
                let mut c = vec![0.0; bins];
                for &v in vals.iter().filter(|v| v.is_finite()) {
                    let b = (((v - lo) / range) * bins as f64) as usize;
                    c[b.min(bins - 1)] += 1.0;
                }
                let total: f64 = c.iter().sum::<f64>().max(1.0);
                c.iter().map(|x| x / total).collect()
            })
            .collect();
        let peak = counts.iter().flatten().copied().fold(0.0, f64::max).max(1e-12);
        let plot_w = WIDTH - 2 * MARGIN;
        let plot_h = HEIGHT - 2 * MARGIN;
        let bin_w = plot_w / bins as u32;
        let bar_w = (bin_w / counts.len().max(1) as u32).max(1);
        for (g, c) in counts.iter().enumerate() {
            let color = Rgb(PALETTE[g % PALETTE.len()]);
            for (b, &frac) in c.iter().enumerate() {
                let h = ((frac / peak) * plot_h as f64).round() as u32;
                let x0 = MARGIN + b as u32 * bin_w + g as u32 * bar_w;
                for x in x0..(x0 + bar_w).min(WIDTH - MARGIN) {
                    for y in (HEIGHT - MARGIN - h)..(HEIGHT - MARGIN) {
                        img.put_pixel(x, y, color);
                    }
                }
            }
        }
    }
    for x in MARGIN..WIDTH - MARGIN {
        img.put_pixel(x, HEIGHT - MARGIN, Rgb([0, 0, 0]));
    }
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
