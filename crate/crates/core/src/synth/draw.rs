use image::{Rgb, RgbImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::Roi;

const PALETTE: [[u8; 3]; 6] = [
    [220, 40, 40],
    [40, 80, 220],
    [40, 180, 60],
    [220, 200, 40],
    [190, 50, 190],
    [40, 190, 190],
];

/// Cue color of a class.
pub fn class_color(class: usize, k: usize) -> [u8; 3] {
    if k <= PALETTE.len() {
        return PALETTE[class];
    }
    let h = class as f64 / k as f64 * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 220.0) as u8, (g * 220.0) as u8, (b * 220.0) as u8]
}

/// Static content of one recording's scene.
#[derive(Debug, Clone)]
pub struct SceneLayout {
    pub background: [u8; 3],
    /// Region rectangles with their tint.
    pub regions: Vec<([f64; 4], [u8; 3])>,
    /// Distractor disks `(u, v, color)` drawn in class colors.
    pub distractors: Vec<(f64, f64, [u8; 3])>,
    pub noise: f64,
}

impl SceneLayout {
    pub fn random<R: Rng>(k: usize, rois: &[Roi], rng: &mut R) -> Self {
        let base: u8 = rng.gen_range(100..140);
        let regions = rois
            .iter()
            .map(|r| {
                let tint = [
                    base.saturating_add(rng.gen_range(0..30)),
                    base.saturating_add(rng.gen_range(0..30)),
                    base.saturating_add(rng.gen_range(0..30)),
                ];
                (r.rect, tint)
            })
            .collect();
        let distractors = (0..2)
            .map(|_| {
                (
                    rng.gen_range(0.1..0.9),
                    rng.gen_range(0.1..0.9),
                    class_color(rng.gen_range(0..k), k),
                )
            })
            .collect();
        Self {
            background: [base, base, base],
            regions,
            distractors,
            noise: 6.0,
        }
    }
}

fn disk(img: &mut RgbImage, cx: f64, cy: f64, r: f64, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (x0, x1) = (((cx - r).floor() as i64).max(0), ((cx + r).ceil() as i64).min(w - 1));
    let (y0, y1) = (((cy - r).floor() as i64).max(0), ((cy + r).ceil() as i64).min(h - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= r * r {
                img.put_pixel(x as u32, y as u32, Rgb(color));
            }
        }
    }
}

/// Draws the scene with a cue disk under the gaze point.
pub fn draw_frame<R: Rng>(layout: &SceneLayout, size: u32, g2d: [f64; 2], cue: [u8; 3], rng: &mut R) -> RgbImage {
    let s = f64::from(size);
    let mut img = RgbImage::from_pixel(size, size, Rgb(layout.background));
    for (rect, tint) in &layout.regions {
        let (x0, y0) = ((rect[0] * s) as u32, (rect[1] * s) as u32);
        let (x1, y1) = (((rect[2] * s) as u32).min(size), ((rect[3] * s) as u32).min(size));
        for y in y0..y1 {
            for x in x0..x1 {
                img.put_pixel(x, y, Rgb(*tint));
            }
        }
    }
    let small = s / 16.0;
    for &(u, v, c) in &layout.distractors {
        disk(&mut img, u * s, v * s, small, c);
    }
    disk(&mut img, g2d[0] * s, g2d[1] * s, s / 10.0, cue);
    let noise = Normal::new(0.0, layout.noise).expect("finite");
    for p in img.pixels_mut() {
        for c in p.0.iter_mut() {
            *c = (f64::from(*c) + noise.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}
