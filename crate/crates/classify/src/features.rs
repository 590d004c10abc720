//! A small fixed-length image descriptor: a 16x16 grid of mean ink
//! darkness followed by a 64-bin histogram of gradient orientations.

use image::{DynamicImage, GrayImage};

use crate::ClassifyError;

pub const GRID: usize = 16;
pub const ORIENTATION_BINS: usize = 64;
pub const FEATURE_DIM: usize = GRID * GRID + ORIENTATION_BINS;

/// Darkness is `1 - luminance` in `[0, 1]`, so a white background is zero; the histogram is weighted by gradient
/// magnitude and sums to 1 (all zero for a flat image).
pub fn cheap_features(image: &DynamicImage) -> Vec<f64> {
    let gray = image.to_luma8();
    let mut out = grid_means(&gray);
    out.extend(orientation_histogram(&gray));
    out
}

pub fn cheap_features_from_bytes(bytes: &[u8]) -> Result<Vec<f64>, ClassifyError> {
    let img = image::load_from_memory(bytes).map_err(|e| ClassifyError::Decode(e.to_string()))?;
    Ok(cheap_features(&img))
}

fn grid_means(gray: &GrayImage) -> Vec<f64> {
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let mut out = Vec::with_capacity(GRID * GRID);
    for gy in 0..GRID {
        let (y0, y1) = (gy * h / GRID, ((gy + 1) * h / GRID).max(gy * h / GRID + 1).min(h.max(1)));
        for gx in 0..GRID {
            let (x0, x1) = (gx * w / GRID, ((gx + 1) * w / GRID).max(gx * w / GRID + 1).min(w.max(1)));
            let (mut sum, mut n) = (0.0, 0.0);
            for y in y0..y1.min(h) {
                for x in x0..x1.min(w) {
                    sum += gray.get_pixel(x as u32, y as u32)[0] as f64;
                    n += 1.0;
                }
            }
            out.push(if n > 0.0 { 1.0 - sum / (255.0 * n) } else { 0.0 });
        }
    }
    out
}

fn orientation_histogram(gray: &GrayImage) -> Vec<f64> {
    let (w, h) = (gray.width() as i64, gray.height() as i64);
    let px = |x: i64, y: i64| gray.get_pixel(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32)[0] as f64;
    let mut hist = vec![0.0; ORIENTATION_BINS];
    for y in 0..h {
        for x in 0..w {
            let gx = px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2.0 * px(x - 1, y) - px(x - 1, y + 1);
            let gy = px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2.0 * px(x, y - 1) - px(x + 1, y - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag < 1e-9 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
            let bin = ((angle / std::f64::consts::TAU * ORIENTATION_BINS as f64) as usize).min(ORIENTATION_BINS - 1);
            hist[bin] += mag;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
    hist
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
