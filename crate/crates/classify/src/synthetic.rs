//! Generated feature sets for tests and demos.

use dlp2c_core::rng::Rng;
use ndarray::Array2;

use crate::dataset::FeatureDataset;

/// `n` points split evenly over `classes` spherical unit Gaussians whose
/// means lie `separation` apart along random directions.
pub fn gaussian_classes(n: usize, dim: usize, classes: usize, separation: f64, seed: u64) -> FeatureDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm * separation / std::f64::consts::SQRT_2).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| means[labels[i]][j] + rng.normal());
    FeatureDataset::new(x, labels, Vec::new(), seed).expect("consistent shapes")
}

/// XOR of the signs of two uniform coordinates in `[-1, 1]`.
pub fn xor(n: usize, seed: u64) -> FeatureDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, 2), |_| 2.0 * rng.next_f64() - 1.0);
    let labels = x.outer_iter().map(|r| usize::from((r[0] > 0.0) != (r[1] > 0.0))).collect();
    FeatureDataset::new(x, labels, Vec::new(), seed).expect("consistent shapes")
}

/// Class `c` has value near 1 on its own block of features and small noise
/// elsewhere.
pub fn one_hot_like(per_class: usize, classes: usize, dim: usize, seed: u64) -> FeatureDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let block = (dim / classes).max(1);
    let n = per_class * classes;
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| {
        let hot = j / block == labels[i];
        f64::from(u8::from(hot)) + 0.05 * rng.normal()
    });
    FeatureDataset::new(x, labels, Vec::new(), seed).expect("consistent shapes")
}

/// A chart that is not a layer diagram: axes with a scatter, bar or line
/// series in a random colour.
pub fn chart_figure(seed: u64) -> image::RgbImage {
    let mut rng = Rng::seed_from_u64(seed);
    let (w, h) = (240 + rng.below(240) as u32, 180 + rng.below(180) as u32);
    let mut img = image::RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
    let colour = image::Rgb([rng.below(200) as u8, rng.below(200) as u8, rng.below(200) as u8]);
    let black = image::Rgb([0, 0, 0]);
    let (x0, y0, x1, y1) = (30, 10, w - 10, h - 30);
    let rect = |img: &mut image::RgbImage, ax: u32, ay: u32, bx: u32, by: u32, c| {
        for y in ay.min(by)..=ay.max(by).min(h - 1) {
            for x in ax.min(bx)..=ax.max(bx).min(w - 1) {
                img.put_pixel(x, y, c);
            }
        }
    };
    rect(&mut img, x0, y1, x1, y1 + 1, black);
    rect(&mut img, x0, y0, x0 + 1, y1, black);
    let span_y = (y1 - y0) as f64;
    match rng.below(3) {
        0 => {
            for _ in 0..40 + rng.below(80) {
                let x = x0 + 4 + rng.below((x1 - x0 - 8) as u64) as u32;
                let y = y0 + 2 + rng.below((y1 - y0 - 6) as u64) as u32;
                rect(&mut img, x, y, x + 2, y + 2, colour);
            }
        }
        1 => {
            let bars = 3 + rng.below(8) as u32;
            let step = (x1 - x0 - 10) / bars;
            for b in 0..bars {
                let top = y1 - 2 - (rng.next_f64() * (span_y - 10.0)) as u32;
                let bx = x0 + 6 + b * step;
                rect(&mut img, bx, top, bx + step * 2 / 3, y1 - 1, colour);
            }
        }
        _ => {
            let (a, f, p) = (0.2 + 0.2 * rng.next_f64(), 1.0 + 4.0 * rng.next_f64(), rng.next_f64() * 6.0);
            for x in x0 + 2..x1 {
                let t = (x - x0) as f64 / (x1 - x0) as f64;
                let v = 0.5 + a * (f * std::f64::consts::TAU * t + p).sin();
                let y = y1 - 2 - (v * (span_y - 6.0)) as u32;
                rect(&mut img, x, y, x, y + 1, colour);
            }
        }
    }
    img
}
