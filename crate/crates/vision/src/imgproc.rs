//! Binary-image primitives: Gaussian adaptive threshold, Canny edges,
//! connected components and Moore-neighbour contour tracing.

use image::{DynamicImage, GrayImage};

/// Row-major bit image; `true` is ink (or edge, or region, by context).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub w: usize,
    pub h: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(w: usize, h: usize) -> Mask {
        Mask {
            w,
            h,
            data: vec![false; w * h],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.w + x]
    }

    /// Out-of-range coordinates read as `false`.
    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h && self.data[y as usize * self.w + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.w + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Ink pixels in the clipped window `[x0, x1) × [y0, y1)`.
    pub fn count_in(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> usize {
        let (xs, ys) = (x0.max(0) as usize, y0.max(0) as usize);
        let (xe, ye) = (x1.clamp(0, self.w as i64) as usize, y1.clamp(0, self.h as i64) as usize);
        (ys..ye).map(|y| (xs..xe).filter(|&x| self.get(x, y)).count()).sum()
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Mask {
        let mut m = Mask::new(w, h);
        for yy in 0..h {
            for xx in 0..w {
                m.set(xx, yy, self.get_i((x + xx) as i64, (y + yy) as i64));
            }
        }
        m
    }

    /// Ink as 0 and background as 255.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.w as u32, self.h as u32, |x, y| image::Luma([if self.get(x as usize, y as usize) { 0 } else { 255 }]))
    }

    /// Pixels darker than 128 are ink.
    pub fn from_image(img: &GrayImage) -> Mask {
        Mask {
            w: img.width() as usize,
            h: img.height() as usize,
            data: img.pixels().map(|p| p.0[0] < 128).collect(),
        }
    }
}

pub fn to_gray(image: &DynamicImage) -> GrayImage {
    match image {
        DynamicImage::ImageLuma8(g) => g.clone(),
        other => other.to_luma8(),
    }
}

/// Normalised 1-D Gaussian of odd length `size`; the width follows the
/// usual rule `sigma = 0.3 ((size - 1) / 2 - 1) + 0.8`.
pub fn gaussian_kernel(size: usize) -> Vec<f32> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let c = (size / 2) as f64;
    let k: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter().map(|v| (v / s) as f32).collect()
}

/// Separable convolution with edge replication.
pub fn gaussian_blur(img: &GrayImage, size: usize) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let k = gaussian_kernel(size);
    let r = size / 2;
    let src: Vec<f32> = img.as_raw().iter().map(|v| *v as f32).collect();
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0f32;
            for (i, kv) in k.iter().enumerate() {
                let xx = (x + i).saturating_sub(r).min(w - 1);
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for (i, kv) in k.iter().enumerate() {
        for y in 0..h {
            let yy = (y + i).saturating_sub(r).min(h - 1);
            let (dst, srow) = (&mut out[y * w..(y + 1) * w], &tmp[yy * w..(yy + 1) * w]);
            for x in 0..w {
                dst[x] += kv * srow[x];
            }
        }
    }
    out
}

/// A pixel is ink when it is not brighter than its Gaussian-weighted
/// neighbourhood mean minus `c`. The caller guarantees the image is at
/// least `block` pixels in each direction.
pub fn adaptive_threshold(img: &GrayImage, block: usize, c: f64) -> Mask {
    let mean = gaussian_blur(img, block);
    Mask {
        w: img.width() as usize,
        h: img.height() as usize,
        data: img
            .as_raw()
            .iter()
            .zip(&mean)
            .map(|(v, m)| (*v as f64) <= *m as f64 - c)
            .collect(),
    }
}

/// Canny edge map of a grey image: Sobel gradients with L1 magnitude,
/// non-maximum suppression along the quantised gradient direction and
/// hysteresis between `low` and `high`.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> Mask {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = |x: i64, y: i64| img.as_raw()[y.clamp(0, h as i64 - 1) as usize * w + x.clamp(0, w as i64 - 1) as usize] as i32;
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    let mut mag = vec![0i32; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let dx = px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2 * px(x - 1, y) - px(x - 1, y + 1);
            let dy = px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1);
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.abs() + dy.abs();
        }
    }
    let m = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    const TAN22: f64 = 0.414_213_56;
    const TAN67: f64 = 2.414_213_56;
    // 0 none, 1 weak, 2 strong
    let mut state = vec![0u8; w * h];
    let mut stack = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if (v as f64) < low {
                continue;
            }
            let (ax, ay) = (gx[i].abs() as f64, gy[i].abs() as f64);
            let keep = if ay <= ax * TAN22 {
                v > m(x - 1, y) && v >= m(x + 1, y)
            } else if ay > ax * TAN67 {
                v > m(x, y - 1) && v >= m(x, y + 1)
            } else if (gx[i] > 0) == (gy[i] > 0) {
                v > m(x - 1, y - 1) && v >= m(x + 1, y + 1)
            } else {
                v > m(x + 1, y - 1) && v >= m(x - 1, y + 1)
            };
            if keep {
                if v as f64 >= high {
                    state[i] = 2;
                    stack.push(i);
                } else {
                    state[i] = 1;
                }
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in NEIGHBOURS_8 {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                let j = ny as usize * w + nx as usize;
                if state[j] == 1 {
                    state[j] = 2;
                    stack.push(j);
                }
            }
        }
    }
    Mask {
        w,
        h,
        data: state.into_iter().map(|s| s == 2).collect(),
    }
}

pub const NEIGHBOURS_4: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
pub const NEIGHBOURS_8: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Pixel indices (`y * w + x`) in discovery order.
    pub pixels: Vec<usize>,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub touches_border: bool,
}

impl Component {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// Connected components of the `true` pixels, in raster order of their
/// first pixel, with 4- or 8-connectivity.
pub fn components(mask: &Mask, eight: bool) -> Vec<Component> {
    let (w, h) = (mask.w, mask.h);
    let mut seen = vec![false; w * h];
    let nb: &[(i64, i64)] = if eight { &NEIGHBOURS_8 } else { &NEIGHBOURS_4 };
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut c = Component {
            pixels: Vec::new(),
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
            touches_border: false,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            c.pixels.push(i);
            c.x0 = c.x0.min(x);
            c.x1 = c.x1.max(x);
            c.y0 = c.y0.min(y);
            c.y1 = c.y1.max(y);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                c.touches_border = true;
            }
            for (dx, dy) in nb {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    let j = ny as usize * w + nx as usize;
                    if mask.data[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(c);
    }
    out
}

/// Outer boundary of the 8-connected region containing `start`, which must
/// be its first pixel in raster order. Moore-neighbour tracing that stops
/// when the first move would repeat; the loop repeats the start pixel last.
pub fn moore_trace(inside: impl Fn(i64, i64) -> bool, start: (i64, i64), max_steps: usize) -> Vec<(i64, i64)> {
    // clockwise in screen coordinates starting west
    const DIRS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];
    let mut contour = vec![start];
    let mut cur = start;
    // the west neighbour of the first pixel is outside
    let mut back = 0usize;
    for _ in 0..max_steps {
        let found = (1..=8).map(|k| (back + k) % 8).find_map(|d| {
            let p = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            inside(p.0, p.1).then_some((p, d))
        });
        let Some((next, d)) = found else {
            return contour;
        };
        if cur == start && contour.len() > 1 && next == contour[1] {
            break;
        }
        let prev = (cur.0 + DIRS[(d + 7) % 8].0, cur.1 + DIRS[(d + 7) % 8].1);
        let rel = (prev.0 - next.0, prev.1 - next.1);
        back = DIRS.iter().position(|q| *q == rel).unwrap_or(0);
        cur = next;
        contour.push(cur);
    }
    contour
}

/// Area enclosed by a closed polygon.
pub fn shoelace(points: &[(i64, i64)]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let n = points.len();
    let mut s = 0i64;
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    (s as f64 / 2.0).abs()
}

/// Geodesic breadth-first distances inside an 8-connected pixel set.
pub fn geodesic(pixels: &[usize], w: usize, from: usize) -> std::collections::HashMap<usize, u32> {
    let set: std::collections::HashSet<usize> = pixels.iter().copied().collect();
    let mut dist = std::collections::HashMap::with_capacity(pixels.len());
    let mut q = std::collections::VecDeque::new();
    dist.insert(from, 0);
    q.push_back(from);
    while let Some(i) = q.pop_front() {
        let d = dist[&i];
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in NEIGHBOURS_8 {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if set.contains(&j) && !dist.contains_key(&j) {
                dist.insert(j, d + 1);
                q.push_back(j);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn rect_image(w: u32, h: u32, r: (u32, u32, u32, u32), t: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let inside = x >= r.0 && x < r.0 + r.2 && y >= r.1 && y < r.1 + r.3;
            let core = x >= r.0 + t && x < r.0 + r.2 - t && y >= r.1 + t && y < r.1 + r.3 - t;
            Luma([if inside && !core { 0 } else { 255 }])
        })
    }

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(31);
        assert!((k.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        assert!((k[0] - k[30]).abs() < 1e-9 && k[15] > k[14]);
        // sigma 5 for a 31 tap kernel
        let ratio = (k[15] / k[20]) as f64;
        assert!((ratio - (25.0f64 / 50.0).exp()).abs() < 1e-4);
    }

    #[test]
    fn threshold_marks_outline_only() {
        let white = GrayImage::from_pixel(64, 64, Luma([255]));
        assert_eq!(adaptive_threshold(&white, 31, 5.0).count(), 0);
        let img = rect_image(80, 60, (10, 10, 50, 30), 2);
        let m = adaptive_threshold(&img, 31, 5.0);
        let expected = (0..60).flat_map(|y| (0..80).map(move |x| (x, y))).filter(|&(x, y)| img.get_pixel(x, y).0[0] == 0).count();
        assert_eq!(m.count(), expected);
        assert!(m.get(10, 10) && !m.get(30, 25));
    }

    #[test]
    fn canny_finds_boundaries_and_blur_is_flat() {
        let img = rect_image(80, 60, (10, 10, 50, 30), 2);
        let e = canny(&img, 50.0, 150.0);
        assert!(e.count() >= 150, "{}", e.count());
        assert!(!e.get(30, 25) && !e.get(2, 2));
        let flat = GrayImage::from_pixel(40, 40, Luma([200]));
        assert!(gaussian_blur(&flat, 31).iter().all(|v| (v - 200.0).abs() < 1e-2));
        assert_eq!(canny(&flat, 50.0, 150.0).count(), 0);
    }

    #[test]
    fn components_and_trace() {
        let img = rect_image(80, 60, (10, 10, 50, 30), 2);
        let ink = Mask::from_image(&img);
        let cs = components(&ink, true);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].pixels.len(), 2 * 50 * 2 + 2 * 26 * 2);
        let bg: Vec<Component> = components(&Mask { data: ink.data.iter().map(|b| !b).collect(), ..ink.clone() }, false);
        assert_eq!(bg.len(), 2);
        let hole = bg.iter().find(|c| !c.touches_border).unwrap();
        assert_eq!((hole.width(), hole.height()), (46, 26));
        let inside = |x: i64, y: i64| (12..58).contains(&x) && (12..38).contains(&y);
        let c = moore_trace(inside, (12, 12), 10_000);
        assert_eq!(c.first(), c.last());
        assert_eq!(c.len() - 1, 2 * (45 + 25));
        assert_eq!(shoelace(&c), 45.0 * 25.0);
    }

    #[test]
    fn trace_handles_thin_and_single_pixels() {
        let c = moore_trace(|x, y| (x, y) == (3, 3), (3, 3), 100);
        assert_eq!(c, vec![(3, 3)]);
        let line = |x: i64, y: i64| y == 0 && (0..5).contains(&x);
        let c = moore_trace(line, (0, 0), 100);
        assert_eq!(c.len(), 9);
        assert_eq!(shoelace(&c), 0.0);
    }

    #[test]
    fn geodesic_distance_along_an_l() {
        let w = 10;
        let pix: Vec<usize> = (0..5).map(|x| x).chain((1..5).map(|y| y * w + 4)).collect();
        let d = geodesic(&pix, w, 0);
        assert_eq!(d[&(4 * w + 4)], 7);
    }
}
