//! Aliasing-free raster primitives. Coordinates are pixels; a pixel is
//! painted when its centre falls inside the shape.

use image::{Rgb, RgbImage};

use crate::font::{Font, GLYPH_ROWS};

pub type Color = [u8; 3];

pub struct Canvas {
    pub img: RgbImage,
}

impl Canvas {
    pub fn new(w: u32, h: u32, bg: Color) -> Canvas {
        Canvas {
            img: RgbImage::from_pixel(w, h, Rgb(bg)),
        }
    }

    fn put(&mut self, x: i64, y: i64, c: Color) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }

    /// Paints pixels in the integer box `[x0, x1) × [y0, y1)` accepted by
    /// `inside(cx, cy)` on pixel centres.
    fn paint(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, c: Color, inside: impl Fn(f64, f64) -> bool) {
        let (w, h) = (self.img.width() as f64, self.img.height() as f64);
        let xs = x0.floor().max(0.0) as i64;
        let ys = y0.floor().max(0.0) as i64;
        let xe = x1.ceil().min(w) as i64;
        let ye = y1.ceil().min(h) as i64;
        for y in ys..ye {
            for x in xs..xe {
                if inside(x as f64 + 0.5, y as f64 + 0.5) {
                    self.put(x, y, c);
                }
            }
        }
    }

    pub fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, c: Color) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.put(xx, yy, c);
            }
        }
    }

    /// Rectangle outline drawn inward with thickness `t`.
    pub fn rect_outline(&mut self, x: i64, y: i64, w: i64, h: i64, t: i64, c: Color) {
        self.fill_rect(x, y, w, t, c);
        self.fill_rect(x, y + h - t, w, t, c);
        self.fill_rect(x, y, t, h, c);
        self.fill_rect(x + w - t, y, t, h, c);
    }

    /// Rounded rectangle with corner radius `r`, filled with `fill` and
    /// outlined inward with thickness `t`.
    pub fn rounded_rect(&mut self, x: i64, y: i64, w: i64, h: i64, r: i64, t: i64, fill: Color, border: Color) {
        let (xf, yf, wf, hf, rf, tf) = (x as f64, y as f64, w as f64, h as f64, r as f64, t as f64);
        let outer = move |px: f64, py: f64| in_rounded(px, py, xf, yf, wf, hf, rf);
        let inner = move |px: f64, py: f64| in_rounded(px, py, xf + tf, yf + tf, wf - 2.0 * tf, hf - 2.0 * tf, (rf - tf).max(0.0));
        self.paint(xf, yf, xf + wf, yf + hf, border, move |px, py| outer(px, py) && !inner(px, py));
        self.paint(xf, yf, xf + wf, yf + hf, fill, inner);
    }

    /// Thick segment with flat ends, extended by `ext0`/`ext1` beyond its
    /// endpoints.
    pub fn segment(&mut self, a: (f64, f64), b: (f64, f64), t: f64, ext0: f64, ext1: f64, c: Color) {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            return;
        }
        let (ux, uy) = (dx / len, dy / len);
        let half = t / 2.0;
        let pad = half + ext0.max(ext1) + 1.0;
        self.paint(
            a.0.min(b.0) - pad,
            a.1.min(b.1) - pad,
            a.0.max(b.0) + pad,
            a.1.max(b.1) + pad,
            c,
            |px, py| {
                let (rx, ry) = (px - a.0, py - a.1);
                let along = rx * ux + ry * uy;
                let across = (rx * uy - ry * ux).abs();
                along >= -ext0 && along <= len + ext1 && across <= half
            },
        );
    }

    /// Quarter-circle stroke around `center` between two angles (radians,
    /// `a0 < a1`, screen coordinates with y down).
    pub fn arc(&mut self, center: (f64, f64), r: f64, a0: f64, a1: f64, t: f64, c: Color) {
        let half = t / 2.0;
        let pad = r + half + 1.0;
        self.paint(center.0 - pad, center.1 - pad, center.0 + pad, center.1 + pad, c, |px, py| {
            let (dx, dy) = (px - center.0, py - center.1);
            let d = (dx * dx + dy * dy).sqrt();
            let mut ang = dy.atan2(dx);
            if ang < a0 - 1e-9 {
                ang += std::f64::consts::TAU;
            }
            (d - r).abs() <= half && ang >= a0 - 1e-9 && ang <= a1 + 1e-9
        });
    }

    pub fn triangle(&mut self, p: [(f64, f64); 3], c: Color) {
        let xs = p.map(|q| q.0);
        let ys = p.map(|q| q.1);
        let min = |v: [f64; 3]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: [f64; 3]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let edge = |a: (f64, f64), b: (f64, f64), x: f64, y: f64| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
        self.paint(min(xs), min(ys), max(xs), max(ys), c, |x, y| {
            let e = [edge(p[0], p[1], x, y), edge(p[1], p[2], x, y), edge(p[2], p[0], x, y)];
            e.iter().all(|v| *v >= 0.0) || e.iter().all(|v| *v <= 0.0)
        });
    }

    /// Draws `text` with its top-left corner at `(x, y)` using square dots
    /// of `dot` pixels.
    pub fn text(&mut self, font: &Font, text: &str, x: i64, y: i64, dot: i64, c: Color) {
        for (i, ch) in text.chars().enumerate() {
            let rows = font.glyph(ch);
            let gx = x + (i * font.pitch) as i64 * dot;
            for row in 0..GLYPH_ROWS {
                for col in 0..font.width {
                    if font.ink(&rows, col, row) {
                        self.fill_rect(gx + col as i64 * dot, y + row as i64 * dot, dot, dot, c);
                    }
                }
            }
        }
    }
}

fn in_rounded(px: f64, py: f64, x: f64, y: f64, w: f64, h: f64, r: f64) -> bool {
    if px < x || py < y || px > x + w || py > y + h {
        return false;
    }
    let cx = px.clamp(x + r, x + w - r);
    let cy = py.clamp(y + r, y + h - r);
    let (dx, dy) = (px - cx, py - cy);
    dx * dx + dy * dy <= r * r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ink(c: &Canvas) -> usize {
        c.img.pixels().filter(|p| p.0 != [255; 3]).count()
    }

    #[test]
    fn axis_segment_has_exact_thickness() {
        let mut c = Canvas::new(40, 40, [255; 3]);
        c.segment((10.0, 20.0), (30.0, 20.0), 2.0, 0.0, 0.0, [0; 3]);
        assert_eq!(ink(&c), 40);
        assert_eq!(c.img.get_pixel(10, 19).0, [0; 3]);
        assert_eq!(c.img.get_pixel(10, 21).0, [255; 3]);
    }

    #[test]
    fn outline_and_triangle() {
        let mut c = Canvas::new(50, 50, [255; 3]);
        c.rect_outline(5, 5, 20, 10, 2, [0; 3]);
        assert_eq!(ink(&c), 2 * 20 * 2 + 2 * 6 * 2);
        let mut t = Canvas::new(50, 50, [255; 3]);
        t.triangle([(10.0, 10.0), (22.0, 10.0), (16.0, 22.0)], [0; 3]);
        let n = ink(&t);
        assert!((60..=84).contains(&n), "{n}");
    }

    #[test]
    fn rounded_rect_is_closed() {
        let mut c = Canvas::new(60, 40, [255; 3]);
        c.rounded_rect(5, 5, 50, 30, 8, 2, [200, 230, 255], [0; 3]);
        assert_eq!(c.img.get_pixel(5, 5).0, [255; 3]);
        assert_eq!(c.img.get_pixel(30, 5).0, [0; 3]);
        assert_eq!(c.img.get_pixel(30, 20).0, [200, 230, 255]);
    }
}
