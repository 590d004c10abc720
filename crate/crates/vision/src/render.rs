//! Rasterisation of a [`Layout`] and the ground-truth sidecar.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};

use dlp2c_core::artifact::{BBox, GroundTruthSidecar, SidecarEdge, SidecarNode, SIDECAR_SUFFIX};
use dlp2c_core::graph::{validate, CompGraph, LayerKind};
use dlp2c_core::simulator::{write_atomic, ModelSink};
use image::DynamicImage;

use crate::canvas::{Canvas, Color};
use crate::font::Font;
use crate::layout::{layout_with, Layout, LayoutConfig, RenderStyle, Route, DOT, HEAD_HALF, HEAD_LEN, STROKE};
use crate::RenderError;

const WHITE: Color = [255, 255, 255];
const BLACK: Color = [0, 0, 0];
const C_BORDER: Color = [50, 60, 90];
const C_EDGE: Color = [60, 60, 60];
const C_RADIUS: i64 = 8;
const BEND_RADIUS: f64 = 10.0;

/// Pastel fill of a StyleC node; all have luminance above 225 so that
/// adaptive thresholding keeps them as background.
pub fn fill_color(kind: LayerKind) -> Color {
    match kind {
        k if k.is_input() => [255, 236, 179],
        LayerKind::Dense => [210, 235, 255],
        LayerKind::Conv2D => [212, 242, 212],
        LayerKind::Flatten => [235, 225, 252],
        LayerKind::Dropout => [250, 222, 222],
        LayerKind::MaxPool2D => [210, 235, 240],
        LayerKind::AvgPool2D => [235, 235, 200],
        LayerKind::Concat => [255, 220, 240],
        LayerKind::Embed => [220, 250, 235],
        LayerKind::SimpleRnn => [250, 225, 200],
        LayerKind::Lstm => [222, 230, 252],
        _ => [240, 240, 240],
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: DynamicImage,
    pub sidecar: GroundTruthSidecar,
}

pub fn render(graph: &CompGraph, style: RenderStyle, scale: u32) -> Result<Rendered, RenderError> {
    render_with(graph, style, scale, &LayoutConfig::default())
}

/// Validates `graph` (without parameter-domain checks), lays it out and
/// draws it at `scale` pixels per unit.
pub fn render_with(graph: &CompGraph, style: RenderStyle, scale: u32, config: &LayoutConfig) -> Result<Rendered, RenderError> {
    if scale == 0 {
        return Err(RenderError::BadScale);
    }
    let report = validate(graph, false);
    if !report.is_valid() {
        return Err(RenderError::InvalidGraph(report.violations.iter().map(|v| v.to_string()).collect()));
    }
    let l = layout_with(graph, style, config)?;
    let image = draw(&l, style, scale as i64);
    Ok(Rendered {
        image,
        sidecar: sidecar(graph, &l, style, scale),
    })
}

fn sidecar(graph: &CompGraph, l: &Layout, style: RenderStyle, scale: u32) -> GroundTruthSidecar {
    let s = scale as i64;
    GroundTruthSidecar {
        model_id: graph.name.clone(),
        style: style.name().to_string(),
        scale,
        width: (l.width * s) as u32,
        height: (l.height * s) as u32,
        nodes: l
            .nodes
            .iter()
            .map(|n| SidecarNode {
                id: n.id.clone(),
                label: n.label.clone(),
                kind: n.kind.name().to_string(),
                bbox: BBox::new(n.x as u32, n.y as u32, n.w as u32, n.h as u32).scaled(scale),
            })
            .collect(),
        edges: l
            .edges
            .iter()
            .map(|e| SidecarEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
                polyline: e.points.iter().map(|p| [p.0 * s, p.1 * s]).collect(),
            })
            .collect(),
    }
}

fn draw(l: &Layout, style: RenderStyle, s: i64) -> DynamicImage {
    let mut c = Canvas::new((l.width * s) as u32, (l.height * s) as u32, WHITE);
    let t = STROKE * s;
    for n in &l.nodes {
        let (x, y, w, h) = (n.x * s, n.y * s, n.w * s, n.h * s);
        match style {
            RenderStyle::StyleK => c.rect_outline(x, y, w, h, t, BLACK),
            RenderStyle::StyleC => c.rounded_rect(x, y, w, h, C_RADIUS * s, t, fill_color(n.kind), C_BORDER),
        }
        let font = Font::of(n.face);
        let tw = font.text_width(&n.label) as i64 * DOT;
        let tx = n.x + (n.w - tw) / 2;
        let ty = n.y + (n.h - 7 * DOT) / 2;
        c.text(font, &n.label, tx * s, ty * s, DOT * s, BLACK);
    }
    let color = match style {
        RenderStyle::StyleK => BLACK,
        RenderStyle::StyleC => C_EDGE,
    };
    let rounded = style == RenderStyle::StyleC;
    for e in &l.edges {
        let pts: Vec<(f64, f64)> = e.points.iter().map(|p| ((p.0 * s) as f64, (p.1 * s) as f64)).collect();
        draw_arrow(&mut c, &pts, t as f64, s as f64, rounded && matches!(e.route, Route::Side { .. }), color);
    }
    match style {
        RenderStyle::StyleK => DynamicImage::ImageLuma8(DynamicImage::ImageRgb8(c.img).to_luma8()),
        RenderStyle::StyleC => DynamicImage::ImageRgb8(c.img),
    }
}

fn unit(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt().max(1e-9);
    (dx / len, dy / len)
}

/// Polyline with a filled triangular head at its last point. Interior
/// corners are square, or quarter circles when `rounded`.
fn draw_arrow(c: &mut Canvas, pts: &[(f64, f64)], t: f64, s: f64, rounded: bool, color: Color) {
    let n = pts.len();
    let tip = pts[n - 1];
    let u = unit(pts[n - 2], tip);
    let (hl, hh) = (HEAD_LEN as f64 * s, HEAD_HALF as f64 * s);
    let base = (tip.0 - u.0 * hl, tip.1 - u.1 * hl);
    let mut path = pts.to_vec();
    path[n - 1] = base;
    let r = BEND_RADIUS * s;
    for i in 0..n - 1 {
        let (mut a, mut b) = (path[i], path[i + 1]);
        let d = unit(a, b);
        let (mut e0, mut e1) = (0.0, 0.0);
        if i > 0 {
            if rounded {
                a = (a.0 + d.0 * r, a.1 + d.1 * r);
            } else {
                e0 = t / 2.0;
            }
        }
        if i + 2 < n {
            if rounded {
                b = (b.0 - d.0 * r, b.1 - d.1 * r);
            } else {
                e1 = t / 2.0;
            }
        } else {
            e1 = 1.0;
        }
        c.segment(a, b, t, e0, e1, color);
        if rounded && i + 2 < n {
            let p = path[i + 1];
            let d2 = unit(p, path[i + 2]);
            let center = (p.0 + (d2.0 - d.0) * r, p.1 + (d2.1 - d.1) * r);
            let ang = |q: (f64, f64)| (q.1 - center.1).atan2(q.0 - center.0);
            let start = ang((p.0 - d.0 * r, p.1 - d.1 * r));
            let end = ang((p.0 + d2.0 * r, p.1 + d2.1 * r));
            let a0 = if (end - start).rem_euclid(TAU) <= FRAC_PI_2 + 1e-6 { start } else { end };
            c.arc(center, r, a0, a0 + FRAC_PI_2, t, color);
        }
    }
    let nrm = (-u.1, u.0);
    c.triangle(
        [
            tip,
            (base.0 + nrm.0 * hh, base.1 + nrm.1 * hh),
            (base.0 - nrm.0 * hh, base.1 - nrm.1 * hh),
        ],
        color,
    );
}

/// `x.png` -> `x.gt.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    let stem = png.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    png.with_file_name(format!("{stem}{SIDECAR_SUFFIX}"))
}

pub fn encode_png(image: &DynamicImage) -> Result<Vec<u8>, RenderError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    image.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Writes the PNG and its sidecar next to it.
pub fn save(rendered: &Rendered, png: &Path) -> Result<(), RenderError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RenderError::Io { path, source }
    };
    write_atomic(png, &encode_png(&rendered.image)?).map_err(io(png))?;
    let side = sidecar_path(png);
    write_atomic(&side, rendered.sidecar.to_json().as_bytes()).map_err(io(&side))
}

/// Renders every simulated model in the configured styles.
#[derive(Debug, Clone)]
pub struct RenderSink {
    pub styles: Vec<RenderStyle>,
    pub scale: u32,
}

impl Default for RenderSink {
    fn default() -> Self {
        RenderSink {
            styles: RenderStyle::ALL.to_vec(),
            scale: 1,
        }
    }
}

impl ModelSink for RenderSink {
    fn emit(&self, graph: &CompGraph, root: &Path, dir: &str, stem: &str) -> Result<Vec<String>, String> {
        let mut files = Vec::new();
        for style in &self.styles {
            let r = render(graph, *style, self.scale).map_err(|e| e.to_string())?;
            let rel = format!("{dir}/{stem}_{}.png", style.tag());
            save(&r, &root.join(&rel)).map_err(|e| e.to_string())?;
            files.push(rel.clone());
            files.push(format!("{dir}/{stem}_{}{SIDECAR_SUFFIX}", style.tag()));
        }
        Ok(files)
    }
}
