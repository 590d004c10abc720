//! Diagram image to computational graph.

use std::collections::{HashMap, HashSet, VecDeque};

use dlp2c_core::artifact::{Arrow, BBox, Blob, ExtractionDiagnostics, ExtractionResult};
use dlp2c_core::graph::{CompGraph, Edge, LayerKind, Node, Provenance};
use dlp2c_core::lexicon::Lexicon;
use image::{DynamicImage, GrayImage};
use serde::{Deserialize, Serialize};

use crate::imgproc::{adaptive_threshold, canny, components, geodesic, moore_trace, shoelace, to_gray, Component, Mask};
use crate::ocr::{read_builtin, read_external, OcrBackend, OcrText};
use crate::ExtractError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub threshold_block_size: usize,
    pub threshold_c: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub min_node_area_px: f64,
    pub rect_fill_ratio_min: f64,
    /// Endpoint-to-box distance for 2 px strokes; scaled with the measured
    /// stroke width.
    pub snap_radius_px: f64,
    /// Side of the arrowhead density window for 2 px strokes.
    pub density_window: usize,
    pub ocr: OcrBackend,
    pub lexicon_max_edit_distance: usize,
    /// Fill absent hyper-parameters with domain midpoints.
    pub executable: bool,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            threshold_block_size: 31,
            threshold_c: 5.0,
            canny_low: 50.0,
            canny_high: 150.0,
            min_node_area_px: 400.0,
            rect_fill_ratio_min: 0.6,
            snap_radius_px: 12.0,
            density_window: 9,
            ocr: OcrBackend::Builtin,
            lexicon_max_edit_distance: 2,
            executable: false,
        }
    }
}

impl ExtractorConfig {
    pub fn check(&self) -> Result<(), ExtractError> {
        let bad = |m: &str| Err(ExtractError::InvalidConfig(m.to_string()));
        if self.threshold_block_size < 3 || self.threshold_block_size % 2 == 0 {
            return bad("threshold_block_size must be odd and at least 3");
        }
        if !(self.canny_low < self.canny_high) {
            return bad("canny_low must be below canny_high");
        }
        if !(0.0..=1.0).contains(&self.rect_fill_ratio_min) {
            return bad("rect_fill_ratio_min must be a fraction");
        }
        if self.density_window == 0 || self.snap_radius_px < 0.0 || self.min_node_area_px < 0.0 {
            return bad("window, snap radius and area must be positive");
        }
        if let OcrBackend::External { command } = &self.ocr {
            if command.trim().is_empty() {
                return bad("external OCR command is empty");
            }
        }
        Ok(())
    }
}

/// Gaussian adaptive threshold of the luminance.
pub fn binarize(image: &DynamicImage, config: &ExtractorConfig) -> Result<Mask, ExtractError> {
    config.check()?;
    binarize_gray(&to_gray(image), config)
}

fn binarize_gray(gray: &GrayImage, config: &ExtractorConfig) -> Result<Mask, ExtractError> {
    let block = config.threshold_block_size;
    if (gray.width() as usize) < block || (gray.height() as usize) < block {
        return Err(ExtractError::ImageTooSmall {
            width: gray.width(),
            height: gray.height(),
            block,
        });
    }
    Ok(adaptive_threshold(gray, block, config.threshold_c))
}

/// A closed contour accepted as a layer box.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRegion {
    /// Outer edge of the box outline.
    pub bbox: BBox,
    /// Extent of the enclosed background region.
    pub inner: BBox,
    /// Outline thickness in pixels.
    pub border: u32,
    pub area: f64,
    pub fill_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeDetection {
    pub regions: Vec<NodeRegion>,
    /// Enclosed regions examined.
    pub contours: usize,
    pub rejected: usize,
}

/// Steps outward from one side of `inner`, first across lines that are
/// edge but not ink, then across ink lines. Returns both counts.
fn grow_side(ink: &Mask, walls: &Mask, inner: (i64, i64, i64, i64), dir: (i64, i64)) -> (i64, i64) {
    let (x0, y0, x1, y1) = inner;
    let line_frac = |m: &Mask, k: i64| -> f64 {
        let (hit, n) = match dir {
            (0, dy) => {
                let y = if dy < 0 { y0 - k } else { y1 + k };
                ((x0..=x1).filter(|&x| m.get_i(x, y)).count(), x1 - x0 + 1)
            }
            (dx, _) => {
                let x = if dx < 0 { x0 - k } else { x1 + k };
                ((y0..=y1).filter(|&y| m.get_i(x, y)).count(), y1 - y0 + 1)
            }
        };
        hit as f64 / n.max(1) as f64
    };
    let mut k = 1;
    while k <= 3 && line_frac(ink, k) < 0.5 && line_frac(walls, k) >= 0.5 {
        k += 1;
    }
    let skipped = k - 1;
    while k <= skipped + 16 && line_frac(ink, k) >= 0.5 {
        k += 1;
    }
    (skipped, k - 1 - skipped)
}

/// Closed contours of background enclosed by ink or Canny edges.
pub fn detect_nodes(binary: &Mask, config: &ExtractorConfig) -> NodeDetection {
    let edges = canny(&binary.to_image(), config.canny_low, config.canny_high);
    let walls = Mask {
        data: binary.data.iter().zip(&edges.data).map(|(a, b)| *a || *b).collect(),
        ..binary.clone()
    };
    let open = Mask {
        data: walls.data.iter().map(|b| !b).collect(),
        ..binary.clone()
    };
    let mut det = NodeDetection::default();
    let w = binary.w;
    for c in components(&open, false) {
        if c.touches_border || ((c.width() * c.height()) as f64) < config.min_node_area_px {
            continue;
        }
        det.contours += 1;
        let set: HashSet<usize> = c.pixels.iter().copied().collect();
        let first = *c.pixels.iter().min().expect("non-empty");
        let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && set.contains(&(y as usize * w + x as usize));
        let contour = moore_trace(inside, ((first % w) as i64, (first / w) as i64), 4 * c.pixels.len() + 16);
        let (s, e) = (contour[0], contour[contour.len() - 1]);
        let closed = (s.0 - e.0).abs() <= 2 && (s.1 - e.1).abs() <= 2 && contour.len() > 4;
        let area = shoelace(&contour);
        let fill = area / (c.width() * c.height()) as f64;
        if !closed || area < config.min_node_area_px || fill < config.rect_fill_ratio_min {
            det.rejected += 1;
            continue;
        }
        let inner = (c.x0 as i64, c.y0 as i64, c.x1 as i64, c.y1 as i64);
        let grow = |d| grow_side(binary, &walls, inner, d);
        let (top, bottom, left, right) = (grow((0, -1)), grow((0, 1)), grow((-1, 0)), grow((1, 0)));
        let x = inner.0 - left.0 - left.1;
        let y = inner.1 - top.0 - top.1;
        let xr = inner.2 + right.0 + right.1;
        let yb = inner.3 + bottom.0 + bottom.1;
        let mut borders = [top.1, bottom.1, left.1, right.1];
        borders.sort_unstable();
        det.regions.push(NodeRegion {
            bbox: BBox::new(x.max(0) as u32, y.max(0) as u32, (xr - x + 1) as u32, (yb - y + 1) as u32),
            inner: BBox::new(c.x0 as u32, c.y0 as u32, c.width() as u32, c.height() as u32),
            border: borders[1].max(1) as u32,
            area,
            fill_ratio: fill,
        });
    }
    det.regions.sort_by_key(|r| (r.bbox.y, r.bbox.x));
    det
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedArrow {
    /// Indices into the node regions.
    pub src: usize,
    pub dst: usize,
    pub tail: (i64, i64),
    pub head: (i64, i64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrowDetection {
    pub arrows: Vec<DetectedArrow>,
    /// Ink components examined as edge candidates.
    pub candidates: usize,
    pub discarded: usize,
}

/// Typical outline thickness of the detected boxes, used as the stroke
/// width of arrows (2 when nothing was detected).
pub fn stroke_width(regions: &[NodeRegion]) -> i64 {
    let mut v: Vec<u32> = regions.iter().map(|r| r.border).collect();
    if v.is_empty() {
        return 2;
    }
    v.sort_unstable();
    v[v.len() / 2].max(1) as i64
}

fn bbox_distance(b: &BBox, p: (i64, i64)) -> f64 {
    let (x0, y0) = (b.x as i64, b.y as i64);
    let (x1, y1) = (x0 + b.w as i64 - 1, y0 + b.h as i64 - 1);
    let dx = (x0 - p.0).max(p.0 - x1).max(0) as f64;
    let dy = (y0 - p.1).max(p.1 - y1).max(0) as f64;
    (dx * dx + dy * dy).sqrt()
}

fn farthest(c: &Component, dist: &HashMap<usize, u32>) -> usize {
    let mut best = c.pixels[0];
    for &p in &c.pixels {
        if dist.get(&p).copied().unwrap_or(0) > dist.get(&best).copied().unwrap_or(0) || (dist.get(&p) == dist.get(&best) && p < best) {
            best = p;
        }
    }
    best
}

/// Ink of the component in a square window centred a few stroke widths
/// inside the endpoint, measured along the stroke.
fn endpoint_density(c: &Component, w: usize, dist: &HashMap<usize, u32>, depth: u32, side: i64) -> usize {
    let (mut sx, mut sy, mut n) = (0i64, 0i64, 0i64);
    let mut deepest = 0;
    for &p in &c.pixels {
        let d = dist.get(&p).copied().unwrap_or(0);
        deepest = deepest.max(d.min(depth));
    }
    for &p in &c.pixels {
        if dist.get(&p).copied() == Some(deepest) {
            sx += (p % w) as i64;
            sy += (p / w) as i64;
            n += 1;
        }
    }
    let (cx, cy) = (sx / n.max(1), sy / n.max(1));
    let half = side / 2;
    c.pixels
        .iter()
        .filter(|&&p| ((p % w) as i64 - cx).abs() <= half && ((p / w) as i64 - cy).abs() <= half)
        .count()
}

/// Arrows between detected boxes. Boxes (grown by 2 px) are erased and each
/// remaining 8-connected ink component is an edge candidate; its two
/// geodesically extremal pixels must each lie near a different box, and the
/// end with the denser neighbourhood is the arrowhead.
pub fn detect_arrows(binary: &Mask, regions: &[NodeRegion], config: &ExtractorConfig) -> ArrowDetection {
    let sw = stroke_width(regions);
    let s = sw as f64 / 2.0;
    let mut ink = binary.clone();
    for r in regions {
        let (x0, y0) = ((r.bbox.x as i64 - 2).max(0) as usize, (r.bbox.y as i64 - 2).max(0) as usize);
        let x1 = (r.bbox.right() as usize + 2).min(ink.w);
        let y1 = (r.bbox.bottom() as usize + 2).min(ink.h);
        for y in y0..y1 {
            for x in x0..x1 {
                ink.set(x, y, false);
            }
        }
    }
    let w = ink.w;
    let window = ((config.density_window as f64 * s).round() as i64) | 1;
    let depth = (3 * sw) as u32;
    let radius = config.snap_radius_px * s;
    let mut out = ArrowDetection::default();
    for c in components(&ink, true) {
        if (c.pixels.len() as i64) < 8 * sw {
            continue;
        }
        out.candidates += 1;
        let d0 = geodesic(&c.pixels, w, c.pixels[0]);
        let a = farthest(&c, &d0);
        let da = geodesic(&c.pixels, w, a);
        let b = farthest(&c, &da);
        let db = geodesic(&c.pixels, w, b);
        let pa = ((a % w) as i64, (a / w) as i64);
        let pb = ((b % w) as i64, (b / w) as i64);
        let snap = |p: (i64, i64)| {
            regions
                .iter()
                .enumerate()
                .map(|(i, r)| (i, bbox_distance(&r.bbox, p)))
                .filter(|(_, d)| *d <= radius)
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .map(|(i, _)| i)
        };
        let (Some(ra), Some(rb)) = (snap(pa), snap(pb)) else {
            out.discarded += 1;
            continue;
        };
        if ra == rb {
            out.discarded += 1;
            continue;
        }
        let ca = endpoint_density(&c, w, &da, depth, window) as f64;
        let cb = endpoint_density(&c, w, &db, depth, window) as f64;
        if (ca - cb).abs() <= 0.1 * ca.max(cb) {
            out.discarded += 1;
            continue;
        }
        let arrow = if ca > cb {
            DetectedArrow { src: rb, dst: ra, tail: pb, head: pa }
        } else {
            DetectedArrow { src: ra, dst: rb, tail: pa, head: pb }
        };
        out.arrows.push(arrow);
    }
    out
}

/// Reads the label inside `bbox` (a box including its outline).
pub fn read_label(image: &DynamicImage, bbox: BBox, config: &ExtractorConfig) -> Result<OcrText, ExtractError> {
    config.check()?;
    let gray = to_gray(image);
    match &config.ocr {
        OcrBackend::Builtin => {
            let binary = binarize_gray(&gray, config)?;
            Ok(read_builtin(&binary.crop(bbox.x as usize, bbox.y as usize, bbox.w as usize, bbox.h as usize)))
        }
        OcrBackend::External { command } => read_external(command, &crop_gray(&gray, bbox)),
    }
}

fn crop_gray(gray: &GrayImage, b: BBox) -> GrayImage {
    let x = b.x.min(gray.width().saturating_sub(1));
    let y = b.y.min(gray.height().saturating_sub(1));
    let w = b.w.min(gray.width() - x).max(1);
    let h = b.h.min(gray.height() - y).max(1);
    image::imageops::crop_imm(gray, x, y, w, h).to_image()
}

/// Does any consumer of `id`, looking through Dropout and Concat, need a
/// sequence (`Some(true)`) or a vector (`Some(false)`)?
fn consumer_wants_sequence(g: &CompGraph, id: &str) -> Option<bool> {
    let mut queue: VecDeque<&str> = g.successors(id).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    while let Some(n) = queue.pop_front() {
        if !seen.insert(n) {
            continue;
        }
        match g.nodes[n].kind {
            LayerKind::Dropout | LayerKind::Concat => queue.extend(g.successors(n)),
            LayerKind::SimpleRnn | LayerKind::Lstm | LayerKind::Flatten => return Some(true),
            LayerKind::Dense | LayerKind::Embed => return Some(false),
            _ => {}
        }
    }
    None
}

/// Full pipeline: binarise, find boxes and arrows, read and correct labels
/// and assemble the graph.
pub fn extract(image: &DynamicImage, config: &ExtractorConfig) -> Result<ExtractionResult, ExtractError> {
    config.check()?;
    let gray = to_gray(image);
    let binary = binarize_gray(&gray, config)?;
    let nodes = detect_nodes(&binary, config);
    let arrows = detect_arrows(&binary, &nodes.regions, config);
    let lexicon = Lexicon::builtin();

    let mut diagnostics = ExtractionDiagnostics {
        discarded_edges: arrows.discarded,
        contours: nodes.contours,
        rejected_contours: nodes.rejected,
        ..Default::default()
    };
    let mut graph = CompGraph::new("extracted");
    graph.provenance = Provenance::ExtractedFigure;
    let mut blobs = Vec::with_capacity(nodes.regions.len());
    let mut unknown_seq = Vec::new();
    let width = if nodes.regions.len() > 100 { 3 } else { 2 };
    for (i, r) in nodes.regions.iter().enumerate() {
        let id = format!("b{i:0width$}");
        let ocr = match &config.ocr {
            OcrBackend::Builtin => {
                let b = r.inner;
                read_builtin(&binary.crop(b.x as usize, b.y as usize, b.w as usize, b.h as usize))
            }
            OcrBackend::External { command } => read_external(command, &crop_gray(&gray, r.bbox))?,
        };
        let node = match lexicon.correct_label(&ocr.text, config.lexicon_max_edit_distance) {
            Ok(m) => {
                let mut n = Node::bare(id.clone(), m.kind);
                if m.params.is_some() {
                    n.params = m.params;
                }
                match m.return_seq {
                    Some(seq) => n.return_seq = seq,
                    None if m.kind.is_recurrent() => unknown_seq.push(id.clone()),
                    None => {}
                }
                blobs.push(Blob {
                    id: id.clone(),
                    bbox: r.bbox,
                    text: ocr.text.clone(),
                    kind: m.kind.name().to_string(),
                    distance: Some(m.distance),
                    confidence: ocr.confidence,
                });
                n
            }
            Err(_) => {
                diagnostics.unresolved_labels += 1;
                let mut n = Node::bare(id.clone(), LayerKind::Unknown);
                n.label = Some(ocr.text.clone());
                blobs.push(Blob {
                    id: id.clone(),
                    bbox: r.bbox,
                    text: ocr.text.clone(),
                    kind: LayerKind::Unknown.name().to_string(),
                    distance: None,
                    confidence: ocr.confidence,
                });
                n
            }
        };
        graph.add_node(node);
    }

    // Destination-major edge order; inputs of one node nearest first.
    let mut order: Vec<&DetectedArrow> = arrows.arrows.iter().collect();
    order.sort_by_key(|a| {
        let s = &nodes.regions[a.src].bbox;
        (a.dst, std::cmp::Reverse(s.bottom()), s.x, a.src)
    });
    graph.edges = order
        .iter()
        .map(|a| Edge::new(blobs[a.src].id.clone(), blobs[a.dst].id.clone()))
        .collect();
    let mut arrows_out: Vec<Arrow> = arrows
        .arrows
        .iter()
        .map(|a| Arrow {
            src: blobs[a.src].id.clone(),
            dst: blobs[a.dst].id.clone(),
            polyline: vec![[a.tail.0, a.tail.1], [a.head.0, a.head.1]],
        })
        .collect();
    arrows_out.sort_by(|x, y| (&x.src, &x.dst).cmp(&(&y.src, &y.dst)));

    for id in unknown_seq {
        let seq = consumer_wants_sequence(&graph, &id).unwrap_or(false);
        graph.nodes.get_mut(&id).expect("node exists").return_seq = seq;
    }
    if config.executable {
        graph.fill_default_params();
    }
    Ok(ExtractionResult {
        graph,
        blobs,
        arrows: arrows_out,
        diagnostics,
    })
}
