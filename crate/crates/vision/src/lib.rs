//! Flow-diagram rendering and extraction.
//!
//! [`render`] draws a computational graph in one of two diagram styles and
//! returns the image together with its ground truth; [`extract`] parses
//! such an image back into a graph.

mod canvas;
pub mod extract;
pub mod font;
pub mod imgproc;
pub mod layout;
pub mod ocr;
pub mod render;

use std::path::PathBuf;

pub use extract::{binarize, detect_arrows, detect_nodes, extract, read_label, ExtractorConfig, NodeRegion};
pub use layout::{layout, layout_with, Layout, LayoutConfig, RenderStyle};
pub use ocr::{OcrBackend, OcrText};
pub use render::{render, render_with, save, sidecar_path, RenderSink, Rendered};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("graph is not valid: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),
    #[error("graph has {nodes} nodes, above the layout budget of {budget}")]
    LayoutOverflow { nodes: usize, budget: usize },
    #[error("scale must be at least 1")]
    BadScale,
    #[error("PNG encoding failed: {0}")]
    Encode(#[from] image::ImageError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("invalid extractor configuration: {0}")]
    InvalidConfig(String),
    #[error("image is {width}x{height}, smaller than the {block} px threshold block")]
    ImageTooSmall { width: u32, height: u32, block: usize },
    #[error("OCR backend failed (exit status {status:?}): {message}")]
    OcrBackendError { status: Option<i32>, message: String },
}

/// Sets each pixel to black or white with probability `p / 2` each.
pub fn salt_and_pepper(image: &image::GrayImage, p: f64, seed: u64) -> image::GrayImage {
    let mut rng = dlp2c_core::rng::Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for px in out.pixels_mut() {
        let u = rng.next_f64();
        if u < p / 2.0 {
            px.0[0] = 0;
        } else if u < p {
            px.0[0] = 255;
        }
    }
    out
}
