//! Label reading. The builtin backend matches the shipped glyph atlas
//! against the binarised crop; the external backend runs a command on a
//! PNG of the crop.

use std::process::Command;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::font::{Font, GLYPH_ROWS};
use crate::imgproc::{components, Mask};
use crate::ExtractError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OcrBackend {
    #[default]
    Builtin,
    /// Shell command; the crop's file path is appended as the last argument.
    External { command: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcrText {
    pub text: String,
    /// Fraction of sampled dots that agree with the chosen glyphs; `1` for
    /// external backends, `0` for an empty crop.
    pub confidence: f64,
}

/// Ink that belongs to the label: 8-connected components that do not touch
/// the crop edge (the box outline does) and are larger than speckle.
pub fn text_ink(crop: &Mask) -> Mask {
    let mut out = Mask::new(crop.w, crop.h);
    for c in components(crop, true) {
        if !c.touches_border && c.pixels.len() >= 3 {
            for i in c.pixels {
                out.data[i] = true;
            }
        }
    }
    out
}

struct Decoded {
    text: String,
    cost: usize,
    cells: usize,
}

fn decode(ink: &Mask, font: &Font, x0: i64, y0: i64, x1: i64, d: i64, offset: usize) -> Decoded {
    let origin = x0 - offset as i64 * d;
    let pitch = font.pitch as i64 * d;
    let cells = ((x1 + 1 - origin) + pitch - 1) / pitch;
    let need = ((d * d) as usize).div_ceil(2);
    let dot = |col: i64, row: i64| ink.count_in(col, row, col + d, row + d) >= need;
    let (mut text, mut cost) = (String::new(), 0usize);
    for i in 0..cells {
        let cx = origin + i * pitch;
        let mut bits = [0u8; GLYPH_ROWS];
        for (r, row) in bits.iter_mut().enumerate() {
            for c in 0..font.width {
                *row = (*row << 1) | dot(cx + c as i64 * d, y0 + r as i64 * d) as u8;
            }
            for c in font.width..font.pitch {
                cost += dot(cx + c as i64 * d, y0 + r as i64 * d) as usize;
            }
        }
        let (ch, dist) = font
            .glyphs()
            .iter()
            .map(|(ch, g)| (*ch, (0..GLYPH_ROWS).map(|r| (g[r] ^ bits[r]).count_ones() as usize).sum::<usize>()))
            .min_by_key(|(_, dist)| *dist)
            .expect("non-empty atlas");
        text.push(ch);
        cost += dist;
    }
    Decoded {
        text,
        cost,
        cells: cells.max(0) as usize,
    }
}

/// Reads one line of text from the label ink of a box crop. The dot size
/// comes from the height of the ink band (seven dots); the horizontal phase
/// and the face are the ones that explain the ink best.
pub fn read_builtin(crop: &Mask) -> OcrText {
    let ink = text_ink(crop);
    let mut rows = (0..ink.h).filter(|&y| (0..ink.w).any(|x| ink.get(x, y)));
    let Some(y0) = rows.next() else {
        return OcrText {
            text: String::new(),
            confidence: 0.0,
        };
    };
    let y1 = rows.next_back().unwrap_or(y0);
    let band = y1 - y0 + 1;
    if band < 5 {
        return OcrText {
            text: String::new(),
            confidence: 0.0,
        };
    }
    let d = ((band as f64 / GLYPH_ROWS as f64).round() as i64).max(1);
    let x0 = (0..ink.w).find(|&x| (y0..=y1).any(|y| ink.get(x, y))).expect("band has ink") as i64;
    let x1 = (0..ink.w).rev().find(|&x| (y0..=y1).any(|y| ink.get(x, y))).expect("band has ink") as i64;
    let mut best: Option<Decoded> = None;
    for font in [Font::regular(), Font::bold()] {
        for offset in 0..font.width {
            let dec = decode(&ink, font, x0, y0 as i64, x1, d, offset);
            if best.as_ref().is_none_or(|b| dec.cost < b.cost) {
                best = Some(dec);
            }
        }
    }
    let best = best.expect("at least one candidate");
    let dots = (best.cells * GLYPH_ROWS * Font::bold().pitch).max(1);
    OcrText {
        text: best.text.trim().to_string(),
        confidence: (1.0 - best.cost as f64 / dots as f64).clamp(0.0, 1.0),
    }
}

/// Runs `command <png>` and returns its trimmed standard output.
pub fn read_external(command: &str, crop: &GrayImage) -> Result<OcrText, ExtractError> {
    let backend = |message: String, status: Option<i32>| ExtractError::OcrBackendError { status, message };
    let file = tempfile::Builder::new()
        .suffix(".png")
        .tempfile()
        .map_err(|e| backend(format!("temporary file: {e}"), None))?;
    crop.save_with_format(file.path(), image::ImageFormat::Png)
        .map_err(|e| backend(format!("writing crop: {e}"), None))?;
    let out = Command::new("sh")
        .arg("-c")
        .arg(format!("{command} \"$1\""))
        .arg("ocr")
        .arg(file.path())
        .output()
        .map_err(|e| backend(format!("spawning `{command}`: {e}"), None))?;
    if !out.status.success() {
        return Err(backend(String::from_utf8_lossy(&out.stderr).trim().to_string(), out.status.code()));
    }
    Ok(OcrText {
        text: String::from_utf8_lossy(&out.stdout).trim().to_string(),
        confidence: 1.0,
    })
}
