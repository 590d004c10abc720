//! The bitmap font shared by the renderer and the builtin OCR.

use std::sync::OnceLock;

const ATLAS: &str = include_str!("../data/font5x7.txt");

pub const GLYPH_ROWS: usize = 7;

/// Typeface variants; StyleC draws some layer kinds in bold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FontFace {
    Regular,
    Bold,
}

#[derive(Debug, Clone)]
pub struct Font {
    pub face: FontFace,
    /// Glyph width in dots.
    pub width: usize,
    /// Advance per character in dots.
    pub pitch: usize,
    /// Row bitmaps; bit `width - 1 - c` is column `c`.
    glyphs: Vec<(char, [u8; GLYPH_ROWS])>,
}

fn parse_atlas(text: &str) -> Vec<(char, [u8; GLYPH_ROWS])> {
    let mut out = Vec::new();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') || l.len() == 5);
    while let Some(head) = lines.next() {
        let name = head.strip_prefix("glyph ").expect("atlas glyph header");
        let c = if name == "space" { ' ' } else { name.chars().next().expect("glyph char") };
        let mut rows = [0u8; GLYPH_ROWS];
        for r in &mut rows {
            let line = lines.next().expect("atlas glyph row");
            assert_eq!(line.len(), 5, "glyph {name:?} row width");
            *r = line.bytes().fold(0, |acc, b| (acc << 1) | (b == b'#') as u8);
        }
        out.push((c, rows));
    }
    out
}

impl Font {
    pub fn regular() -> &'static Font {
        static F: OnceLock<Font> = OnceLock::new();
        F.get_or_init(|| Font {
            face: FontFace::Regular,
            width: 5,
            pitch: 6,
            glyphs: parse_atlas(ATLAS),
        })
    }

    /// The regular face smeared one dot to the right.
    pub fn bold() -> &'static Font {
        static F: OnceLock<Font> = OnceLock::new();
        F.get_or_init(|| Font {
            face: FontFace::Bold,
            width: 6,
            pitch: 7,
            glyphs: parse_atlas(ATLAS)
                .into_iter()
                .map(|(c, rows)| (c, rows.map(|r| (r << 1) | r)))
                .collect(),
        })
    }

    pub fn of(face: FontFace) -> &'static Font {
        match face {
            FontFace::Regular => Font::regular(),
            FontFace::Bold => Font::bold(),
        }
    }

    pub fn glyphs(&self) -> &[(char, [u8; GLYPH_ROWS])] {
        &self.glyphs
    }

    /// Bitmap of `c`; characters outside the atlas draw as blanks.
    pub fn glyph(&self, c: char) -> [u8; GLYPH_ROWS] {
        self.glyphs
            .iter()
            .find(|(g, _)| *g == c)
            .map(|(_, rows)| *rows)
            .unwrap_or([0; GLYPH_ROWS])
    }

    pub fn ink(&self, rows: &[u8; GLYPH_ROWS], col: usize, row: usize) -> bool {
        rows[row] >> (self.width - 1 - col) & 1 == 1
    }

    /// Width of a text line in dots.
    pub fn text_width(&self, text: &str) -> usize {
        let n = text.chars().count();
        if n == 0 {
            0
        } else {
            n * self.pitch - (self.pitch - self.width)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atlas_is_complete_and_unambiguous() {
        let f = Font::regular();
        let needed = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 (),.-_:/";
        for c in needed.chars() {
            assert!(f.glyphs().iter().any(|(g, _)| *g == c), "{c:?}");
        }
        let g = f.glyphs();
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                let d: u32 = (0..GLYPH_ROWS).map(|r| (g[i].1[r] ^ g[j].1[r]).count_ones()).sum();
                assert!(d >= 2, "{:?} vs {:?}", g[i].0, g[j].0);
            }
        }
    }

    #[test]
    fn widths() {
        assert_eq!(Font::regular().text_width("Dense"), 29);
        assert_eq!(Font::bold().text_width("Dense"), 34);
        assert_eq!(Font::regular().text_width(""), 0);
        let b = Font::bold().glyph('I');
        assert_eq!(b[1], 0b001100);
    }
}
