//! Fixed-cell monospace glyph bitmaps.
//!
//! The built-in set covers `A-Z`, `0-9` and space in 7x11 cells and is
//! shared by the caption renderer and the template recognizer.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::raster::BitMask;

const BUILTIN: &str = include_str!("../assets/glyphs_7x11.txt");

#[derive(Clone, Debug)]
pub struct GlyphSet {
    cell_w: usize,
    cell_h: usize,
    charset: Vec<char>,
    bitmaps: Vec<BitMask>,
    lookup: HashMap<char, usize>,
}

impl GlyphSet {
    /// Builds a set from `(char, bitmap)` pairs in charset order.
    pub fn new(glyphs: Vec<(char, BitMask)>) -> Result<Self> {
        let (cell_w, cell_h) = match glyphs.first() {
            Some((_, b)) => (b.width, b.height),
            None => return Err(Error::format("glyph", "empty glyph set")),
        };
        let mut lookup = HashMap::new();
        let mut charset = Vec::with_capacity(glyphs.len());
        let mut bitmaps = Vec::with_capacity(glyphs.len());
        for (i, (c, bm)) in glyphs.into_iter().enumerate() {
            if bm.width != cell_w || bm.height != cell_h {
                return Err(Error::format(
                    "glyph",
                    format!("glyph {c:?} is {}x{}, expected {cell_w}x{cell_h}", bm.width, bm.height),
                ));
            }
            if lookup.insert(c, i).is_some() {
                return Err(Error::format("glyph", format!("duplicate glyph {c:?}")));
            }
            charset.push(c);
            bitmaps.push(bm);
        }
        Ok(GlyphSet {
            cell_w,
            cell_h,
            charset,
            bitmaps,
            lookup,
        })
    }

    /// Parses the text-art format: a `CELL <w> <h>` line, then per glyph a
    /// `GLYPH <c>` line (`SPACE` names ' ') followed by `h` rows of `#`/`.`.
    /// `#` comment lines and blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let (cell_w, cell_h) = match lines.next().and_then(|l| l.strip_prefix("CELL ")) {
            Some(dims) => {
                let mut it = dims.split_whitespace().map(str::parse::<usize>);
                match (it.next(), it.next()) {
                    (Some(Ok(w)), Some(Ok(h))) if w > 0 && h > 0 => (w, h),
                    _ => return Err(Error::format("glyph", "bad CELL line")),
                }
            }
            None => return Err(Error::format("glyph", "missing CELL header")),
        };
        let mut glyphs = Vec::new();
        while let Some(line) = lines.next() {
            let name = line
                .strip_prefix("GLYPH ")
                .ok_or_else(|| Error::format("glyph", format!("expected GLYPH, got {line:?}")))?;
            let c = match name {
                "SPACE" => ' ',
                s if s.chars().count() == 1 => s.chars().next().unwrap(),
                s => return Err(Error::format("glyph", format!("bad glyph name {s:?}"))),
            };
            let mut bm = BitMask::empty(cell_w, cell_h);
            for y in 0..cell_h {
                let row = lines
                    .next()
                    .ok_or_else(|| Error::format("glyph", format!("glyph {c:?} truncated")))?;
                if row.len() != cell_w {
                    return Err(Error::format("glyph", format!("glyph {c:?} row {y} has wrong width")));
                }
                for (x, b) in row.bytes().enumerate() {
                    match b {
                        b'#' => bm.set(x, y, true),
                        b'.' => {}
                        _ => return Err(Error::format("glyph", format!("bad pixel {:?}", b as char))),
                    }
                }
            }
            glyphs.push((c, bm));
        }
        GlyphSet::new(glyphs)
    }

    /// The shipped 7x11 set.
    pub fn builtin() -> &'static GlyphSet {
        static SET: OnceLock<GlyphSet> = OnceLock::new();
        SET.get_or_init(|| GlyphSet::parse(BUILTIN).expect("built-in glyph asset is valid"))
    }

    pub fn cell_size(&self) -> (usize, usize) {
        (self.cell_w, self.cell_h)
    }

    pub fn charset(&self) -> &[char] {
        &self.charset
    }

    pub fn glyph(&self, c: char) -> Option<&BitMask> {
        self.lookup.get(&c).map(|&i| &self.bitmaps[i])
    }

    pub fn contains(&self, c: char) -> bool {
        self.lookup.contains_key(&c)
    }

    /// `(char, bitmap)` pairs in charset order.
    pub fn iter(&self) -> impl Iterator<Item = (char, &BitMask)> {
        self.charset.iter().copied().zip(self.bitmaps.iter())
    }
}
