//! Synthetic caption-over-background sequences with pixel-exact ground truth.
//!
//! A static caption is composited onto an evolving background, then every
//! frame is box-blurred and gets clamped Gaussian noise. Randomness comes
//! from ChaCha8 (`rand_chacha`) seeded with the scene seed, with Gaussian
//! samples drawn by `rand_distr::Normal`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::glyphs::GlyphSet;
use crate::pnm;
use crate::raster::{BitMask, Frame, GrayImage, Rect};

/// How the background changes over the sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Background {
    /// One flat level for every frame.
    Solid { level: u8 },
    /// Triangle-wave horizontal gradient scrolling `speed` px per frame.
    ScrollGradient { lo: u8, hi: u8, period: usize, speed: usize },
    /// Square blocks with levels drawn uniformly from `[lo, hi]`, redrawn
    /// every frame.
    RandomBlocks { block: usize, lo: u8, hi: u8 },
}

impl Background {
    fn render(&self, width: usize, height: usize, t: usize, rng: &mut ChaCha8Rng) -> GrayImage {
        match *self {
            Background::Solid { level } => GrayImage::filled(width, height, level),
            Background::ScrollGradient {
                lo,
                hi,
                period,
                speed,
            } => {
                let period = period.max(2);
                let span = hi as f64 - lo as f64;
                GrayImage::from_fn(width, height, |x, _| {
                    let phase = ((x + t * speed) % period) as f64 / period as f64;
                    let tri = 1.0 - (2.0 * phase - 1.0).abs();
                    (lo as f64 + span * tri).round() as u8
                })
            }
            Background::RandomBlocks { block, lo, hi } => {
                let block = block.max(1);
                let bw = width.div_ceil(block);
                let bh = height.div_ceil(block);
                let levels: Vec<u8> = (0..bw * bh).map(|_| rng.gen_range(lo..=hi)).collect();
                GrayImage::from_fn(width, height, |x, y| levels[(y / block) * bw + x / block])
            }
        }
    }
}

/// Everything needed to generate one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub text: String,
    /// Caption box; the rendered text is centred inside it.
    pub caption: Rect,
    pub text_gray: u8,
    pub background: Background,
    pub frames: usize,
    pub noise_sigma: f64,
    pub blur_radius: usize,
    pub seed: u64,
    /// Complement every output frame (light text on dark background).
    #[serde(default)]
    pub invert: bool,
}

/// Pixel-exact reference for a generated sequence. The caption is static, so
/// one mask and one rectangle hold for every frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub transcript: String,
    pub rect: Rect,
    pub mask: BitMask,
    pub frame_indices: Vec<u32>,
}

impl GroundTruth {
    pub fn mask_for(&self, frame: u32) -> Option<&BitMask> {
        self.frame_indices.contains(&frame).then_some(&self.mask)
    }
}

/// Lays out `text` left to right with a one-pixel gap between cells. The
/// image holds `fg` on ink pixels and 0 elsewhere.
pub fn render_caption(text: &str, glyphs: &GlyphSet, fg: u8) -> Result<(GrayImage, BitMask)> {
    let (cw, ch) = glyphs.cell_size();
    let chars: Vec<char> = text.chars().collect();
    let mut cells = Vec::with_capacity(chars.len());
    for &c in &chars {
        cells.push(glyphs.glyph(c).ok_or(Error::Charset(c))?);
    }
    let width = if cells.is_empty() {
        0
    } else {
        cells.len() * cw + cells.len() - 1
    };
    let mut mask = BitMask::empty(width, ch);
    for (i, cell) in cells.iter().enumerate() {
        let ox = i * (cw + 1);
        for y in 0..ch {
            for x in 0..cw {
                if cell.get(x, y) {
                    mask.set(ox + x, y, true);
                }
            }
        }
    }
    let img = GrayImage {
        width,
        height: ch,
        values: mask.bits.iter().map(|&b| if b { fg } else { 0 }).collect(),
    };
    Ok((img, mask))
}

/// Applies `radius` passes of a 3x3 box blur (edge replication, rounded),
/// then adds N(0, sigma) noise, rounding and clamping to 0..=255.
pub fn degrade(img: &GrayImage, sigma: f64, radius: usize, seed: u64) -> GrayImage {
    let mut cur = img.clone();
    for _ in 0..radius {
        cur = box_blur3(&cur);
    }
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
        for v in cur.values.iter_mut() {
            let noisy = *v as f64 + normal.sample(&mut rng);
            *v = noisy.round().clamp(0.0, 255.0) as u8;
        }
    }
    cur
}

fn box_blur3(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width, img.height, |x, y| {
        let mut sum = 0u32;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                sum += img.get_clamped(x as i64 + dx, y as i64 + dy) as u32;
            }
        }
        ((sum as f64) / 9.0).round() as u8
    })
}

fn frame_seed(seed: u64, t: usize) -> u64 {
    // splitmix64 step keeps per-frame noise streams decorrelated
    let mut z = seed.wrapping_add((t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Placement of the rendered text inside the caption box.
pub fn text_origin(spec: &SceneSpec, text_w: usize, text_h: usize) -> Result<(usize, usize)> {
    let r = spec.caption;
    if !r.fits_in(spec.width, spec.height) {
        return Err(Error::Layout(format!(
            "caption rect {r:?} exceeds the {}x{} frame",
            spec.width, spec.height
        )));
    }
    if text_w > r.w || text_h > r.h {
        return Err(Error::Layout(format!(
            "text needs {text_w}x{text_h} but caption rect is {}x{}",
            r.w, r.h
        )));
    }
    Ok((r.x + (r.w - text_w) / 2, r.y + (r.h - text_h) / 2))
}

/// Generates the frames of `spec` and their ground truth.
pub fn synth_sequence(spec: &SceneSpec, glyphs: &GlyphSet) -> Result<(Vec<Frame>, GroundTruth)> {
    if spec.frames == 0 {
        return Err(Error::Config("scene needs at least one frame".into()));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Config("frame dimensions must be positive".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma {} must be >= 0", spec.noise_sigma)));
    }
    let (text_img, text_mask) = render_caption(&spec.text, glyphs, spec.text_gray)?;
    let (ox, oy) = text_origin(spec, text_img.width, text_img.height)?;

    let mut mask = BitMask::empty(spec.width, spec.height);
    for y in 0..text_mask.height {
        for x in 0..text_mask.width {
            if text_mask.get(x, y) {
                mask.set(ox + x, oy + y, true);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let mut img = spec.background.render(spec.width, spec.height, t, &mut rng);
        for (v, &ink) in img.values.iter_mut().zip(&mask.bits) {
            if ink {
                *v = spec.text_gray;
            }
        }
        let mut img = degrade(&img, spec.noise_sigma, spec.blur_radius, frame_seed(spec.seed, t));
        if spec.invert {
            img = img.inverted();
        }
        frames.push(Frame::from_gray(t as u32, &img));
    }
    let truth = GroundTruth {
        transcript: spec.text.clone(),
        rect: spec.caption,
        mask,
        frame_indices: (0..spec.frames as u32).collect(),
    };
    Ok((frames, truth))
}

/// SHA-256 over the encoded frames in order; identifies a corpus scene.
pub fn corpus_id(frames: &[Frame]) -> String {
    let mut h = Sha256::new();
    for f in frames {
        h.update(f.index().to_le_bytes());
        h.update(pnm::encode_frame(f));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk form of [`GroundTruth`] (`truth.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub corpus_id: String,
    pub transcript: String,
    pub rect: Rect,
    pub mask: String,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<u32>,
}

pub const TRUTH_FILE: &str = "truth.json";
pub const MASK_FILE: &str = "mask.pbm";

/// Writes frames as `frame_%06d.pgm|ppm`, plus `truth.json` and `mask.pbm`.
pub fn write_scene(dir: &Path, frames: &[Frame], truth: &GroundTruth) -> Result<()> {
    for f in frames {
        pnm::write_file(&dir.join(pnm::frame_file_name(f.index(), f.kind())), &pnm::encode_frame(f))?;
    }
    pnm::write_file(&dir.join(MASK_FILE), &pnm::encode_bits(&truth.mask))?;
    let tf = TruthFile {
        corpus_id: corpus_id(frames),
        transcript: truth.transcript.clone(),
        rect: truth.rect,
        mask: MASK_FILE.to_string(),
        width: truth.mask.width,
        height: truth.mask.height,
        frames: truth.frame_indices.clone(),
    };
    let json = serde_json::to_string_pretty(&tf).expect("truth serializes");
    pnm::write_file(&dir.join(TRUTH_FILE), json.as_bytes())
}

/// Reads `truth.json` (and the mask it names) from a scene directory or a
/// direct path to the JSON file.
pub fn read_truth(path: &Path) -> Result<(TruthFile, GroundTruth)> {
    let file = if path.is_dir() { path.join(TRUTH_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let tf: TruthFile =
        serde_json::from_str(&text).map_err(|e| Error::format("truth", e.to_string()))?;
    let mask_path = file.parent().unwrap_or(Path::new(".")).join(&tf.mask);
    let mask = pnm::read_bits(&mask_path)?;
    if mask.width != tf.width || mask.height != tf.height {
        return Err(Error::format("truth", "mask dimensions disagree with truth.json"));
    }
    let gt = GroundTruth {
        transcript: tf.transcript.clone(),
        rect: tf.rect,
        mask,
        frame_indices: tf.frames.clone(),
    };
    Ok((tf, gt))
}
