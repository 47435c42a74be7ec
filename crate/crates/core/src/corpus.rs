//! The standard synthetic corpus: scene sets for detection, fusion and
//! end-to-end runs, and colored-distractor fixtures for binarization.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::enhance::EnhancedImage;
use crate::error::Result;
use crate::glyphs::GlyphSet;
use crate::pnm;
use crate::postprocess::{Dictionary, DEFAULT_MAX_DISTANCE};
use crate::raster::{BitMask, Frame, PixelKind, Rect};
use crate::synth::{self, Background, SceneSpec};

pub const VOCABULARY: &str = include_str!("../assets/vocabulary.txt");

pub const SCENE_WIDTH: usize = 192;
pub const SCENE_HEIGHT: usize = 108;
/// Space between the rendered text and the caption rect on every side.
pub const CAPTION_MARGIN: usize = 4;
/// Longest transcript that fits a scene with its margin.
pub const MAX_TRANSCRIPT: usize = 22;

pub fn vocabulary() -> Vec<&'static str> {
    VOCABULARY
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// The vocabulary as a correction dictionary.
pub fn dictionary() -> Dictionary {
    Dictionary::new(vocabulary(), DEFAULT_MAX_DISTANCE).expect("vocabulary is valid")
}

/// Two or three vocabulary words, sometimes followed by a number.
pub fn transcript(seed: u64) -> String {
    let words = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=3);
        let mut parts: Vec<String> = (0..n)
            .map(|_| words.choose(&mut rng).expect("non-empty vocabulary").to_string())
            .collect();
        if rng.gen_bool(0.4) {
            parts.push(rng.gen_range(0..100).to_string());
        }
        let text = parts.join(" ");
        if text.len() <= MAX_TRANSCRIPT {
            return text;
        }
    }
}

/// Caption rect hugging the rendered text plus [`CAPTION_MARGIN`],
/// horizontally centred, at a seeded height in the lower half.
pub fn caption_rect(text: &str, glyphs: &GlyphSet, seed: u64) -> Rect {
    let (cw, ch) = glyphs.cell_size();
    let n = text.chars().count().max(1);
    let w = n * (cw + 1) - 1 + 2 * CAPTION_MARGIN;
    let h = ch + 2 * CAPTION_MARGIN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca97);
    let y = rng.gen_range(SCENE_HEIGHT / 2..=SCENE_HEIGHT - h - 2);
    Rect::new((SCENE_WIDTH - w) / 2, y, w, h)
}

/// Background shared by the standard scenes: 16 px blocks redrawn every
/// frame. The level range keeps block boundaries below the default edge
/// threshold.
pub const BLOCKS: Background = Background::RandomBlocks {
    block: 16,
    lo: 160,
    hi: 184,
};

pub fn scene(text: &str, seed: u64, frames: usize, noise_sigma: f64, blur_radius: usize) -> SceneSpec {
    SceneSpec {
        width: SCENE_WIDTH,
        height: SCENE_HEIGHT,
        text: text.to_string(),
        caption: caption_rect(text, GlyphSet::builtin(), seed),
        text_gray: 0,
        background: BLOCKS,
        frames,
        noise_sigma,
        blur_radius,
        seed,
        invert: false,
    }
}

/// Twenty dark-text scenes over random blocks, ten frames, noise sigma 8.
pub fn block_scenes() -> Vec<SceneSpec> {
    (0..20)
        .map(|i| {
            let seed = 1000 + i;
            scene(&transcript(seed), seed, 10, 8.0, 0)
        })
        .collect()
}

/// "NEWS AT 9" and nine seeded transcripts; undegraded, or with noise
/// sigma 12 and one blur pass.
pub fn end_to_end_scenes(noisy: bool) -> Vec<SceneSpec> {
    let (sigma, blur) = if noisy { (12.0, 1) } else { (0.0, 0) };
    (0..10)
        .map(|i| {
            let seed = 2000 + i;
            let text = if i == 0 { "NEWS AT 9".to_string() } else { transcript(seed) };
            scene(&text, seed, 10, sigma, blur)
        })
        .collect()
}

/// Every standard scene under a directory name.
pub fn standard_corpus() -> Vec<(String, SceneSpec)> {
    let mut out = Vec::new();
    for (i, s) in block_scenes().into_iter().enumerate() {
        out.push((format!("blocks_{i:02}"), s));
    }
    for (i, s) in end_to_end_scenes(false).into_iter().enumerate() {
        out.push((format!("clean_{i:02}"), s));
    }
    for (i, s) in end_to_end_scenes(true).into_iter().enumerate() {
        out.push((format!("noisy_{i:02}"), s));
    }
    for (i, mut s) in end_to_end_scenes(false).into_iter().take(3).enumerate() {
        s.invert = true;
        out.push((format!("inverted_{i:02}"), s));
    }
    out
}

pub const DICTIONARY_FILE: &str = "dictionary.txt";

/// Writes every standard scene to `dir/<name>/` and the vocabulary to
/// `dir/dictionary.txt`. Returns the scene names.
pub fn write_standard_corpus(dir: &Path) -> Result<Vec<String>> {
    let glyphs = GlyphSet::builtin();
    let mut names = Vec::new();
    for (name, spec) in standard_corpus() {
        let (frames, truth) = synth::synth_sequence(&spec, glyphs)?;
        synth::write_scene(&dir.join(&name), &frames, &truth)?;
        names.push(name);
    }
    pnm::write_file(&dir.join(DICTIONARY_FILE), VOCABULARY.as_bytes())?;
    Ok(names)
}

/// A color caption image with stroke-like clutter in a different color.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistractorFixture {
    pub image: EnhancedImage,
    /// Text pixels only.
    pub truth: BitMask,
    pub text: String,
}

pub const TEXT_COLOR: [u8; 3] = [20, 30, 140];
pub const DISTRACTOR_COLOR: [u8; 3] = [150, 25, 20];

const FIX_MARGIN_X: usize = 12;
const FIX_MARGIN_Y: usize = 10;

/// Blue text on a light, slightly noisy background with 1 px red line
/// segments in the margins. Distractors never touch the text box.
pub fn distractor_fixture(seed: u64) -> DistractorFixture {
    let glyphs = GlyphSet::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = vocabulary();
    let text = loop {
        let t = format!(
            "{} {}",
            words.choose(&mut rng).expect("vocabulary"),
            words.choose(&mut rng).expect("vocabulary")
        );
        if t.len() <= 14 {
            break t;
        }
    };
    let (_, text_mask) = synth::render_caption(&text, glyphs, 255).expect("vocabulary renders");
    let (w, h) = (text_mask.width + 2 * FIX_MARGIN_X, text_mask.height + 2 * FIX_MARGIN_Y);

    let mut truth = BitMask::empty(w, h);
    for y in 0..text_mask.height {
        for x in 0..text_mask.width {
            truth.set(FIX_MARGIN_X + x, FIX_MARGIN_Y + y, text_mask.get(x, y));
        }
    }

    let base = rng.gen_range(200..=230i32);
    let mut px: Vec<[u8; 3]> = (0..w * h)
        .map(|_| [0, 1, 2].map(|_| (base + rng.gen_range(-4..=4)) as u8))
        .collect();
    for (i, &ink) in truth.bits.iter().enumerate() {
        if ink {
            px[i] = TEXT_COLOR;
        }
    }

    // keep clutter two pixels clear of the text cells
    let keep_out = Rect::new(FIX_MARGIN_X - 2, FIX_MARGIN_Y - 2, text_mask.width + 4, text_mask.height + 4);
    let steps: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let segments = rng.gen_range(6..=10);
    let mut placed = 0;
    while placed < segments {
        let (dx, dy) = steps[rng.gen_range(0..4)];
        let len = rng.gen_range(5..=10i64);
        let x0 = rng.gen_range(1..w as i64 - 1);
        let y0 = rng.gen_range(1..h as i64 - 1);
        let pts: Vec<(i64, i64)> = (0..len).map(|t| (x0 + t * dx, y0 + t * dy)).collect();
        let fits = pts.iter().all(|&(x, y)| {
            x >= 1
                && y >= 1
                && x < w as i64 - 1
                && y < h as i64 - 1
                && !keep_out.contains(x as usize, y as usize)
        });
        if !fits {
            continue;
        }
        for (x, y) in pts {
            px[y as usize * w + x as usize] = DISTRACTOR_COLOR;
        }
        placed += 1;
    }

    let flat: Vec<u8> = px.iter().flatten().copied().collect();
    let frame = Frame::new(0, w, h, PixelKind::Color, flat).expect("consistent fixture size");
    DistractorFixture {
        image: EnhancedImage::from_frame(&frame),
        truth,
        text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transcripts_render_and_fit() {
        let g = GlyphSet::builtin();
        for seed in 0..200 {
            let t = transcript(seed);
            assert!(t.len() <= MAX_TRANSCRIPT, "{t}");
            let r = caption_rect(&t, g, seed);
            assert!(r.fits_in(SCENE_WIDTH, SCENE_HEIGHT));
            synth::synth_sequence(&scene(&t, seed, 1, 0.0, 0), g).unwrap();
        }
        assert_eq!(transcript(7), transcript(7));
    }

    #[test]
    fn vocabulary_is_a_dictionary() {
        let d = dictionary();
        assert_eq!(d.len(), vocabulary().len());
        assert!(vocabulary().iter().all(|w| w.chars().all(|c| GlyphSet::builtin().contains(c))));
    }

    #[test]
    fn fixtures_keep_clutter_off_text() {
        for seed in 0..10 {
            let f = distractor_fixture(seed);
            for i in 0..f.truth.bits.len() {
                let c = f.image.rgb(i);
                assert_eq!(f.truth.bits[i], c == TEXT_COLOR);
            }
            let clutter = (0..f.truth.bits.len()).filter(|&i| f.image.rgb(i) == DISTRACTOR_COLOR).count();
            assert!(clutter >= 20, "{clutter}");
        }
    }
}
