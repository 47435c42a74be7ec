//! Character recognition of binary text images, either with the built-in
//! template matcher or through an external OCR command.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::binarize::BinaryTextImage;
use crate::error::{Error, Result};
use crate::glyphs::GlyphSet;
use crate::pnm;
use crate::raster::{BitMask, Rect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Builtin,
    External,
}

/// Which track a recognition belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct TrackSpan {
    pub track: u32,
    pub first_frame: u32,
    pub last_frame: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recognition {
    pub text: String,
    /// One entry per character of `text`.
    pub confidences: Vec<f64>,
    pub engine: Engine,
    pub span: TrackSpan,
}

/// External OCR command. `{in}` is replaced by the path of a PBM file; the
/// command must print UTF-8 text on stdout and exit 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcrAdapterSpec {
    template: String,
    pub timeout: Duration,
}

impl OcrAdapterSpec {
    pub fn new(template: impl Into<String>, timeout: Duration) -> Result<Self> {
        let template = template.into();
        if template.matches("{in}").count() != 1 {
            return Err(Error::Config(format!(
                "OCR command {template:?} must contain {{in}} exactly once"
            )));
        }
        Ok(OcrAdapterSpec { template, timeout })
    }

    pub fn template(&self) -> &str {
        &self.template
    }
}

/// Confidence assigned to every character returned by an external engine.
pub const EXTERNAL_CONFIDENCE: f64 = 0.5;

/// Splits the image at empty columns; each run of inked columns becomes a
/// box, tightened to its inked rows. Boxes come out left to right.
pub fn segment_glyphs(img: &BinaryTextImage) -> Vec<Rect> {
    let m = &img.mask;
    let inked_col = |x: usize| (0..m.height).any(|y| m.get(x, y));
    let mut boxes = Vec::new();
    let mut x = 0;
    while x < m.width {
        if !inked_col(x) {
            x += 1;
            continue;
        }
        let start = x;
        while x < m.width && inked_col(x) {
            x += 1;
        }
        let rows: Vec<usize> = (0..m.height)
            .filter(|&y| (start..x).any(|xx| m.get(xx, y)))
            .collect();
        let (y0, y1) = (rows[0], rows[rows.len() - 1]);
        boxes.push(Rect::new(start, y0, x - start, y1 - y0 + 1));
    }
    boxes
}

/// Nearest-neighbour resample of `src` to `w x h`.
fn resample(src: &BitMask, w: usize, h: usize) -> BitMask {
    let mut out = BitMask::empty(w, h);
    for y in 0..h {
        let sy = (2 * y + 1) * src.height / (2 * h);
        for x in 0..w {
            let sx = (2 * x + 1) * src.width / (2 * w);
            out.set(x, y, src.get(sx, sy));
        }
    }
    out
}

/// A pixel is set when at least `min_count` of its 3x3 neighbours are,
/// which is what a 3x3 box blur followed by a threshold leaves behind.
fn blurred_coverage(bm: &BitMask, min_count: usize) -> BitMask {
    let mut out = BitMask::empty(bm.width, bm.height);
    for y in 0..bm.height {
        for x in 0..bm.width {
            let n = (y.saturating_sub(1)..=(y + 1).min(bm.height - 1))
                .flat_map(|yy| (x.saturating_sub(1)..=(x + 1).min(bm.width - 1)).map(move |xx| (xx, yy)))
                .filter(|&(xx, yy)| bm.get(xx, yy))
                .count();
            out.set(x, y, n >= min_count);
        }
    }
    out
}

/// Neighbour counts for the blurred template variants.
const BLUR_VARIANTS: &[usize] = &[1, 2];

/// Glyph templates normalized the same way as candidate boxes: cropped to
/// their ink and resampled to the cell size. Each glyph also gets variants
/// for how a once-blurred stroke binarizes.
#[derive(Clone, Debug)]
pub struct TemplateMatcher {
    cell: (usize, usize),
    templates: Vec<(char, BitMask)>,
}

impl TemplateMatcher {
    pub fn new(glyphs: &GlyphSet) -> Self {
        let (cw, ch) = glyphs.cell_size();
        let normalize = |bm: &BitMask| {
            let bbox = bm.bounding_box()?;
            Some(resample(&bm.crop(bbox).expect("bbox inside glyph"), cw, ch))
        };
        let mut templates = Vec::new();
        for (c, bm) in glyphs.iter() {
            let Some(thin) = normalize(bm) else { continue };
            templates.push((c, thin));
            for &k in BLUR_VARIANTS {
                if let Some(v) = normalize(&blurred_coverage(bm, k)) {
                    templates.push((c, v));
                }
            }
        }
        TemplateMatcher {
            cell: (cw, ch),
            templates,
        }
    }

    /// Best template for a glyph box: the box is resampled to the cell size
    /// and scored by the fraction of agreeing pixels. Ties keep charset
    /// order.
    pub fn match_box(&self, patch: &BitMask) -> (char, f64) {
        let (cw, ch) = self.cell;
        let norm = resample(patch, cw, ch);
        let area = (cw * ch) as f64;
        let mut best = ('?', -1.0);
        for (c, t) in &self.templates {
            let agree = t.bits.iter().zip(&norm.bits).filter(|(a, b)| a == b).count();
            let score = agree as f64 / area;
            if score > best.1 {
                best = (*c, score);
            }
        }
        best
    }
}

/// See [`TemplateMatcher::match_box`].
pub fn match_glyph(patch: &BitMask, glyphs: &GlyphSet) -> (char, f64) {
    TemplateMatcher::new(glyphs).match_box(patch)
}

/// Word breaks are centre distances beyond this multiple of the median.
pub const SPACE_GAP_FACTOR: f64 = 1.5;

/// Template recognition: segment, match each box, and insert a space
/// (confidence 1) wherever the distance between neighbouring box centres
/// exceeds 1.5x the median centre distance. Centres are used rather than
/// edge-to-edge gaps because blurred strokes binarize wider, which shrinks
/// edge gaps next to narrow glyphs far more than it moves their centres.
pub fn recognize_builtin(img: &BinaryTextImage, matcher: &TemplateMatcher) -> (String, Vec<f64>) {
    let boxes = segment_glyphs(img);
    // doubled centres keep the arithmetic in integers
    let centre2 = |b: &Rect| 2 * b.x + b.w;
    let mut pitches: Vec<usize> = boxes.windows(2).map(|w| centre2(&w[1]) - centre2(&w[0])).collect();
    pitches.sort_unstable();
    let median = pitches.get(pitches.len().saturating_sub(1) / 2).copied().unwrap_or(0);
    let mut text = String::new();
    let mut conf = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        if i > 0 {
            let pitch = centre2(b) - centre2(&boxes[i - 1]);
            if pitch as f64 > SPACE_GAP_FACTOR * median as f64 {
                text.push(' ');
                conf.push(1.0);
            }
        }
        let patch = img.mask.crop(*b).expect("segment boxes lie inside the image");
        let (c, score) = matcher.match_box(&patch);
        text.push(c);
        conf.push(score);
    }
    (text, conf)
}

/// Runs the external command on `img` written as a PBM file.
pub fn recognize_external(img: &BinaryTextImage, adapter: &OcrAdapterSpec) -> Result<String> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("text.pbm");
    pnm::write_file(&path, &pnm::encode_bits(&img.mask))?;
    let quoted = format!("'{}'", path.display().to_string().replace('\'', r"'\''"));
    let cmd = adapter.template.replace("{in}", &quoted);

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Engine(format!("cannot start {cmd:?}: {e}")))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() >= adapter.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Engine(format!(
                    "{cmd:?} timed out after {:?}",
                    adapter.timeout
                )));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(Error::Engine(format!("waiting for {cmd:?}: {e}"))),
        }
    };
    let stdout = out_reader
        .join()
        .expect("reader thread")
        .map_err(|e| Error::Engine(format!("reading output of {cmd:?}: {e}")))?;
    let stderr = String::from_utf8_lossy(&err_reader.join().expect("reader thread")).into_owned();
    if !status.success() {
        return Err(Error::Engine(format!(
            "{cmd:?} exited with {status}: {}",
            stderr.trim()
        )));
    }
    let text = String::from_utf8(stdout)
        .map_err(|_| Error::Engine(format!("{cmd:?} printed non-UTF-8 output")))?;
    Ok(text.trim().to_string())
}

/// Recognizes one track's binary image with the adapter when given, the
/// built-in matcher otherwise.
pub fn recognize_track(
    img: &BinaryTextImage,
    glyphs: &GlyphSet,
    adapter: Option<&OcrAdapterSpec>,
    span: TrackSpan,
) -> Result<Recognition> {
    match adapter {
        Some(a) => {
            let text = recognize_external(img, a)?;
            let confidences = vec![EXTERNAL_CONFIDENCE; text.chars().count()];
            Ok(Recognition {
                text,
                confidences,
                engine: Engine::External,
                span,
            })
        }
        None => {
            let (text, confidences) = recognize_builtin(img, &TemplateMatcher::new(glyphs));
            Ok(Recognition {
                text,
                confidences,
                engine: Engine::Builtin,
                span,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::Provenance;
    use crate::enhance::Polarity;
    use crate::synth::render_caption;

    fn binary(mask: BitMask) -> BinaryTextImage {
        BinaryTextImage {
            mask,
            polarity: Polarity::Dark,
            provenance: Provenance::Global,
        }
    }

    fn rendered(text: &str) -> BinaryTextImage {
        binary(render_caption(text, GlyphSet::builtin(), 255).unwrap().1)
    }

    #[test]
    fn segments_two_glyphs() {
        let boxes = segment_glyphs(&rendered("AB"));
        // glyph bodies are 5x9 at offset (1,1) within each 7x11 cell
        assert_eq!(boxes, vec![Rect::new(1, 1, 5, 9), Rect::new(9, 1, 5, 9)]);
        assert!(segment_glyphs(&binary(BitMask::empty(9, 4))).is_empty());
        let one = rendered("Q");
        assert_eq!(segment_glyphs(&one), vec![one.mask.bounding_box().unwrap()]);
    }

    #[test]
    fn exact_glyph_matches_itself() {
        let g = GlyphSet::builtin();
        for c in ('A'..='Z').chain('0'..='9') {
            let img = rendered(&c.to_string());
            let b = segment_glyphs(&img)[0];
            let (got, conf) = match_glyph(&img.mask.crop(b).unwrap(), g);
            assert_eq!((got, conf), (c, 1.0));
        }
    }

    /// Scores every template against a cell-sized patch by brute force.
    fn exhaustive_scores(patch: &BitMask, g: &GlyphSet) -> Vec<(char, usize)> {
        let m = TemplateMatcher::new(g);
        m.templates
            .iter()
            .map(|(c, t)| {
                let mut agree = 0;
                for y in 0..patch.height {
                    for x in 0..patch.width {
                        agree += usize::from(t.get(x, y) == patch.get(x, y));
                    }
                }
                (*c, agree)
            })
            .collect()
    }

    #[test]
    fn two_flipped_pixels() {
        let g = GlyphSet::builtin();
        let m = TemplateMatcher::new(g);
        let mut a = m.templates.iter().find(|(c, _)| *c == 'A').unwrap().1.clone();
        a.set(3, 10, !a.get(3, 10));
        a.set(0, 5, !a.get(0, 5));
        let scores = exhaustive_scores(&a, g);
        let best = scores.iter().map(|s| s.1).max().unwrap();
        assert_eq!(scores.iter().find(|s| s.0 == 'A').unwrap().1, 75);
        assert_eq!(scores.iter().filter(|s| s.1 == best).count(), 1);
        assert_eq!(match_glyph(&a, g), ('A', 75.0 / 77.0));
    }

    #[test]
    fn all_ink_box_prefers_heaviest_template() {
        let g = GlyphSet::builtin();
        let mut full = BitMask::empty(7, 11);
        full.bits.iter_mut().for_each(|b| *b = true);
        let scores = exhaustive_scores(&full, g);
        let best = scores.iter().map(|s| s.1).max().unwrap();
        let expect = scores.iter().find(|s| s.1 == best).unwrap();
        assert_eq!(match_glyph(&full, g), (expect.0, best as f64 / 77.0));
    }

    #[test]
    fn single_neighbour_coverage_is_dilation() {
        for (_, bm) in GlyphSet::builtin().iter() {
            assert_eq!(blurred_coverage(bm, 1), bm.dilate(1));
            assert_eq!(blurred_coverage(bm, 9).count(), 0);
        }
    }

    #[test]
    fn reads_blurred_glyphs() {
        let g = GlyphSet::builtin();
        let m = TemplateMatcher::new(g);
        for c in ('A'..='Z').chain('0'..='9') {
            let (img, _) = render_caption(&c.to_string(), g, 255).unwrap();
            let blurred = crate::synth::degrade(&img, 0.0, 1, 0);
            // ink covers at least 2 of the 9 pixels under the blur window
            let bits = blurred.values.iter().map(|&v| v >= 57).collect();
            let b = binary(BitMask {
                width: img.width,
                height: img.height,
                bits,
            });
            let boxes = segment_glyphs(&b);
            assert_eq!(boxes.len(), 1, "{c}");
            assert_eq!(m.match_box(&b.mask.crop(boxes[0]).unwrap()), (c, 1.0), "{c}");
        }
    }

    #[test]
    fn builtin_reads_clean_render() {
        let g = GlyphSet::builtin();
        for text in ["NEWS AT 9", "WEATHER 2024", "QUIZ XYZ 0170"] {
            let r = recognize_track(&rendered(text), g, None, TrackSpan::default()).unwrap();
            assert_eq!(r.text, text);
            assert_eq!(r.confidences.len(), text.len());
            assert_eq!(r.engine, Engine::Builtin);
        }
        let empty = recognize_track(&binary(BitMask::empty(5, 5)), g, None, TrackSpan::default()).unwrap();
        assert!(empty.text.is_empty() && empty.confidences.is_empty());
    }

    #[test]
    fn narrow_glyphs_after_blur_get_no_spurious_spaces() {
        let g = GlyphSet::builtin();
        for text in ["HIT IT 1", "LIST OF 11"] {
            let (img, _) = render_caption(text, g, 255).unwrap();
            let blurred = crate::synth::degrade(&img, 0.0, 1, 0);
            let b = binary(BitMask {
                width: img.width,
                height: img.height,
                bits: blurred.values.iter().map(|&v| v >= 57).collect(),
            });
            assert_eq!(recognize_track(&b, g, None, TrackSpan::default()).unwrap().text, text);
        }
    }

    #[test]
    fn adapter_contract() {
        assert!(OcrAdapterSpec::new("ocr", Duration::from_secs(1)).is_err());
        assert!(OcrAdapterSpec::new("ocr {in} {in}", Duration::from_secs(1)).is_err());
        let span = TrackSpan { track: 3, first_frame: 1, last_frame: 9 };
        let echo = OcrAdapterSpec::new("test -s {in} && echo ' HELLO 42 '", Duration::from_secs(10)).unwrap();
        let r = recognize_track(&rendered("AB"), GlyphSet::builtin(), Some(&echo), span).unwrap();
        assert_eq!(r.text, "HELLO 42");
        assert_eq!(r.confidences, vec![0.5; 8]);
        assert_eq!((r.engine, r.span), (Engine::External, span));
    }

    #[test]
    fn adapter_failures() {
        let img = rendered("A");
        let fail = OcrAdapterSpec::new("echo broken >&2; exit 3 # {in}", Duration::from_secs(10)).unwrap();
        match recognize_external(&img, &fail) {
            Err(Error::Engine(msg)) => assert!(msg.contains("broken"), "{msg}"),
            other => panic!("expected engine error, got {other:?}"),
        }
        let slow = OcrAdapterSpec::new("sleep 5 # {in}", Duration::from_millis(100)).unwrap();
        assert!(matches!(recognize_external(&img, &slow), Err(Error::Engine(_))));
    }
}
