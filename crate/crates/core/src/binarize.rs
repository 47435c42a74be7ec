//! Text binarization.
//!
//! Three binarizers share one output type:
//!
//! * **correlation**: the image is correlated with four trained stroke
//!   filters (horizontal, vertical and the two diagonals), each response is
//!   thresholded, and the four bit planes are OR-ed;
//! * **global**: Otsu's threshold over the 256-bin histogram;
//! * **hybrid**: the correlation output seeds a color model of the text, and
//!   the final mask keeps pixels near the seed whose color matches it.
//!
//! Binarizers expect dark strokes; light-on-dark images are inverted by the
//! enhancement stage before they get here.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::enhance::{EnhancedImage, Polarity};
use crate::error::{Error, Result};
use crate::glyphs::GlyphSet;
use crate::pnm;
use crate::raster::{self, BitMask, FloatMap, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Horizontal,
    Vertical,
    /// Top-left to bottom-right (`\`).
    LeftDiagonal,
    /// Bottom-left to top-right (`/`).
    RightDiagonal,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Horizontal,
        Direction::Vertical,
        Direction::LeftDiagonal,
        Direction::RightDiagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
            Direction::LeftDiagonal => "left-diagonal",
            Direction::RightDiagonal => "right-diagonal",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }

    /// Whether `(dx, dy)` (relative to the centre) lies on the ideal line.
    fn on_line(self, dx: i64, dy: i64) -> bool {
        match self {
            Direction::Horizontal => dy == 0,
            Direction::Vertical => dx == 0,
            Direction::LeftDiagonal => dx == dy,
            Direction::RightDiagonal => dx == -dy,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::format("filter bank", format!("unknown direction {s:?}")))
    }
}

/// A zero-mean k x k correlation kernel with its response threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeFilter {
    direction: Direction,
    k: usize,
    kernel: Vec<f64>,
    norm: f64,
    threshold: f64,
}

impl StrokeFilter {
    /// Builds a filter; the kernel is mean-subtracted here.
    pub fn new(direction: Direction, k: usize, kernel: Vec<f64>, threshold: f64) -> Result<Self> {
        if k == 0 || k % 2 == 0 || kernel.len() != k * k {
            return Err(Error::Training(format!(
                "{direction} kernel must be k x k with odd k, got {} entries for k={k}",
                kernel.len()
            )));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Training(format!(
                "{direction} threshold {threshold} outside (0,1]"
            )));
        }
        let mean = kernel.iter().sum::<f64>() / kernel.len() as f64;
        let kernel: Vec<f64> = kernel.iter().map(|v| v - mean).collect();
        let norm = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err(Error::Training(format!("{direction} kernel is flat")));
        }
        Ok(StrokeFilter {
            direction,
            k,
            kernel,
            norm,
            threshold,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Training(format!("threshold {threshold} outside (0,1]")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// Ideal one-pixel dark line through the centre on a light ground.
    pub fn ideal_line(direction: Direction, k: usize, threshold: f64) -> Result<Self> {
        let c = (k / 2) as i64;
        let kernel = (0..k * k)
            .map(|i| {
                let (dx, dy) = ((i % k) as i64 - c, (i / k) as i64 - c);
                if direction.on_line(dx, dy) {
                    0.0
                } else {
                    255.0
                }
            })
            .collect();
        StrokeFilter::new(direction, k, kernel, threshold)
    }
}

/// One filter per direction, all of the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeFilterBank {
    k: usize,
    filters: [StrokeFilter; 4],
}

impl StrokeFilterBank {
    pub fn new(filters: Vec<StrokeFilter>) -> Result<Self> {
        let k = filters
            .first()
            .map(|f| f.k)
            .ok_or_else(|| Error::Training("empty filter bank".into()))?;
        let mut slots: [Option<StrokeFilter>; 4] = Default::default();
        for f in filters {
            if f.k != k {
                return Err(Error::Training("filters differ in size".into()));
            }
            let slot = f.direction.slot();
            if slots[slot].is_some() {
                return Err(Error::Training(format!("two {} filters", f.direction)));
            }
            slots[slot] = Some(f);
        }
        let [Some(h), Some(v), Some(l), Some(r)] = slots else {
            return Err(Error::Training("bank needs one filter per direction".into()));
        };
        Ok(StrokeFilterBank {
            k,
            filters: [h, v, l, r],
        })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    /// Filters in `Direction::ALL` order.
    pub fn filters(&self) -> &[StrokeFilter; 4] {
        &self.filters
    }

    pub fn filter(&self, d: Direction) -> &StrokeFilter {
        &self.filters[d.slot()]
    }

    /// Copy with every threshold replaced.
    pub fn with_thresholds(&self, thresholds: [f64; 4]) -> Result<Self> {
        let mut out = self.clone();
        for (f, t) in out.filters.iter_mut().zip(thresholds) {
            *f = f.clone().with_threshold(t)?;
        }
        Ok(out)
    }

    /// Serializes to the plain-text bank format: `SFBANK k=<k>`, then per
    /// direction `DIR <name> THRESH <t>` and k rows of k reals.
    pub fn to_text(&self) -> String {
        let mut out = format!("SFBANK k={}\n", self.k);
        for f in &self.filters {
            out.push_str(&format!("DIR {} THRESH {}\n", f.direction, f.threshold));
            for row in f.kernel.chunks(self.k) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format("filter bank", msg);
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let k: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("SFBANK k="))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("missing `SFBANK k=<k>` header".into()))?;
        if k == 0 || k % 2 == 0 {
            return Err(bad(format!("kernel size {k} must be odd")));
        }
        let mut filters = Vec::with_capacity(4);
        while let Some(line) = lines.next() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (dir, thresh) = match parts.as_slice() {
                ["DIR", name, "THRESH", t] => (
                    name.parse::<Direction>()?,
                    t.parse::<f64>().map_err(|_| bad(format!("bad threshold {t:?}")))?,
                ),
                _ => return Err(bad(format!("expected `DIR <name> THRESH <t>`, got {line:?}"))),
            };
            let mut kernel = Vec::with_capacity(k * k);
            for _ in 0..k {
                let row = lines.next().ok_or_else(|| bad(format!("{dir} kernel truncated")))?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad kernel value {v:?}"))))
                    .collect::<Result<_>>()?;
                if vals.len() != k {
                    return Err(bad(format!("{dir} kernel row has {} values, expected {k}", vals.len())));
                }
                kernel.extend(vals);
            }
            filters.push(StrokeFilter::new(dir, k, kernel, thresh)?);
        }
        if filters.len() != 4 {
            return Err(bad(format!("expected 4 filters, found {}", filters.len())));
        }
        StrokeFilterBank::new(filters)
    }

    /// Bank shipped with the crate: [`glyph_bank`] on the built-in glyphs,
    /// stored with six decimals.
    pub fn builtin() -> &'static StrokeFilterBank {
        static BANK: OnceLock<StrokeFilterBank> = OnceLock::new();
        BANK.get_or_init(|| {
            StrokeFilterBank::parse(include_str!("../assets/default_bank.sfb"))
                .expect("built-in filter bank asset is valid")
        })
    }
}

/// A training patch whose centre sits on a stroke of the given direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSample {
    pub patch: GrayImage,
    pub direction: Direction,
}

/// Default response threshold given to freshly trained filters.
pub const INITIAL_THRESHOLD: f64 = 0.5;

/// Trains a bank: each kernel is the mean of the k x k windows centred on the
/// samples of its direction, made zero-mean; thresholds start at 0.5.
/// Samples smaller than k x k are skipped with a warning.
pub fn train_filters(samples: &[MarkedSample], k: usize) -> Result<StrokeFilterBank> {
    if k < 3 || k % 2 == 0 {
        return Err(Error::Training(format!("kernel size {k} must be odd and >= 3")));
    }
    let half = k / 2;
    let mut sums = [(); 4].map(|_| vec![0u64; k * k]);
    let mut counts = [0u64; 4];
    for (i, s) in samples.iter().enumerate() {
        if s.patch.width < k || s.patch.height < k {
            log::warn!(
                "sample {i} ({}) is {}x{}, smaller than {k}x{k}; skipped",
                s.direction,
                s.patch.width,
                s.patch.height
            );
            continue;
        }
        let (cx, cy) = (s.patch.width / 2, s.patch.height / 2);
        let (x0, y0) = (cx.saturating_sub(half).min(s.patch.width - k), cy.saturating_sub(half).min(s.patch.height - k));
        let slot = s.direction.slot();
        for wy in 0..k {
            for wx in 0..k {
                sums[slot][wy * k + wx] += s.patch.get(x0 + wx, y0 + wy) as u64;
            }
        }
        counts[slot] += 1;
    }
    let mut filters = Vec::with_capacity(4);
    for d in Direction::ALL {
        let n = counts[d.slot()];
        if n == 0 {
            return Err(Error::Training(format!("no usable {d} samples")));
        }
        let mean = sums[d.slot()].iter().map(|&s| s as f64 / n as f64).collect();
        filters.push(StrokeFilter::new(d, k, mean, INITIAL_THRESHOLD)?);
    }
    StrokeFilterBank::new(filters)
}

/// Labelling and threshold settings used for the shipped bank.
pub const GLYPH_MIN_SCORE: f64 = 0.3;
pub const GLYPH_MARGIN: f64 = 0.0;
pub const GLYPH_THRESHOLD: f64 = 0.3;

/// Trains a bank on automatically marked glyph strokes and sets every
/// threshold to [`GLYPH_THRESHOLD`].
pub fn glyph_bank(glyphs: &GlyphSet, k: usize) -> Result<StrokeFilterBank> {
    let samples = glyph_stroke_samples(glyphs, k, GLYPH_MIN_SCORE, GLYPH_MARGIN)?;
    train_filters(&samples, k)?.with_thresholds([GLYPH_THRESHOLD; 4])
}

/// Reads marked samples from `dir/<direction>/*.pgm` (or `.ppm`, taken as
/// luma), one subdirectory per direction name. Files are read in name order.
pub fn read_samples(dir: &Path) -> Result<Vec<MarkedSample>> {
    let mut samples = Vec::new();
    for d in Direction::ALL {
        let sub = dir.join(d.name());
        if !sub.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&sub)
            .map_err(|e| Error::io(&sub, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&sub, err)))
            .collect::<Result<_>>()?;
        files.retain(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")));
        files.sort();
        for f in files {
            let frame = pnm::read_frame(&f, 0)?;
            samples.push(MarkedSample {
                patch: raster::to_gray(&frame),
                direction: d,
            });
        }
    }
    Ok(samples)
}

/// Marks stroke samples on the glyphs of `glyphs`, rendered dark (0) on light
/// (255). An ink pixel is labelled with the direction whose ideal line
/// correlates best with its window, provided that correlation reaches
/// `min_score` and beats the runner-up by `margin`.
pub fn glyph_stroke_samples(glyphs: &GlyphSet, k: usize, min_score: f64, margin: f64) -> Result<Vec<MarkedSample>> {
    let ideal: Vec<StrokeFilter> = Direction::ALL
        .iter()
        .map(|&d| StrokeFilter::ideal_line(d, k, INITIAL_THRESHOLD))
        .collect::<Result<_>>()?;
    let pad = k;
    let mut samples = Vec::new();
    for (_, bm) in glyphs.iter() {
        if bm.count() == 0 {
            continue;
        }
        let canvas = GrayImage::from_fn(bm.width + 2 * pad, bm.height + 2 * pad, |x, y| {
            let inside = x >= pad && y >= pad && x < pad + bm.width && y < pad + bm.height;
            if inside && bm.get(x - pad, y - pad) {
                0
            } else {
                255
            }
        });
        for y in 0..bm.height {
            for x in 0..bm.width {
                if !bm.get(x, y) {
                    continue;
                }
                let (cx, cy) = (x + pad, y + pad);
                let mut scores: Vec<(f64, Direction)> = ideal
                    .iter()
                    .map(|f| (ncc_at(&canvas, f, cx as i64, cy as i64), f.direction))
                    .collect();
                scores.sort_by(|a, b| b.0.total_cmp(&a.0));
                if scores[0].0 >= min_score && scores[0].0 - scores[1].0 >= margin {
                    let patch = crate::raster::crop_gray(
                        &canvas,
                        crate::raster::Rect::new(cx - k / 2, cy - k / 2, k, k),
                    )?;
                    samples.push(MarkedSample {
                        patch,
                        direction: scores[0].1,
                    });
                }
            }
        }
    }
    Ok(samples)
}

/// NCC of the window centred at `(cx, cy)` (edge-replicated) with `f`.
fn ncc_at(img: &GrayImage, f: &StrokeFilter, cx: i64, cy: i64) -> f64 {
    let k = f.k;
    let half = (k / 2) as i64;
    let mut window = Vec::with_capacity(k * k);
    for wy in 0..k as i64 {
        for wx in 0..k as i64 {
            window.push(img.get_clamped(cx + wx - half, cy + wy - half) as f64);
        }
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let mut dot = 0.0;
    let mut var = 0.0;
    for (v, kv) in window.iter().zip(&f.kernel) {
        let d = v - mean;
        dot += d * kv;
        var += d * d;
    }
    if var == 0.0 {
        return 0.0;
    }
    (dot / (var.sqrt() * f.norm)).clamp(-1.0, 1.0)
}

/// Zero-mean normalized cross-correlation at every pixel, in `[-1, 1]`.
/// Windows are edge-replicated at the border; flat windows score 0.
pub fn correlate(img: &GrayImage, f: &StrokeFilter) -> Result<FloatMap> {
    if img.width < f.k || img.height < f.k {
        return Err(Error::Size(format!(
            "{}x{} image is smaller than the {}x{} kernel",
            img.width, img.height, f.k, f.k
        )));
    }
    let mut map = FloatMap::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            map.values[y * img.width + x] = ncc_at(img, f, x as i64, y as i64);
        }
    }
    Ok(map)
}

/// How a binary image was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Correlation,
    Global,
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryTextImage {
    /// Set bits are text.
    pub mask: BitMask,
    pub polarity: Polarity,
    pub provenance: Provenance,
}

impl BinaryTextImage {
    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }
}

/// Sets a bit wherever any correlation map exceeds its filter's threshold.
pub fn threshold_union(maps: &[FloatMap; 4], bank: &StrokeFilterBank) -> Result<BinaryTextImage> {
    let (w, h) = (maps[0].width, maps[0].height);
    if maps.iter().any(|m| m.width != w || m.height != h) {
        return Err(Error::Usage("correlation maps differ in size".into()));
    }
    let mut mask = BitMask::empty(w, h);
    for (map, f) in maps.iter().zip(bank.filters()) {
        for (bit, &v) in mask.bits.iter_mut().zip(&map.values) {
            *bit |= v > f.threshold;
        }
    }
    Ok(BinaryTextImage {
        mask,
        polarity: Polarity::Dark,
        provenance: Provenance::Correlation,
    })
}

/// Windows whose gray standard deviation falls below this are treated as
/// flat by [`correlation_binarize`]: NCC alone scores faint noise as highly
/// as real strokes.
pub const MIN_WINDOW_STD: f64 = 12.0;

/// Standard deviation of the `k x k` (edge-replicated) window at every pixel.
pub fn window_std(img: &GrayImage, k: usize) -> FloatMap {
    let half = (k / 2) as i64;
    let mut map = FloatMap::zeros(img.width, img.height);
    let n = (k * k) as f64;
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let (mut s, mut s2) = (0.0, 0.0);
            for wy in -half..=half {
                for wx in -half..=half {
                    let v = img.get_clamped(x + wx, y + wy) as f64;
                    s += v;
                    s2 += v * v;
                }
            }
            let var = (s2 / n - (s / n) * (s / n)).max(0.0);
            map.values[y as usize * img.width + x as usize] = var.sqrt();
        }
    }
    map
}

/// Correlates with all four filters (in parallel), zeroes the responses of
/// windows flatter than [`MIN_WINDOW_STD`] and unions the thresholded maps.
pub fn correlation_binarize(img: &GrayImage, bank: &StrokeFilterBank) -> Result<BinaryTextImage> {
    use rayon::prelude::*;
    let std = window_std(img, bank.size());
    let maps: Vec<FloatMap> = bank
        .filters()
        .par_iter()
        .map(|f| {
            let mut m = correlate(img, f)?;
            for (v, &sd) in m.values.iter_mut().zip(&std.values) {
                if sd < MIN_WINDOW_STD {
                    *v = 0.0;
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let maps: [FloatMap; 4] = maps.try_into().expect("four filters");
    threshold_union(&maps, bank)
}

/// 256-bin histogram.
pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &img.values {
        hist[v as usize] += 1;
    }
    hist
}

/// Between-class variance of the split `<= t` / `> t`, up to the constant
/// factor 1/N^2, as the exact ratio `num / den` with
/// `num = (n1*s0 - n0*s1)^2` and `den = n0*n1`. `None` when a class is empty.
pub fn between_class_ratio(n0: u64, s0: u64, n1: u64, s1: u64) -> Option<(u128, u64)> {
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let a = (n1 as i128 * s0 as i128 - n0 as i128 * s1 as i128).unsigned_abs();
    let num = a.checked_mul(a).expect("image too large for exact Otsu");
    Some((num, n0.checked_mul(n1).expect("image too large for exact Otsu")))
}

/// Compares `a.0 / a.1` with `b.0 / b.1` exactly.
pub fn cmp_ratio(a: (u128, u64), b: (u128, u64)) -> std::cmp::Ordering {
    // a.0 * b.1 vs b.0 * a.1 as 192-bit products (high u128, low u64)
    fn wide(x: u128, y: u64) -> (u128, u64) {
        let lo = (x as u64 as u128) * y as u128;
        let hi = (x >> 64) * y as u128;
        (hi + (lo >> 64), lo as u64)
    }
    wide(a.0, b.1).cmp(&wide(b.0, a.1))
}

/// Otsu threshold: the `t` maximizing between-class variance of the classes
/// `v <= t` and `v > t`, lowest `t` on ties. `None` for single-valued images.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let hist = histogram(img);
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    let mut best: Option<(u8, (u128, u64))> = None;
    for t in 0..=255u8 {
        n0 += hist[t as usize];
        s0 += t as u64 * hist[t as usize];
        let Some(score) = between_class_ratio(n0, s0, total_n - n0, total_s - s0) else {
            continue;
        };
        if best.is_none_or(|(_, b)| cmp_ratio(score, b).is_gt()) {
            best = Some((t, score));
        }
    }
    best.map(|(t, _)| t)
}

/// Global Otsu binarization; the text side is `<= t` for dark text and `> t`
/// for light text. Single-valued images give an empty foreground.
pub fn global_binarize(img: &GrayImage, polarity: Polarity) -> BinaryTextImage {
    let mut mask = BitMask::empty(img.width, img.height);
    if let Some(t) = otsu_threshold(img) {
        for (bit, &v) in mask.bits.iter_mut().zip(&img.values) {
            *bit = match polarity {
                Polarity::Dark => v <= t,
                Polarity::Light => v > t,
            };
        }
    }
    BinaryTextImage {
        mask,
        polarity,
        provenance: Provenance::Global,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridParams {
    /// Maximum Euclidean RGB distance (absolute gray difference for gray
    /// images) from the estimated text color.
    pub color_distance: f64,
    /// Dilation passes (3x3) applied to the seed mask.
    pub dilation: usize,
}

impl Default for HybridParams {
    fn default() -> Self {
        HybridParams {
            color_distance: 60.0,
            dilation: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridOutcome {
    pub image: BinaryTextImage,
    /// Correlation seed mask.
    pub seed: BitMask,
    /// Estimated text color (None in the fallback case).
    pub text_color: Option<[u8; 3]>,
    /// The seed was empty and the global binarization was returned instead.
    pub degraded: bool,
}

fn lower_median(mut v: Vec<u8>) -> u8 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

/// Correlation seed, then color refinement: keeps pixels inside the dilated
/// seed whose color lies within `color_distance` of the per-channel median
/// seed color.
pub fn hybrid_binarize(
    enh: &EnhancedImage,
    bank: &StrokeFilterBank,
    params: &HybridParams,
) -> Result<HybridOutcome> {
    let seed = correlation_binarize(&enh.gray, bank)?.mask;
    hybrid_from_seed(enh, seed, params)
}

/// Color refinement step of [`hybrid_binarize`] on a precomputed seed.
pub fn hybrid_from_seed(enh: &EnhancedImage, seed: BitMask, params: &HybridParams) -> Result<HybridOutcome> {
    if seed.width != enh.width() || seed.height != enh.height() {
        return Err(Error::Usage("seed mask and image differ in size".into()));
    }
    if seed.count() == 0 {
        log::warn!("empty correlation seed; falling back to global threshold");
        return Ok(HybridOutcome {
            image: global_binarize(&enh.gray, Polarity::Dark),
            seed,
            text_color: None,
            degraded: true,
        });
    }
    let seed_idx: Vec<usize> = (0..seed.bits.len()).filter(|&i| seed.bits[i]).collect();
    let text_color = [0, 1, 2].map(|k| lower_median(seed_idx.iter().map(|&i| enh.rgb(i)[k]).collect()));
    let reach = seed.dilate(params.dilation);
    let mut mask = BitMask::empty(seed.width, seed.height);
    for i in 0..mask.bits.len() {
        if !reach.bits[i] {
            continue;
        }
        let dist = match &enh.color {
            Some(c) => (0..3)
                .map(|k| (c[i][k] as f64 - text_color[k] as f64).powi(2))
                .sum::<f64>()
                .sqrt(),
            // a gray pixel is the RGB triple (g, g, g)
            None => (enh.gray.values[i] as f64 - text_color[0] as f64).abs() * 3f64.sqrt(),
        };
        mask.bits[i] = dist <= params.color_distance;
    }
    Ok(HybridOutcome {
        image: BinaryTextImage {
            mask,
            polarity: Polarity::Dark,
            provenance: Provenance::Hybrid,
        },
        seed,
        text_color: Some(text_color),
        degraded: false,
    })
}

/// Which binarizer the pipeline runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binarizer {
    Correlation,
    Global,
    Hybrid,
}

impl FromStr for Binarizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Binarizer::Correlation),
            "global" => Ok(Binarizer::Global),
            "hybrid" => Ok(Binarizer::Hybrid),
            other => Err(Error::Config(format!("unknown binarizer {other:?}"))),
        }
    }
}
