//! Single-frame overlay text localization: Sobel edges, sliding-window edge
//! density, connected components of dense pixels, then an optional
//! uniform-color check on each candidate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, BitMask, Frame, GrayImage, Rect};

/// Sobel gradient magnitude per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
}

impl EdgeMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.magnitude[y * self.width + x]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    pub rect: Rect,
    pub frame: u32,
    /// Mean edge density over the component's marked pixels.
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectParams {
    pub edge_thresh: f64,
    pub window: usize,
    pub density_thresh: f64,
    pub min_w: usize,
    pub min_h: usize,
    pub color_tolerance: f64,
    pub color_check: bool,
    pub red_channel: bool,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            edge_thresh: 100.0,
            window: 15,
            density_thresh: 0.12,
            min_w: 16,
            min_h: 8,
            color_tolerance: 24.0,
            color_check: true,
            red_channel: false,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.density_thresh) {
            return Err(Error::Config(format!(
                "detect.density_thresh {} outside [0,1]",
                self.density_thresh
            )));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "detect.window {} must be odd and >= 3",
                self.window
            )));
        }
        if self.min_w == 0 || self.min_h == 0 {
            return Err(Error::Config("detect.min_w/min_h must be positive".into()));
        }
        if !(self.edge_thresh >= 0.0) || !(self.color_tolerance >= 0.0) {
            return Err(Error::Config(
                "detect.edge_thresh and color tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
const SOBEL_Y: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];

/// 3x3 Sobel magnitude with edge-replication padding.
pub fn edge_map(img: &GrayImage) -> Result<EdgeMap> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::Size(format!(
            "edge map needs at least 3x3, got {}x{}",
            img.width, img.height
        )));
    }
    let mut magnitude = Vec::with_capacity(img.width * img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut gx = 0i32;
            let mut gy = 0i32;
            for (ky, (rx, ry)) in SOBEL_X.iter().zip(&SOBEL_Y).enumerate() {
                for kx in 0..3 {
                    let v = img.get_clamped(x + kx as i64 - 1, y + ky as i64 - 1) as i32;
                    gx += rx[kx] * v;
                    gy += ry[kx] * v;
                }
            }
            magnitude.push(((gx * gx + gy * gy) as f64).sqrt());
        }
    }
    Ok(EdgeMap {
        width: img.width,
        height: img.height,
        magnitude,
    })
}

/// Fraction of above-threshold edge pixels in the `window`-sized square
/// around each pixel; windows are clipped at the image border.
pub fn edge_density(em: &EdgeMap, params: &DetectParams) -> Vec<f64> {
    let (w, h) = (em.width, em.height);
    let stride = w + 1;
    let mut integral = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += u32::from(em.get(x, y) >= params.edge_thresh);
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let half = params.window / 2;
    let mut density = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(half);
        let y1 = (y + half + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(half);
            let x1 = (x + half + 1).min(w);
            let count = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
            density.push(count as f64 / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }
    density
}

/// Pixels whose edge density reaches the density threshold.
pub fn marked_pixels(em: &EdgeMap, params: &DetectParams) -> BitMask {
    let density = edge_density(em, params);
    BitMask {
        width: em.width,
        height: em.height,
        bits: density.iter().map(|&d| d >= params.density_thresh).collect(),
    }
}

/// Candidate text regions of one frame, strongest first.
pub fn detect_regions(em: &EdgeMap, params: &DetectParams, frame: u32) -> Vec<TextRegion> {
    let density = edge_density(em, params);
    let (w, h) = (em.width, em.height);
    let marked: Vec<bool> = density.iter().map(|&d| d >= params.density_thresh).collect();
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !marked[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut sum = 0.0;
        let mut n = 0usize;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sum += density[i];
            n += 1;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if marked[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        let rect = Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
        if rect.w >= params.min_w && rect.h >= params.min_h {
            regions.push(TextRegion {
                rect,
                frame,
                score: sum / n as f64,
            });
        }
    }
    regions.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.rect.y, a.rect.x).cmp(&(b.rect.y, b.rect.x)))
    });
    regions
}

/// Share of edge pixels that must fall near the dominant color.
const DOMINANT_SHARE: f64 = 0.30;

/// Accepts a region when the edge pixels inside it are dominated by one
/// color: the most populated 16-level-per-channel bin, widened by the
/// uniformity tolerance around that bin's mean color, must hold at least 30%
/// of them. Always true when the check is disabled.
pub fn color_verify(frame: &Frame, region: &TextRegion, params: &DetectParams) -> bool {
    if !params.color_check {
        return true;
    }
    let Ok(patch) = raster::crop(frame, region.rect) else {
        return false;
    };
    let gray = detection_channel(&patch, params);
    let Ok(em) = edge_map(&gray) else {
        return false;
    };
    let mut colors = Vec::new();
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            if em.get(x, y) >= params.edge_thresh {
                colors.push(patch.rgb(x, y));
            }
        }
    }
    if colors.is_empty() {
        return false;
    }
    let mut bins = vec![0u32; 4096];
    let bin = |c: &[u8; 3]| (c[0] as usize >> 4) << 8 | (c[1] as usize >> 4) << 4 | c[2] as usize >> 4;
    for c in &colors {
        bins[bin(c)] += 1;
    }
    let dominant = (0..bins.len()).fold(0, |best, i| if bins[i] > bins[best] { i } else { best });
    let mut mean = [0f64; 3];
    for c in colors.iter().filter(|c| bin(c) == dominant) {
        for k in 0..3 {
            mean[k] += c[k] as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= bins[dominant] as f64;
    }
    let tol2 = params.color_tolerance * params.color_tolerance;
    let near = colors
        .iter()
        .filter(|c| {
            (0..3)
                .map(|k| (c[k] as f64 - mean[k]).powi(2))
                .sum::<f64>()
                <= tol2
        })
        .count();
    near as f64 >= DOMINANT_SHARE * colors.len() as f64
}

/// Gray plane the detector works on: luma, or the red channel when
/// `red_channel` is set.
pub fn detection_channel(frame: &Frame, params: &DetectParams) -> GrayImage {
    if params.red_channel {
        raster::red_channel(frame)
    } else {
        raster::to_gray(frame)
    }
}

/// Full per-frame detection: edges, density regions, color verification.
pub fn detect_frame(frame: &Frame, params: &DetectParams) -> Result<Vec<TextRegion>> {
    let em = edge_map(&detection_channel(frame, params))?;
    Ok(detect_regions(&em, params, frame.index())
        .into_iter()
        .filter(|r| color_verify(frame, r, params))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::PixelKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct Sobel evaluation at one pixel, written independently of
    /// `edge_map`.
    fn sobel_at(img: &GrayImage, x: i64, y: i64) -> f64 {
        let p = |dx: i64, dy: i64| img.get_clamped(x + dx, y + dy) as f64;
        let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        gx.hypot(gy)
    }

    #[test]
    fn constant_image_has_no_edges() {
        let em = edge_map(&GrayImage::filled(6, 5, 90)).unwrap();
        assert!(em.magnitude.iter().all(|&m| m == 0.0));
        assert!(detect_regions(&em, &DetectParams::default(), 0).is_empty());
    }

    #[test]
    fn step_edges() {
        let vertical = GrayImage::from_fn(8, 6, |x, _| if x < 4 { 0 } else { 255 });
        let em = edge_map(&vertical).unwrap();
        // both columns adjacent to the step see |Gx| = 4 * 255
        for y in 0..6 {
            assert_eq!(em.get(3, y), 1020.0);
            assert_eq!(em.get(4, y), 1020.0);
            assert_eq!(em.get(0, y), 0.0);
            for x in 0..8 {
                assert_eq!(em.get(x, y), sobel_at(&vertical, x as i64, y as i64));
            }
        }
        let horizontal = GrayImage::from_fn(6, 8, |_, y| if y < 4 { 0 } else { 255 });
        let eh = edge_map(&horizontal).unwrap();
        for y in 0..8 {
            for x in 0..6 {
                assert_eq!(eh.get(x, y), em.get(y, x));
            }
        }
        assert!(matches!(edge_map(&GrayImage::filled(2, 9, 0)), Err(Error::Size(_))));
    }

    fn text_block(img: &mut GrayImage, x0: usize, y0: usize, w: usize, h: usize) {
        // alternating 1-px columns read as dense vertical strokes
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.set(x, y, if (x - x0) % 3 == 0 { 0 } else { 220 });
            }
        }
    }

    #[test]
    fn separated_blocks_give_two_regions() {
        let mut img = GrayImage::filled(120, 40, 220);
        text_block(&mut img, 5, 10, 30, 12);
        text_block(&mut img, 70, 12, 40, 12);
        let em = edge_map(&img).unwrap();
        let regions = detect_regions(&em, &DetectParams::default(), 4);
        assert_eq!(regions.len(), 2);
        assert!(regions.iter().all(|r| r.frame == 4 && r.score >= 0.12));
        assert!(regions[0].score >= regions[1].score);
        let mut xs: Vec<_> = regions.iter().map(|r| r.rect.x).collect();
        xs.sort();
        assert!(xs[0] <= 5 && xs[1] <= 70 && xs[1] > 40);
    }

    #[test]
    fn param_validation() {
        assert!(DetectParams::default().validate().is_ok());
        let bad_window = DetectParams { window: 14, ..Default::default() };
        assert!(bad_window.validate().is_err());
        let bad_density = DetectParams { density_thresh: 1.5, ..Default::default() };
        assert!(bad_density.validate().is_err());
    }

    fn color_frame(w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Frame {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.extend_from_slice(&f(x, y));
            }
        }
        Frame::new(0, w, h, PixelKind::Color, px).unwrap()
    }

    #[test]
    fn color_verification() {
        let params = DetectParams::default();
        let uniform = color_frame(40, 20, |x, y| {
            if (5..35).contains(&x) && (5..15).contains(&y) && x % 3 == 0 {
                [250, 240, 20]
            } else {
                [20, 30, 120]
            }
        });
        let region = TextRegion { rect: Rect::new(0, 0, 40, 20), frame: 0, score: 1.0 };
        assert!(color_verify(&uniform, &region, &params));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<[u8; 3]> = (0..800).map(|_| rng.gen()).collect();
        let random = color_frame(40, 20, |x, y| noise[y * 40 + x]);
        assert!(!color_verify(&random, &region, &params));

        let off = DetectParams { color_check: false, ..params };
        assert!(color_verify(&random, &region, &off));
    }

    fn arb_scene() -> impl Strategy<Value = GrayImage> {
        proptest::collection::vec((0usize..40, 0usize..20, 4usize..20, 3usize..10), 1..4).prop_map(|blocks| {
            let mut img = GrayImage::filled(64, 40, 200);
            for (x, y, w, h) in blocks {
                text_block(&mut img, 4 + x.min(36), 4 + y.min(22), w.min(24), h.min(10));
            }
            img
        })
    }

    proptest! {
        #[test]
        fn raising_density_never_grows_marks(img in arb_scene(), lo in 0.0f64..1.0, bump in 0.0f64..0.5) {
            let em = edge_map(&img).unwrap();
            let p_lo = DetectParams { density_thresh: lo, ..Default::default() };
            let p_hi = DetectParams { density_thresh: (lo + bump).min(1.0), ..Default::default() };
            let a = marked_pixels(&em, &p_lo);
            let b = marked_pixels(&em, &p_hi);
            prop_assert!(a.bits.iter().zip(&b.bits).all(|(x, y)| *x || !*y));
        }

        #[test]
        fn translation_equivariance(img in arb_scene(), dx in 0usize..12, dy in 0usize..12) {
            let big = GrayImage::from_fn(120, 90, |x, y| {
                if x >= 20 && y >= 20 && x < 84 && y < 60 { img.get(x - 20, y - 20) } else { 200 }
            });
            let moved = GrayImage::from_fn(120, 90, |x, y| {
                if x >= 20 + dx && y >= 20 + dy && x < 84 + dx && y < 60 + dy {
                    img.get(x - 20 - dx, y - 20 - dy)
                } else { 200 }
            });
            let p = DetectParams::default();
            let a = detect_regions(&edge_map(&big).unwrap(), &p, 0);
            let b = detect_regions(&edge_map(&moved).unwrap(), &p, 0);
            prop_assert_eq!(a.len(), b.len());
            for (ra, rb) in a.iter().zip(&b) {
                prop_assert_eq!(ra.rect.shifted(dx as i64, dy as i64).unwrap(), rb.rect);
                prop_assert!((ra.score - rb.score).abs() < 1e-12);
                prop_assert!(rb.rect.fits_in(120, 90));
                prop_assert!(rb.rect.w >= p.min_w && rb.rect.h >= p.min_h);
            }
        }
    }
}
