//! Raster types shared by every stage: frames, gray images, real-valued maps
//! and bit masks, plus the handful of pixel operations the stages build on.
//!
//! All rasters are row-major. Color frames store interleaved RGB triples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel layout of a [`Frame`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PixelKind {
    Color,
    Gray,
}

impl PixelKind {
    pub fn channels(self) -> usize {
        match self {
            PixelKind::Color => 3,
            PixelKind::Gray => 1,
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates (top-left origin).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// Exclusive right edge.
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// True when `other` lies entirely inside `self`.
    pub fn encloses(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersection_area(&self, other: &Rect) -> usize {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Intersection over union; 0 for disjoint rectangles.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    /// The rectangle moved by `(dx, dy)`, or `None` if it would leave the
    /// non-negative quadrant.
    pub fn shifted(&self, dx: i64, dy: i64) -> Option<Rect> {
        let x = self.x as i64 + dx;
        let y = self.y as i64 + dy;
        if x < 0 || y < 0 {
            return None;
        }
        Some(Rect::new(x as usize, y as usize, self.w, self.h))
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.fits_in(width, height) {
            Ok(())
        } else {
            Err(Error::Bounds {
                rect: *self,
                width,
                height,
            })
        }
    }
}

/// One decoded video frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    index: u32,
    width: usize,
    height: usize,
    kind: PixelKind,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        index: u32,
        width: usize,
        height: usize,
        kind: PixelKind,
        pixels: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "frame dimensions {width}x{height} must be positive"
            )));
        }
        let expected = width * height * kind.channels();
        if pixels.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "expected {expected} samples for a {width}x{height} {kind:?} frame, got {}",
                pixels.len()
            )));
        }
        Ok(Frame {
            index,
            width,
            height,
            kind,
            pixels,
        })
    }

    pub fn from_gray(index: u32, img: &GrayImage) -> Self {
        Frame {
            index,
            width: img.width,
            height: img.height,
            kind: PixelKind::Gray,
            pixels: img.values.clone(),
        }
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn with_index(mut self, index: u32) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> PixelKind {
        self.kind
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// RGB triple at `(x, y)`; gray frames replicate the value.
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = y * self.width + x;
        match self.kind {
            PixelKind::Color => [
                self.pixels[3 * i],
                self.pixels[3 * i + 1],
                self.pixels[3 * i + 2],
            ],
            PixelKind::Gray => [self.pixels[i]; 3],
        }
    }

    /// Every sample complemented (`255 - v`).
    pub fn inverted(&self) -> Frame {
        Frame {
            pixels: self.pixels.iter().map(|&v| 255 - v).collect(),
            ..self.clone()
        }
    }
}

/// Luminance with BT.601 weights, rounded to nearest.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let y = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Converts a frame to gray; gray frames pass through unchanged.
pub fn to_gray(frame: &Frame) -> GrayImage {
    let values = match frame.kind {
        PixelKind::Gray => frame.pixels.clone(),
        PixelKind::Color => frame
            .pixels
            .chunks_exact(3)
            .map(|c| luma([c[0], c[1], c[2]]))
            .collect(),
    };
    GrayImage {
        width: frame.width,
        height: frame.height,
        values,
    }
}

/// The red channel as a gray image (gray frames pass through).
pub fn red_channel(frame: &Frame) -> GrayImage {
    let values = match frame.kind {
        PixelKind::Gray => frame.pixels.clone(),
        PixelKind::Color => frame.pixels.chunks_exact(3).map(|c| c[0]).collect(),
    };
    GrayImage {
        width: frame.width,
        height: frame.height,
        values,
    }
}

/// Copies `rect` out of `frame`, keeping the frame index.
pub fn crop(frame: &Frame, rect: Rect) -> Result<Frame> {
    rect.check(frame.width, frame.height)?;
    let ch = frame.kind.channels();
    let mut pixels = Vec::with_capacity(rect.area() * ch);
    for y in rect.y..rect.bottom() {
        let start = (y * frame.width + rect.x) * ch;
        pixels.extend_from_slice(&frame.pixels[start..start + rect.w * ch]);
    }
    Ok(Frame {
        index: frame.index,
        width: rect.w,
        height: rect.h,
        kind: frame.kind,
        pixels,
    })
}

/// 8-bit gray raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} values cannot form a {width}x{height} gray image",
                values.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.values[y * self.width + x] = v;
    }

    /// Value at `(x, y)` with coordinates clamped into the image
    /// (edge-replication padding).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(cx, cy)
    }

    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| 255 - v).collect(),
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

/// Crops a gray image.
pub fn crop_gray(img: &GrayImage, rect: Rect) -> Result<GrayImage> {
    translate_sample(img, 0, 0, rect)
}

/// Samples `rect` displaced by `(dx, dy)`.
pub fn translate_sample(img: &GrayImage, dx: i64, dy: i64, rect: Rect) -> Result<GrayImage> {
    let moved = rect
        .shifted(dx, dy)
        .filter(|r| r.fits_in(img.width, img.height))
        .ok_or(Error::Bounds {
            rect,
            width: img.width,
            height: img.height,
        })?;
    let mut values = Vec::with_capacity(moved.area());
    for y in moved.y..moved.bottom() {
        let start = y * img.width + moved.x;
        values.extend_from_slice(&img.values[start..start + moved.w]);
    }
    Ok(GrayImage {
        width: moved.w,
        height: moved.h,
        values,
    })
}

/// Real-valued raster used for edge magnitudes, densities and correlation
/// scores. Value range is documented by each producer.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl FloatMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        FloatMap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Maps the values linearly from `[lo, hi]` onto 0..=255 for viewing.
    pub fn to_gray(&self, lo: f64, hi: f64) -> GrayImage {
        let span = if hi > lo { hi - lo } else { 1.0 };
        GrayImage {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }
}

/// Binary raster; `true` marks foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BitMask {
    pub fn empty(width: usize, height: usize) -> Self {
        BitMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn crop(&self, rect: Rect) -> Result<BitMask> {
        rect.check(self.width, self.height)?;
        let mut bits = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let start = y * self.width + rect.x;
            bits.extend_from_slice(&self.bits[start..start + rect.w]);
        }
        Ok(BitMask {
            width: rect.w,
            height: rect.h,
            bits,
        })
    }

    /// 3x3 binary dilation applied `iterations` times.
    pub fn dilate(&self, iterations: usize) -> BitMask {
        let mut cur = self.clone();
        for _ in 0..iterations {
            let mut next = BitMask::empty(self.width, self.height);
            for y in 0..self.height {
                for x in 0..self.width {
                    let y0 = y.saturating_sub(1);
                    let y1 = (y + 1).min(self.height - 1);
                    let x0 = x.saturating_sub(1);
                    let x1 = (x + 1).min(self.width - 1);
                    let hit = (y0..=y1).any(|yy| (x0..=x1).any(|xx| cur.get(xx, yy)));
                    next.set(x, y, hit);
                }
            }
            cur = next;
        }
        cur
    }

    /// Tight bounding box of the set bits.
    pub fn bounding_box(&self) -> Option<Rect> {
        let mut x0 = usize::MAX;
        let mut y0 = usize::MAX;
        let mut x1 = 0;
        let mut y1 = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn color_frame(w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Frame {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.extend_from_slice(&f(x, y));
            }
        }
        Frame::new(7, w, h, PixelKind::Color, px).unwrap()
    }

    #[test]
    fn gray_of_primaries() {
        let one = |c: [u8; 3]| to_gray(&color_frame(1, 1, |_, _| c)).values[0];
        assert_eq!(one([0, 0, 0]), 0);
        assert_eq!(one([255, 255, 255]), 255);
        // 0.299 * 255 = 76.245
        assert_eq!(one([255, 0, 0]), 76);
    }

    #[test]
    fn frame_rejects_bad_lengths() {
        assert!(Frame::new(0, 2, 2, PixelKind::Color, vec![0; 4]).is_err());
        assert!(Frame::new(0, 0, 2, PixelKind::Gray, vec![]).is_err());
    }

    #[test]
    fn crop_identity_and_interior() {
        let f = color_frame(4, 4, |x, y| [x as u8, y as u8, (x * y) as u8]);
        assert_eq!(crop(&f, Rect::new(0, 0, 4, 4)).unwrap(), f);
        let inner = crop(&f, Rect::new(1, 1, 2, 2)).unwrap();
        assert_eq!(inner.width(), 2);
        assert_eq!(inner.index(), 7);
        assert_eq!(inner.rgb(0, 0), [1, 1, 1]);
        assert_eq!(inner.rgb(1, 1), [2, 2, 4]);
        assert!(matches!(
            crop(&f, Rect::new(1, 0, 4, 1)),
            Err(Error::Bounds { .. })
        ));
    }

    #[test]
    fn translate_on_gradient() {
        let img = GrayImage::from_fn(10, 4, |x, _| (x * 10) as u8);
        let r = Rect::new(2, 1, 3, 2);
        assert_eq!(translate_sample(&img, 0, 0, r).unwrap(), crop_gray(&img, r).unwrap());
        let base = crop_gray(&img, r).unwrap();
        let moved = translate_sample(&img, 1, 0, r).unwrap();
        for (a, b) in base.values.iter().zip(&moved.values) {
            assert_eq!(*b, a + 10);
        }
        assert!(translate_sample(&img, 6, 0, r).is_err());
        assert!(translate_sample(&img, -3, 0, r).is_err());
    }

    #[test]
    fn iou_basics() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(20, 0, 5, 5)), 0.0);
        // overlap 5x10 = 50, union 150
        assert!((a.iou(&Rect::new(5, 0, 10, 10)) - 1.0 / 3.0).abs() < 1e-12);
    }

    fn arb_frame() -> impl Strategy<Value = Frame> {
        (1usize..8, 1usize..8, any::<bool>()).prop_flat_map(|(w, h, color)| {
            let kind = if color { PixelKind::Color } else { PixelKind::Gray };
            proptest::collection::vec(any::<u8>(), w * h * kind.channels())
                .prop_map(move |px| Frame::new(0, w, h, kind, px).unwrap())
        })
    }

    /// Any non-empty rect inside a `w x h` image.
    fn arb_rect(w: usize, h: usize) -> impl Strategy<Value = Rect> {
        (0..w, 0..h).prop_flat_map(move |(x, y)| {
            (1..=w - x, 1..=h - y).prop_map(move |(rw, rh)| Rect::new(x, y, rw, rh))
        })
    }

    proptest! {
        #[test]
        fn gray_idempotent(f in arb_frame()) {
            let g = to_gray(&f);
            let again = to_gray(&Frame::from_gray(0, &g));
            prop_assert_eq!(g, again);
        }

        #[test]
        fn crop_composes((f, ra, rb) in arb_frame().prop_flat_map(|f| {
            let (w, h) = (f.width(), f.height());
            (Just(f), arb_rect(w, h)).prop_flat_map(|(f, ra)| (Just(f), Just(ra), arb_rect(ra.w, ra.h)))
        })) {
            let twice = crop(&crop(&f, ra).unwrap(), rb).unwrap();
            let once = crop(&f, Rect::new(ra.x + rb.x, ra.y + rb.y, rb.w, rb.h)).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn gray_commutes_with_crop((f, rect) in arb_frame().prop_flat_map(|f| {
            let (w, h) = (f.width(), f.height());
            (Just(f), arb_rect(w, h))
        })) {
            let a = to_gray(&crop(&f, rect).unwrap());
            let b = crop_gray(&to_gray(&f), rect).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
