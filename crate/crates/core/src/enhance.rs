//! Multi-frame fusion of a track's aligned instances by a per-pixel order
//! statistic.
//!
//! Overlay captions stay put while the background moves, so across aligned
//! instances a dark caption pixel keeps its value while background pixels
//! wander; the per-pixel minimum therefore suppresses the background. The
//! maximum plays the same role for light captions.

use serde::{Deserialize, Serialize};

use crate::binarize::otsu_threshold;
use crate::error::{Error, Result};
use crate::raster::{luma, Frame, GrayImage, PixelKind};
use crate::track::TextTrack;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStatistic {
    Minimum,
    Mean,
    Median,
    Maximum,
}

/// Text polarity of a fused image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Dark text on a lighter background.
    Dark,
    /// Light text on a darker background.
    Light,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnhancedImage {
    pub gray: GrayImage,
    /// Row-major RGB, present when the source frames are color.
    pub color: Option<Vec<[u8; 3]>>,
    /// Number of in-bounds samples fused at each pixel (always >= 1).
    pub counts: Vec<u32>,
}

impl EnhancedImage {
    pub fn width(&self) -> usize {
        self.gray.width
    }

    pub fn height(&self) -> usize {
        self.gray.height
    }

    /// RGB at `i`, replicating gray when no color is held.
    pub fn rgb(&self, i: usize) -> [u8; 3] {
        match &self.color {
            Some(c) => c[i],
            None => [self.gray.values[i]; 3],
        }
    }

    pub fn inverted(&self) -> EnhancedImage {
        EnhancedImage {
            gray: self.gray.inverted(),
            color: self
                .color
                .as_ref()
                .map(|c| c.iter().map(|p| p.map(|v| 255 - v)).collect()),
            counts: self.counts.clone(),
        }
    }

    /// Wraps a single gray image (one sample per pixel).
    pub fn from_gray(gray: GrayImage) -> Self {
        let n = gray.values.len();
        EnhancedImage {
            gray,
            color: None,
            counts: vec![1; n],
        }
    }

    /// Wraps a single frame (one sample per pixel).
    pub fn from_frame(frame: &Frame) -> Self {
        let n = frame.width() * frame.height();
        let color = (frame.kind() == PixelKind::Color).then(|| {
            (0..n)
                .map(|i| frame.rgb(i % frame.width(), i / frame.width()))
                .collect()
        });
        EnhancedImage {
            gray: crate::raster::to_gray(frame),
            color,
            counts: vec![1; n],
        }
    }
}

fn frame_by_index(frames: &[Frame], index: u32) -> Result<&Frame> {
    frames
        .binary_search_by_key(&index, |f| f.index())
        .map(|i| &frames[i])
        .map_err(|_| Error::Usage(format!("frame {index} not supplied")))
}

/// Fuses the instances of `track` (offsets applied) into one image over the
/// reference rect. Samples falling outside their frame are skipped and the
/// count raster records how many were used. `frames` must be sorted by index.
///
/// Gray output is the chosen statistic of the luma samples (mean rounded to
/// nearest, median = lower median). Color output takes the color of the
/// arg-min / arg-max instance (earliest on ties) for minimum / maximum, and
/// per-channel mean / lower median otherwise.
pub fn fuse(frames: &[Frame], track: &TextTrack, stat: FusionStatistic) -> Result<EnhancedImage> {
    if track.is_empty() {
        return Err(Error::Usage("cannot fuse an empty track".into()));
    }
    if track.offsets.len() != track.instances.len() {
        return Err(Error::Usage("track offsets not computed".into()));
    }
    let sources: Vec<&Frame> = track
        .instances
        .iter()
        .map(|&(idx, _)| frame_by_index(frames, idx))
        .collect::<Result<_>>()?;
    let all_color = sources.iter().all(|f| f.kind() == PixelKind::Color);
    let (w, h) = (track.reference.w, track.reference.h);

    let mut gray = Vec::with_capacity(w * h);
    let mut color = Vec::with_capacity(if all_color { w * h } else { 0 });
    let mut counts = Vec::with_capacity(w * h);
    let mut samples: Vec<(u8, [u8; 3])> = Vec::with_capacity(sources.len());
    for py in 0..h {
        for px in 0..w {
            samples.clear();
            for ((frame, &(_, rect)), &(dx, dy)) in
                sources.iter().zip(&track.instances).zip(&track.offsets)
            {
                let sx = rect.x as i64 + dx + px as i64;
                let sy = rect.y as i64 + dy + py as i64;
                if sx < 0 || sy < 0 || sx >= frame.width() as i64 || sy >= frame.height() as i64 {
                    continue;
                }
                let rgb = frame.rgb(sx as usize, sy as usize);
                let g = match frame.kind() {
                    PixelKind::Gray => rgb[0],
                    PixelKind::Color => luma(rgb),
                };
                samples.push((g, rgb));
            }
            if samples.is_empty() {
                return Err(Error::Usage(format!(
                    "pixel ({px},{py}) of track {} has no in-bounds sample",
                    track.id
                )));
            }
            let (g, c) = reduce(&samples, stat);
            gray.push(g);
            if all_color {
                color.push(c);
            }
            counts.push(samples.len() as u32);
        }
    }
    Ok(EnhancedImage {
        gray: GrayImage::new(w, h, gray)?,
        color: all_color.then_some(color),
        counts,
    })
}

fn reduce(samples: &[(u8, [u8; 3])], stat: FusionStatistic) -> (u8, [u8; 3]) {
    let n = samples.len();
    match stat {
        FusionStatistic::Minimum => {
            // first strictly smaller sample wins, so ties keep the earliest
            let best = samples[1..]
                .iter()
                .fold(samples[0], |b, s| if s.0 < b.0 { *s } else { b });
            best
        }
        FusionStatistic::Maximum => samples[1..]
            .iter()
            .fold(samples[0], |b, s| if s.0 > b.0 { *s } else { b }),
        FusionStatistic::Mean => {
            let mean = |vals: &mut dyn Iterator<Item = u8>| {
                let sum: usize = vals.map(usize::from).sum();
                ((sum + n / 2) / n) as u8
            };
            let g = mean(&mut samples.iter().map(|s| s.0));
            let c = [0, 1, 2].map(|k| mean(&mut samples.iter().map(|s| s.1[k])));
            (g, c)
        }
        FusionStatistic::Median => {
            let lower = |mut vals: Vec<u8>| {
                vals.sort_unstable();
                vals[(n - 1) / 2]
            };
            let g = lower(samples.iter().map(|s| s.0).collect());
            let c = [0, 1, 2].map(|k| lower(samples.iter().map(|s| s.1[k]).collect()));
            (g, c)
        }
    }
}

/// Expected share of stroke pixels in a caption region.
pub const EXPECTED_STROKE_COVERAGE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarityChoice {
    pub image: EnhancedImage,
    pub polarity: Polarity,
    /// Neither fusion had a usable Otsu split.
    pub degenerate: bool,
}

/// Share of pixels on the text side of the Otsu split: at or below the
/// threshold for dark text, above it for light text. `None` for flat images.
fn tentative_foreground(img: &GrayImage, polarity: Polarity) -> Option<f64> {
    let t = otsu_threshold(img)?;
    let n = img
        .values
        .iter()
        .filter(|&&v| match polarity {
            Polarity::Dark => v <= t,
            Polarity::Light => v > t,
        })
        .count();
    Some(n as f64 / img.values.len() as f64)
}

/// Picks the minimum fusion (dark text) or the maximum fusion (light text),
/// whichever has a tentative foreground share nearer the expected stroke
/// coverage. Ties go to the minimum fusion.
pub fn choose_polarity(enh_min: &EnhancedImage, enh_max: &EnhancedImage) -> PolarityChoice {
    let dark = tentative_foreground(&enh_min.gray, Polarity::Dark);
    let light = tentative_foreground(&enh_max.gray, Polarity::Light);
    let degenerate = dark.is_none() && light.is_none();
    let d_dark = (dark.unwrap_or(0.0) - EXPECTED_STROKE_COVERAGE).abs();
    let d_light = (light.unwrap_or(0.0) - EXPECTED_STROKE_COVERAGE).abs();
    if d_dark <= d_light {
        PolarityChoice {
            image: enh_min.clone(),
            polarity: Polarity::Dark,
            degenerate,
        }
    } else {
        PolarityChoice {
            image: enh_max.clone(),
            polarity: Polarity::Light,
            degenerate,
        }
    }
}

/// Returns the image with strokes dark: light-polarity images are inverted.
pub fn normalize_polarity(img: &EnhancedImage, polarity: Polarity) -> EnhancedImage {
    match polarity {
        Polarity::Dark => img.clone(),
        Polarity::Light => img.inverted(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rect;
    use proptest::prelude::*;

    fn gray_frames(values: &[Vec<u8>], w: usize, h: usize) -> Vec<Frame> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| Frame::new(i as u32, w, h, PixelKind::Gray, v.clone()).unwrap())
            .collect()
    }

    fn full_track(n: usize, w: usize, h: usize) -> TextTrack {
        TextTrack::from_instances(0, (0..n as u32).map(|i| (i, Rect::new(0, 0, w, h))).collect()).unwrap()
    }

    #[test]
    fn single_instance_is_identity() {
        let frames = gray_frames(&[vec![3, 9, 27, 81]], 2, 2);
        let track = full_track(1, 2, 2);
        for stat in [FusionStatistic::Minimum, FusionStatistic::Mean, FusionStatistic::Median, FusionStatistic::Maximum] {
            let e = fuse(&frames, &track, stat).unwrap();
            assert_eq!(e.gray.values, vec![3, 9, 27, 81]);
            assert_eq!(e.counts, vec![1; 4]);
            assert!(e.color.is_none());
        }
    }

    #[test]
    fn order_statistics_of_three() {
        let frames = gray_frames(&[vec![10], vec![200], vec![200]], 1, 1);
        let track = full_track(3, 1, 1);
        let at = |s| fuse(&frames, &track, s).unwrap().gray.values[0];
        assert_eq!(at(FusionStatistic::Minimum), 10);
        assert_eq!(at(FusionStatistic::Maximum), 200);
        assert_eq!(at(FusionStatistic::Median), 200);
        assert_eq!(at(FusionStatistic::Mean), 137);
    }

    #[test]
    fn lower_median_for_even_counts() {
        let frames = gray_frames(&[vec![40], vec![10], vec![30], vec![20]], 1, 1);
        let e = fuse(&frames, &full_track(4, 1, 1), FusionStatistic::Median).unwrap();
        assert_eq!(e.gray.values[0], 20);
    }

    #[test]
    fn color_follows_argmin() {
        let px = |rgb: [u8; 3]| Frame::new(0, 1, 1, PixelKind::Color, rgb.to_vec()).unwrap();
        let frames = vec![
            px([200, 200, 200]).with_index(0),
            px([0, 0, 255]).with_index(1), // luma 29
            px([0, 0, 255]).with_index(2),
            px([250, 0, 0]).with_index(3), // luma 75
        ];
        let track = full_track(4, 1, 1);
        let min = fuse(&frames, &track, FusionStatistic::Minimum).unwrap();
        assert_eq!(min.gray.values[0], 29);
        assert_eq!(min.color.as_ref().unwrap()[0], [0, 0, 255]);
        let max = fuse(&frames, &track, FusionStatistic::Maximum).unwrap();
        assert_eq!(max.color.unwrap()[0], [200, 200, 200]);
        let mean = fuse(&frames, &track, FusionStatistic::Mean).unwrap();
        assert_eq!(mean.color.unwrap()[0], [113, 50, 178]);
    }

    #[test]
    fn out_of_bounds_samples_are_counted_out() {
        let frames = gray_frames(&[vec![1, 2, 3, 4], vec![5, 6, 7, 8]], 4, 1);
        let mut track = TextTrack::from_instances(0, vec![(0, Rect::new(0, 0, 2, 1)), (1, Rect::new(2, 0, 2, 1))]).unwrap();
        track.offsets = vec![(0, 0), (1, 0)];
        let e = fuse(&frames, &track, FusionStatistic::Maximum).unwrap();
        assert_eq!(e.counts, vec![2, 1]);
        assert_eq!(e.gray.values, vec![8, 2]);
    }

    #[test]
    fn empty_track_is_rejected() {
        let mut track = full_track(1, 1, 1);
        track.instances.clear();
        assert!(fuse(&gray_frames(&[vec![1]], 1, 1), &track, FusionStatistic::Minimum).is_err());
    }

    #[test]
    fn polarity_on_constant_images() {
        let flat = EnhancedImage::from_gray(GrayImage::filled(8, 8, 100));
        let choice = choose_polarity(&flat, &flat);
        assert_eq!(choice.polarity, Polarity::Dark);
        assert!(choice.degenerate);
    }

    fn arb_stack() -> impl Strategy<Value = (usize, Vec<Vec<u8>>)> {
        (1usize..6, 1usize..7).prop_flat_map(|(n, len)| {
            (Just(len), proptest::collection::vec(proptest::collection::vec(any::<u8>(), len), n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn order_statistics_are_ordered((len, stack) in arb_stack()) {
            let frames = gray_frames(&stack, len, 1);
            let track = full_track(stack.len(), len, 1);
            let g = |s| fuse(&frames, &track, s).unwrap().gray.values;
            let (mn, me, md, mx) = (g(FusionStatistic::Minimum), g(FusionStatistic::Mean), g(FusionStatistic::Median), g(FusionStatistic::Maximum));
            for i in 0..len {
                prop_assert!(mn[i] <= md[i] && md[i] <= mx[i]);
                prop_assert!(mn[i] <= me[i] && me[i] <= mx[i]);
            }
        }

        #[test]
        fn inversion_duality((len, stack) in arb_stack()) {
            let frames = gray_frames(&stack, len, 1);
            let inverted: Vec<Frame> = frames.iter().map(Frame::inverted).collect();
            let track = full_track(stack.len(), len, 1);
            let a = fuse(&inverted, &track, FusionStatistic::Minimum).unwrap().gray;
            let b = fuse(&frames, &track, FusionStatistic::Maximum).unwrap().gray.inverted();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn permutation_leaves_gray_unchanged((len, stack) in arb_stack(), seed in any::<u64>()) {
            let mut perm = stack.clone();
            let k = perm.len();
            perm.rotate_left((seed as usize) % k);
            if seed % 2 == 0 { perm.reverse(); }
            let track = full_track(k, len, 1);
            for s in [FusionStatistic::Minimum, FusionStatistic::Mean, FusionStatistic::Median, FusionStatistic::Maximum] {
                let a = fuse(&gray_frames(&stack, len, 1), &track, s).unwrap().gray;
                let b = fuse(&gray_frames(&perm, len, 1), &track, s).unwrap().gray;
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn extra_instance_is_monotone((len, stack) in arb_stack(), extra in proptest::collection::vec(any::<u8>(), 6)) {
            let frames = gray_frames(&stack, len, 1);
            let mut more = stack.clone();
            more.push(extra[..len].to_vec());
            let more_frames = gray_frames(&more, len, 1);
            let t0 = full_track(stack.len(), len, 1);
            let t1 = full_track(more.len(), len, 1);
            let min0 = fuse(&frames, &t0, FusionStatistic::Minimum).unwrap().gray.values;
            let min1 = fuse(&more_frames, &t1, FusionStatistic::Minimum).unwrap().gray.values;
            let max0 = fuse(&frames, &t0, FusionStatistic::Maximum).unwrap().gray.values;
            let max1 = fuse(&more_frames, &t1, FusionStatistic::Maximum).unwrap().gray.values;
            for i in 0..len {
                prop_assert!(min1[i] <= min0[i]);
                prop_assert!(max1[i] >= max0[i]);
            }
        }
    }
}
