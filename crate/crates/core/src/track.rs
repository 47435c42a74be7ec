//! Frame-to-frame association of detected regions into tracks, and integer
//! translation alignment of each track's instances.

use serde::{Deserialize, Serialize};

use crate::detect::TextRegion;
use crate::error::{Error, Result};
use crate::raster::{self, Frame, GrayImage, Rect};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackParams {
    /// Minimum IoU for a detection to extend a track.
    pub iou: f64,
    /// Number of consecutive frames a track may go unseen and still extend.
    pub max_gap: u32,
    pub min_len: usize,
    /// Alignment search radius in pixels.
    pub radius: i64,
    /// Align by normalized cross-correlation instead of SAD.
    pub use_ncc: bool,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            iou: 0.5,
            max_gap: 2,
            min_len: 3,
            radius: 4,
            use_ncc: false,
        }
    }
}

impl TrackParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou > 0.0 && self.iou <= 1.0) {
            return Err(Error::Config(format!("track.iou {} outside (0,1]", self.iou)));
        }
        if self.min_len == 0 {
            return Err(Error::Config("track.min_len must be positive".into()));
        }
        if self.radius < 1 {
            return Err(Error::Config("track.radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Active,
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextTrack {
    pub id: u32,
    /// `(frame index, rect)`; rects share the reference dimensions.
    pub instances: Vec<(u32, Rect)>,
    pub reference: Rect,
    /// Per-instance displacement applied to the instance rect when sampling.
    pub offsets: Vec<(i64, i64)>,
    pub status: TrackStatus,
    /// Set when some instance had no in-bounds alignment candidate.
    pub align_warning: bool,
    /// Raw rect of the most recent detection, used for association.
    last_detection: Rect,
}

impl TextTrack {
    pub fn first_frame(&self) -> u32 {
        self.instances[0].0
    }

    pub fn last_frame(&self) -> u32 {
        self.instances[self.instances.len() - 1].0
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Builds a track from explicit instances (rects are used as given).
    pub fn from_instances(id: u32, instances: Vec<(u32, Rect)>) -> Result<Self> {
        let Some(&(_, reference)) = instances.first() else {
            return Err(Error::Usage("track needs at least one instance".into()));
        };
        if instances.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Usage("track frame indices must increase".into()));
        }
        if instances.iter().any(|(_, r)| (r.w, r.h) != (reference.w, reference.h)) {
            return Err(Error::Usage("track instances must share the reference size".into()));
        }
        let n = instances.len();
        Ok(TextTrack {
            id,
            last_detection: instances[n - 1].1,
            instances,
            reference,
            offsets: vec![(0, 0); n],
            status: TrackStatus::Closed,
            align_warning: false,
        })
    }
}

/// Greedy IoU tracker over a sequence of frames of fixed size.
#[derive(Clone, Debug)]
pub struct Tracker {
    width: usize,
    height: usize,
    params: TrackParams,
    tracks: Vec<TextTrack>,
    next_id: u32,
}

impl Tracker {
    pub fn new(width: usize, height: usize, params: TrackParams) -> Self {
        Tracker {
            width,
            height,
            params,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn tracks(&self) -> &[TextTrack] {
        &self.tracks
    }

    /// Feeds the detections of frame `frame`.
    ///
    /// Tracks unseen for more than `max_gap` frames are closed first. Then
    /// (active track, detection) pairs with IoU at or above the threshold are
    /// taken greedily by descending IoU, ties by track id and detection
    /// order. Leftover detections open new tracks.
    pub fn associate(&mut self, frame: u32, detections: &[TextRegion]) -> Result<()> {
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::Usage(format!(
                "detection from frame {} passed with frame {frame}",
                d.frame
            )));
        }
        if let Some(t) = self
            .tracks
            .iter()
            .find(|t| t.status == TrackStatus::Active && t.last_frame() >= frame)
        {
            return Err(Error::Usage(format!(
                "frame {frame} is not after frame {} of track {}",
                t.last_frame(),
                t.id
            )));
        }
        for t in self.tracks.iter_mut() {
            if t.status == TrackStatus::Active && frame - t.last_frame() - 1 > self.params.max_gap {
                t.status = TrackStatus::Closed;
            }
        }

        let mut pairs = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            if t.status != TrackStatus::Active {
                continue;
            }
            for (di, d) in detections.iter().enumerate() {
                let iou = t.last_detection.iou(&d.rect);
                if iou >= self.params.iou {
                    pairs.push((iou, t.id, di, ti));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_taken = vec![false; self.tracks.len()];
        let mut det_taken = vec![false; detections.len()];
        for (_, _, di, ti) in pairs {
            if track_taken[ti] || det_taken[di] {
                continue;
            }
            track_taken[ti] = true;
            det_taken[di] = true;
            let rect = self.placed(&self.tracks[ti], &detections[di].rect);
            let t = &mut self.tracks[ti];
            t.instances.push((frame, rect));
            t.offsets.push((0, 0));
            t.last_detection = detections[di].rect;
        }
        for (di, d) in detections.iter().enumerate() {
            if det_taken[di] {
                continue;
            }
            self.tracks.push(TextTrack {
                id: self.next_id,
                instances: vec![(frame, d.rect)],
                reference: d.rect,
                offsets: vec![(0, 0)],
                status: TrackStatus::Active,
                align_warning: false,
                last_detection: d.rect,
            });
            self.next_id += 1;
        }
        Ok(())
    }

    /// Instance rect for a matched detection. Detection boxes jitter by
    /// more than the alignment radius on cluttered backgrounds, so the
    /// previous instance rect is kept while `det` still overlaps it at the
    /// association threshold; otherwise the rect is re-centred on `det`.
    fn placed(&self, track: &TextTrack, det: &Rect) -> Rect {
        let prev = track.instances[track.instances.len() - 1].1;
        if prev.iou(det) >= self.params.iou {
            prev
        } else {
            self.normalized(det, &track.reference)
        }
    }

    /// Reference-sized rect centred on `det`, kept inside the frame.
    fn normalized(&self, det: &Rect, reference: &Rect) -> Rect {
        let cx = det.x + det.w / 2;
        let cy = det.y + det.h / 2;
        let x = cx.saturating_sub(reference.w / 2).min(self.width - reference.w);
        let y = cy.saturating_sub(reference.h / 2).min(self.height - reference.h);
        Rect::new(x, y, reference.w, reference.h)
    }

    /// Closes every track, drops short ones and renumbers the survivors
    /// densely in first-frame order.
    pub fn finalize(self) -> Vec<TextTrack> {
        finalize(self.tracks, &self.params)
    }
}

/// See [`Tracker::finalize`].
pub fn finalize(mut tracks: Vec<TextTrack>, params: &TrackParams) -> Vec<TextTrack> {
    tracks.retain(|t| t.len() >= params.min_len);
    tracks.sort_by_key(|t| (t.first_frame(), t.id));
    for (i, t) in tracks.iter_mut().enumerate() {
        t.id = i as u32;
        t.status = TrackStatus::Closed;
    }
    tracks
}

fn frame_by_index(frames: &[Frame], index: u32) -> Result<&Frame> {
    frames
        .binary_search_by_key(&index, |f| f.index())
        .map(|i| &frames[i])
        .map_err(|_| Error::Usage(format!("frame {index} not supplied")))
}

fn sad(a: &GrayImage, b: &GrayImage) -> u64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
        .sum()
}

/// Zero-mean normalized cross-correlation of two equally sized patches;
/// 0 when either is flat.
fn patch_ncc(a: &GrayImage, b: &GrayImage) -> f64 {
    let n = a.values.len() as f64;
    let ma = a.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (u, v) = (x as f64 - ma, y as f64 - mb);
        num += u * v;
        da += u * u;
        db += v * v;
    }
    if da == 0.0 || db == 0.0 {
        0.0
    } else {
        num / (da * db).sqrt()
    }
}

/// Result of aligning one track.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    pub offsets: Vec<(i64, i64)>,
    /// True when some instance had every candidate shift out of bounds.
    pub warning: bool,
}

/// Finds, for every instance after the first, the shift within
/// `[-radius, radius]^2` whose patch best matches the reference patch.
/// Ties prefer the smallest `|dx|+|dy|`, then the smallest `dy`, then `dx`.
/// `frames` must be sorted by index.
pub fn align(frames: &[Frame], track: &TextTrack, params: &TrackParams) -> Result<Alignment> {
    let (ref_frame, ref_rect) = track.instances[0];
    let ref_patch = raster::crop_gray(&raster::to_gray(frame_by_index(frames, ref_frame)?), ref_rect)?;
    let mut offsets = vec![(0, 0)];
    let mut warning = false;
    let r = params.radius;
    for &(idx, rect) in &track.instances[1..] {
        let gray = raster::to_gray(frame_by_index(frames, idx)?);
        // key: (cost, |dx|+|dy|, dy, dx); costs are compared as ordered f64
        let mut best: Option<((f64, i64, i64, i64), (i64, i64))> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let Ok(patch) = raster::translate_sample(&gray, dx, dy, rect) else {
                    continue;
                };
                let cost = if params.use_ncc {
                    -patch_ncc(&patch, &ref_patch)
                } else {
                    sad(&patch, &ref_patch) as f64
                };
                let key = (cost, dx.abs() + dy.abs(), dy, dx);
                let better = match &best {
                    None => true,
                    Some((k, _)) => {
                        key.0
                            .total_cmp(&k.0)
                            .then((key.1, key.2, key.3).cmp(&(k.1, k.2, k.3)))
                            .is_lt()
                    }
                };
                if better {
                    best = Some((key, (dx, dy)));
                }
            }
        }
        match best {
            Some((_, off)) => offsets.push(off),
            None => {
                log::warn!("track {}: no in-bounds alignment for frame {idx}", track.id);
                warning = true;
                offsets.push((0, 0));
            }
        }
    }
    Ok(Alignment { offsets, warning })
}
