//! Tracking-by-detection pipeline: per-frame Kalman prediction,
//! track-perspective association over the three detection sources, NSA
//! updates, track-aware initialization and the tentative/active/lost
//! lifecycle. The whole association process is training-free.

pub mod assignment;
pub mod association;
pub mod kalman;

pub use assignment::{cost_matrix, hungarian_assign, Assignment, CostMatrix, CostMetric};
pub use association::{
    track_aware_initialization, track_perspective_association, MatchStage, StageGates, TpaMatch,
    TpaResult,
};
pub use kalman::{KalmanFilter, KalmanState};

use crate::geometry::{batch_norm_factor, BatchNormFactor, BBox, DEFAULT_LAMBDA};
use crate::head::Detection;

/// Lifecycle automaton states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
}

/// A persistent identity.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub kstate: KalmanState,
    /// Score of the last matched detection.
    pub conf: f64,
    pub status: TrackStatus,
    /// Consecutive-match count.
    pub hits: u32,
    /// Frames since the last matched detection.
    pub time_since_update: u32,
    /// Box of the last matched detection; matched frames are emitted with
    /// this box rather than the filtered state.
    pub last_box: BBox,
}

impl Track {
    pub fn new(id: u64, kstate: KalmanState, conf: f64) -> Self {
        let last_box = kstate.bbox();
        Track {
            id,
            kstate,
            conf,
            status: TrackStatus::Tentative,
            hits: 1,
            time_since_update: 0,
            last_box,
        }
    }

    /// Predicted box for association in the current frame.
    pub fn predicted_box(&self) -> BBox {
        self.kstate.bbox()
    }
}

/// Per-frame emission: one row per live confirmed track.
#[derive(Debug, Clone, Copy)]
pub struct TrackOutput {
    pub track_id: u64,
    pub bbox: BBox,
    pub conf: f64,
}

/// Tracker parameters; defaults follow the two-threshold association
/// family this pipeline descends from.
#[derive(Debug, Clone)]
pub struct TrackerParams {
    pub gates: StageGates,
    pub metric: CostMetric,
    /// Consecutive matches promoting Tentative to Active.
    pub confirm_hits: u32,
    /// Frames a Lost track survives without a match.
    pub max_lost: u32,
    /// Spawn-overlap threshold of track-aware initialization.
    pub overlap_thresh: f64,
    pub enable_stage3: bool,
    pub enable_tai: bool,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            gates: StageGates::default(),
            metric: CostMetric::Iou,
            confirm_hits: 2,
            max_lost: 30,
            overlap_thresh: 0.5,
            enable_stage3: true,
            enable_tai: true,
        }
    }
}

/// Sequential per-sequence tracker state machine. Frames must be fed in
/// order by a single owner; run one instance per sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackerParams,
    kf: KalmanFilter,
    tracks: Vec<Track>,
    next_id: u64,
    frame: u32,
    /// Rolling NWD normalization from the last non-empty detection set.
    nwd_cb: BatchNormFactor,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Tracker {
            params,
            kf: KalmanFilter::default(),
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
            nwd_cb: BatchNormFactor::fallback(),
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    /// Advance one frame with the partitioned detections and return the
    /// confirmed-track emissions.
    pub fn step(
        &mut self,
        dets_high: &[Detection],
        dets_low: &[Detection],
        dets_suppressed: &[Detection],
    ) -> Vec<TrackOutput> {
        self.frame += 1;

        for t in &mut self.tracks {
            t.kstate = self.kf.predict(&t.kstate);
        }

        // NWD normalization adapts to the boxes currently on screen.
        let frame_boxes: Vec<BBox> = dets_high
            .iter()
            .chain(dets_low.iter())
            .map(|d| d.bbox)
            .collect();
        if let Ok(cb) = batch_norm_factor(&frame_boxes, DEFAULT_LAMBDA) {
            self.nwd_cb = cb;
        }

        let tpa = track_perspective_association(
            &self.tracks,
            dets_high,
            dets_low,
            dets_suppressed,
            self.params.gates,
            self.params.metric,
            &self.nwd_cb,
            self.params.enable_stage3,
        );

        let mut matched = vec![false; self.tracks.len()];
        for m in &tpa.matches {
            matched[m.track_idx] = true;
            let t = &mut self.tracks[m.track_idx];
            if let Ok(updated) = self.kf.update_nsa(&t.kstate, &m.detection.bbox, m.detection.score)
            {
                t.kstate = updated;
            }
            t.conf = m.detection.score;
            t.last_box = m.detection.bbox;
        }

        let matched_ids: Vec<u64> = tpa
            .matches
            .iter()
            .map(|m| self.tracks[m.track_idx].id)
            .collect();
        apply_lifecycle(
            &mut self.tracks,
            &matched_ids,
            self.params.confirm_hits,
            self.params.max_lost,
        );

        // Spawn from unmatched high-confidence detections.
        let spawn_idx: Vec<usize> = if self.params.enable_tai {
            track_aware_initialization(
                &tpa.unmatched_high,
                &self
                    .tracks
                    .iter()
                    .filter(|t| t.status == TrackStatus::Active)
                    .map(|t| t.last_box)
                    .collect::<Vec<_>>(),
                self.params.overlap_thresh,
            )
        } else {
            (0..tpa.unmatched_high.len()).collect()
        };
        for i in spawn_idx {
            let d = &tpa.unmatched_high[i];
            let mut t = Track::new(self.next_id, self.kf.initiate(&d.bbox), d.score);
            t.last_box = d.bbox;
            // Sequence-start convention: frame-1 tracks are live immediately.
            if self.frame == 1 {
                t.status = TrackStatus::Active;
            }
            self.next_id += 1;
            self.tracks.push(t);
        }

        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Active && t.time_since_update == 0)
            .map(|t| TrackOutput {
                track_id: t.id,
                bbox: t.last_box,
                conf: t.conf,
            })
            .collect()
    }
}

/// Run the full detection-file pipeline: partition each frame's scored
/// boxes by the confidence thresholds (retaining NMS-suppressed ones) and
/// feed them through a fresh tracker. Returns per-frame emissions over
/// the sequence's full frame range.
pub fn track_detection_sequence(
    params: TrackerParams,
    dets: &crate::mot::Sequence,
    tau_high: f64,
    tau_low: f64,
    nms_iou: f64,
) -> Vec<(u32, Vec<TrackOutput>)> {
    use crate::head::{partition_detections, Detection, DetectionSource};
    let mut tracker = Tracker::new(params);
    let by_frame = dets.by_frame();
    let last = dets.max_frame();
    let mut out = Vec::new();
    for frame in 1..=last {
        let raw: Vec<Detection> = by_frame
            .get(&frame)
            .map(|rows| {
                rows.iter()
                    .map(|r| Detection {
                        bbox: r.bbox(),
                        score: r.conf,
                        class_id: 0,
                        source: DetectionSource::HighConf,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let (high, low, suppressed) = partition_detections(&raw, tau_high, tau_low, nms_iou);
        let outs = tracker.step(&high, &low, &suppressed);
        out.push((frame, outs));
    }
    out
}

/// Collect tracker emissions into a result sequence.
pub fn outputs_to_sequence(frames: &[(u32, Vec<TrackOutput>)]) -> crate::mot::Sequence {
    let mut records = Vec::new();
    for (frame, outs) in frames {
        for o in outs {
            records.push(crate::mot::SequenceRecord::from_parts(
                *frame,
                o.track_id as i64,
                &o.bbox,
                o.conf,
            ));
        }
    }
    crate::mot::Sequence::new(records)
}

/// Lifecycle transitions for one frame: matched tracks accumulate hits and
/// may confirm; unmatched active tracks become lost; lost tracks past
/// `max_lost` are dropped; unmatched tentative tracks are dropped
/// immediately.
pub fn apply_lifecycle(tracks: &mut Vec<Track>, matched_ids: &[u64], confirm_hits: u32, max_lost: u32) {
    let matched: std::collections::HashSet<u64> = matched_ids.iter().copied().collect();
    for t in tracks.iter_mut() {
        if matched.contains(&t.id) {
            t.hits += 1;
            t.time_since_update = 0;
            match t.status {
                TrackStatus::Tentative if t.hits >= confirm_hits => {
                    t.status = TrackStatus::Active;
                }
                TrackStatus::Lost => {
                    t.status = TrackStatus::Active;
                }
                _ => {}
            }
        } else {
            t.hits = 0;
            t.time_since_update += 1;
            if t.status == TrackStatus::Active {
                t.status = TrackStatus::Lost;
            }
        }
    }
    tracks.retain(|t| match t.status {
        TrackStatus::Tentative => t.time_since_update == 0,
        TrackStatus::Lost => t.time_since_update <= max_lost,
        TrackStatus::Active => true,
    });
}
