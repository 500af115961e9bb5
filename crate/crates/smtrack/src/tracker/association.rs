//! Track-perspective association and track-aware initialization.
//!
//! TPA matches from the track's point of view in three stages: every live
//! track against high-confidence detections, the remainder against
//! low-confidence detections with a stricter gate, and still-unmatched
//! *active* tracks against NMS-suppressed detections with the strictest
//! gate. Suppressed detections may sustain a track but never spawn one.

use crate::geometry::{iou, BatchNormFactor, BBox};
use crate::head::Detection;
use crate::tracker::assignment::{cost_matrix, hungarian_assign, CostMetric};
use crate::tracker::{Track, TrackStatus};

/// Similarity gates per TPA stage (minimum similarity to be feasible).
#[derive(Debug, Clone, Copy)]
pub struct StageGates {
    pub high: f64,
    pub low: f64,
    pub suppressed: f64,
}

impl Default for StageGates {
    fn default() -> Self {
        StageGates {
            high: 0.3,
            low: 0.4,
            suppressed: 0.5,
        }
    }
}

/// Which detection pool a TPA match came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStage {
    High,
    Low,
    Suppressed,
}

/// One association result: track index, detection, and the stage that
/// produced it.
#[derive(Debug, Clone)]
pub struct TpaMatch {
    pub track_idx: usize,
    pub detection: Detection,
    pub stage: MatchStage,
}

/// Outcome of track-perspective association for one frame.
#[derive(Debug, Clone, Default)]
pub struct TpaResult {
    pub matches: Vec<TpaMatch>,
    pub unmatched_tracks: Vec<usize>,
    /// Unmatched high-confidence detections (the only spawn candidates).
    pub unmatched_high: Vec<Detection>,
    /// Unmatched low-confidence detections, reported for completeness.
    pub unmatched_low: Vec<Detection>,
}

fn run_stage(
    tracks: &[Track],
    candidates: &[usize],
    dets: &[Detection],
    metric: CostMetric,
    gate: f64,
    cb: &BatchNormFactor,
) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    if candidates.is_empty() || dets.is_empty() {
        return (vec![], candidates.to_vec(), (0..dets.len()).collect());
    }
    let track_boxes: Vec<BBox> = candidates.iter().map(|&i| tracks[i].predicted_box()).collect();
    let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
    let c = cost_matrix(&track_boxes, &det_boxes, metric, gate, cb);
    let a = hungarian_assign(&c);
    let matches = a
        .matches
        .into_iter()
        .map(|(row, col)| (candidates[row], col))
        .collect();
    let unmatched_tracks = a.unmatched_rows.into_iter().map(|r| candidates[r]).collect();
    (matches, unmatched_tracks, a.unmatched_cols)
}

/// Staged, track-centric matching over the three detection sources. Lost
/// tracks take part in stages 1-2 only; stage 3 is restricted to active
/// tracks and can be disabled wholesale (`enable_stage3 = false`).
#[allow(clippy::too_many_arguments)]
pub fn track_perspective_association(
    tracks: &[Track],
    dets_high: &[Detection],
    dets_low: &[Detection],
    dets_suppressed: &[Detection],
    gates: StageGates,
    metric: CostMetric,
    cb: &BatchNormFactor,
    enable_stage3: bool,
) -> TpaResult {
    let mut result = TpaResult::default();

    let stage1: Vec<usize> = (0..tracks.len()).collect();
    let (m1, rest1, un_high) = run_stage(tracks, &stage1, dets_high, metric, gates.high, cb);
    for (t, d) in m1 {
        result.matches.push(TpaMatch {
            track_idx: t,
            detection: dets_high[d],
            stage: MatchStage::High,
        });
    }
    result.unmatched_high = un_high.into_iter().map(|j| dets_high[j]).collect();

    let (m2, rest2, un_low) = run_stage(tracks, &rest1, dets_low, metric, gates.low, cb);
    for (t, d) in m2 {
        result.matches.push(TpaMatch {
            track_idx: t,
            detection: dets_low[d],
            stage: MatchStage::Low,
        });
    }
    result.unmatched_low = un_low.into_iter().map(|j| dets_low[j]).collect();

    let (stage3, skipped): (Vec<usize>, Vec<usize>) = rest2
        .into_iter()
        .partition(|&i| enable_stage3 && tracks[i].status == TrackStatus::Active);
    let (m3, rest3, _) = run_stage(
        tracks,
        &stage3,
        dets_suppressed,
        metric,
        gates.suppressed,
        cb,
    );
    for (t, d) in m3 {
        result.matches.push(TpaMatch {
            track_idx: t,
            detection: dets_suppressed[d],
            stage: MatchStage::Suppressed,
        });
    }
    result.unmatched_tracks = skipped.into_iter().chain(rest3).collect();
    result.unmatched_tracks.sort_unstable();
    result
}

/// Track-aware initialization: a candidate spawns only when it overlaps no
/// post-association active track and no higher-scored candidate of the same
/// frame by `overlap_thresh` or more. Returns the indices of the candidates
/// allowed to spawn, in score order.
pub fn track_aware_initialization(
    unmatched_high: &[Detection],
    active_boxes: &[BBox],
    overlap_thresh: f64,
) -> Vec<usize> {
    debug_assert!(overlap_thresh > 0.0 && overlap_thresh < 1.0);
    let mut order: Vec<usize> = (0..unmatched_high.len()).collect();
    order.sort_by(|&a, &b| {
        unmatched_high[b]
            .score
            .partial_cmp(&unmatched_high[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut spawned = Vec::new();
    for &i in &order {
        let b = &unmatched_high[i].bbox;
        let hits_track = active_boxes.iter().any(|t| iou(t, b) >= overlap_thresh);
        if hits_track {
            continue;
        }
        let hits_better = order
            .iter()
            .take_while(|&&j| j != i)
            .any(|&j| iou(&unmatched_high[j].bbox, b) >= overlap_thresh);
        if hits_better {
            continue;
        }
        spawned.push(i);
    }
    spawned
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::DetectionSource;
    use crate::tracker::kalman::KalmanFilter;

    fn det(cx: f64, cy: f64, score: f64, source: DetectionSource) -> Detection {
        Detection {
            bbox: BBox::new(cx, cy, 10.0, 10.0).unwrap(),
            score,
            class_id: 0,
            source,
        }
    }

    fn track_at(id: u64, cx: f64, cy: f64, status: TrackStatus) -> Track {
        let kf = KalmanFilter::default();
        let mut t = Track::new(id, kf.initiate(&BBox::new(cx, cy, 10.0, 10.0).unwrap()), 0.9);
        t.status = status;
        t
    }

    fn cb() -> BatchNormFactor {
        BatchNormFactor::fallback()
    }

    #[test]
    fn stage1_matches_high() {
        let tracks = vec![track_at(1, 0.0, 0.0, TrackStatus::Active)];
        let high = vec![det(1.0, 0.0, 0.9, DetectionSource::HighConf)];
        let r = track_perspective_association(
            &tracks, &high, &[], &[], StageGates::default(), CostMetric::Iou, &cb(), true,
        );
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].stage, MatchStage::High);
        assert!(r.unmatched_tracks.is_empty());
    }

    #[test]
    fn stage2_catches_low_conf() {
        let tracks = vec![track_at(1, 0.0, 0.0, TrackStatus::Active)];
        let low = vec![det(1.0, 0.0, 0.3, DetectionSource::LowConf)];
        let r = track_perspective_association(
            &tracks, &[], &low, &[], StageGates::default(), CostMetric::Iou, &cb(), true,
        );
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].stage, MatchStage::Low);
    }

    #[test]
    fn stage3_only_for_active_tracks() {
        let sup = vec![det(0.5, 0.0, 0.5, DetectionSource::NmsSuppressed)];
        for (status, expect) in [
            (TrackStatus::Active, 1usize),
            (TrackStatus::Lost, 0),
            (TrackStatus::Tentative, 0),
        ] {
            let tracks = vec![track_at(1, 0.0, 0.0, status)];
            let r = track_perspective_association(
                &tracks, &[], &[], &sup, StageGates::default(), CostMetric::Iou, &cb(), true,
            );
            assert_eq!(r.matches.len(), expect, "status {status:?}");
        }
    }

    #[test]
    fn stage3_can_be_disabled() {
        let tracks = vec![track_at(1, 0.0, 0.0, TrackStatus::Active)];
        let sup = vec![det(0.5, 0.0, 0.5, DetectionSource::NmsSuppressed)];
        let r = track_perspective_association(
            &tracks, &[], &[], &sup, StageGates::default(), CostMetric::Iou, &cb(), false,
        );
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_tracks, vec![0]);
    }

    #[test]
    fn tai_suppresses_overlap_with_track() {
        let dets = vec![det(0.0, 0.0, 0.9, DetectionSource::HighConf)];
        let active = vec![BBox::new(0.5, 0.0, 10.0, 10.0).unwrap()];
        assert!(track_aware_initialization(&dets, &active, 0.5).is_empty());
    }

    #[test]
    fn tai_spawns_isolated_detection() {
        let dets = vec![det(100.0, 100.0, 0.9, DetectionSource::HighConf)];
        let active = vec![BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()];
        assert_eq!(track_aware_initialization(&dets, &active, 0.5), vec![0]);
    }

    #[test]
    fn tai_keeps_only_higher_scored_of_pair() {
        let dets = vec![
            det(0.0, 0.0, 0.7, DetectionSource::HighConf),
            det(1.0, 0.0, 0.9, DetectionSource::HighConf),
        ];
        assert_eq!(track_aware_initialization(&dets, &[], 0.5), vec![1]);
    }
}
