//! Greedy per-class non-maximum suppression that keeps the suppressed
//! detections, tagged, because the association stage still wants them.

use crate::geometry::iou;
use crate::head::{Detection, DetectionSource};
use std::collections::BTreeMap;

/// Greedy score-descending NMS per class. Ties break on the smaller input
/// index, so the output is deterministic. Every input detection lands in
/// exactly one of (kept, suppressed); suppressed items come back with
/// `source = NmsSuppressed`.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> (Vec<Detection>, Vec<Detection>) {
    debug_assert!(iou_thresh > 0.0 && iou_thresh < 1.0);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_class.entry(d.class_id).or_default().push(i);
    }
    let mut kept_idx = Vec::new();
    let mut supp_idx = Vec::new();
    for (_, mut idxs) in by_class {
        idxs.sort_by(|&a, &b| {
            dets[b]
                .score
                .partial_cmp(&dets[a].score)
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut kept_here: Vec<usize> = Vec::new();
        for &i in &idxs {
            let overlaps = kept_here
                .iter()
                .any(|&k| iou(&dets[i].bbox, &dets[k].bbox) >= iou_thresh);
            if overlaps {
                supp_idx.push(i);
            } else {
                kept_here.push(i);
            }
        }
        kept_idx.extend(kept_here);
    }
    kept_idx.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    supp_idx.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let kept = kept_idx.iter().map(|&i| dets[i]).collect();
    let suppressed = supp_idx
        .iter()
        .map(|&i| Detection {
            source: DetectionSource::NmsSuppressed,
            ..dets[i]
        })
        .collect();
    (kept, suppressed)
}

/// Full pre-tracker partition: drop below `tau_low`, run NMS, split the
/// kept set at `tau_high`. Returns (high, low, suppressed), disjoint.
pub fn partition_detections(
    dets: &[Detection],
    tau_high: f64,
    tau_low: f64,
    nms_iou: f64,
) -> (Vec<Detection>, Vec<Detection>, Vec<Detection>) {
    let candidates: Vec<Detection> = dets.iter().copied().filter(|d| d.score >= tau_low).collect();
    let (kept, suppressed) = nms(&candidates, nms_iou);
    let mut high = Vec::new();
    let mut low = Vec::new();
    for mut d in kept {
        if d.score >= tau_high {
            d.source = DetectionSource::HighConf;
            high.push(d);
        } else {
            d.source = DetectionSource::LowConf;
            low.push(d);
        }
    }
    (high, low, suppressed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn det(cx: f64, score: f64) -> Detection {
        Detection {
            bbox: BBox::new(cx, 0.0, 4.0, 4.0).unwrap(),
            score,
            class_id: 0,
            source: DetectionSource::HighConf,
        }
    }

    #[test]
    fn duplicate_suppressed() {
        let (kept, supp) = nms(&[det(0.0, 0.9), det(0.0, 0.8)], 0.7);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
        assert_eq!(supp.len(), 1);
        assert_eq!(supp[0].source, DetectionSource::NmsSuppressed);
    }

    #[test]
    fn disjoint_boxes_both_kept() {
        let (kept, supp) = nms(&[det(0.0, 0.9), det(100.0, 0.8)], 0.7);
        assert_eq!(kept.len(), 2);
        assert!(supp.is_empty());
    }

    #[test]
    fn kept_and_suppressed_partition_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let dets: Vec<Detection> = (0..rng.random_range(0..20))
                .map(|_| Detection {
                    bbox: BBox::new(
                        rng.random_range(0.0..40.0),
                        rng.random_range(0.0..40.0),
                        rng.random_range(2.0..10.0),
                        rng.random_range(2.0..10.0),
                    )
                    .unwrap(),
                    score: rng.random_range(0.0..1.0),
                    class_id: rng.random_range(0..3),
                    source: DetectionSource::HighConf,
                })
                .collect();
            let (kept, supp) = nms(&dets, 0.5);
            assert_eq!(kept.len() + supp.len(), dets.len());
            let mut all: Vec<(u64, u64)> = dets
                .iter()
                .map(|d| (d.bbox.cx.to_bits(), d.score.to_bits()))
                .collect();
            let mut got: Vec<(u64, u64)> = kept
                .iter()
                .chain(supp.iter())
                .map(|d| (d.bbox.cx.to_bits(), d.score.to_bits()))
                .collect();
            all.sort_unstable();
            got.sort_unstable();
            assert_eq!(all, got, "kept + suppressed must equal the input multiset");
        }
    }

    #[test]
    fn partition_is_threshold_consistent() {
        let dets = vec![det(0.0, 0.9), det(20.0, 0.3), det(40.0, 0.05)];
        let (high, low, supp) = partition_detections(&dets, 0.6, 0.1, 0.7);
        assert_eq!(high.len(), 1);
        assert_eq!(low.len(), 1);
        assert!(supp.is_empty());
        assert!(high.iter().all(|d| d.score >= 0.6));
        assert!(low.iter().all(|d| d.score >= 0.1 && d.score < 0.6));
    }
}
