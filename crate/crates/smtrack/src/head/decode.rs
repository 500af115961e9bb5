//! Anchor-free decoding of head outputs into scored detections.
//!
//! Cell-corner convention: center = (grid_xy + raw_offset) * stride, size =
//! exp(raw_wh) * stride. The fused score is sigmoid(obj) * sigmoid(max cls).

use crate::geometry::BBox;
use crate::head::{Detection, DetectionSource, HeadOutput};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Decode all levels, tag by the (tau_high, tau_low) thresholds and drop
/// candidates below tau_low. Boxes are clipped to the image; fully outside
/// boxes are dropped. No NMS here; see [`crate::head::nms`].
pub fn decode_predictions(
    h: &HeadOutput,
    img_w: f64,
    img_h: f64,
    tau_high: f64,
    tau_low: f64,
) -> Vec<Detection> {
    debug_assert!(0.0 <= tau_low && tau_low < tau_high && tau_high <= 1.0);
    let mut out = Vec::new();
    for level in &h.levels {
        let stride = level.stride as f64;
        let (gh, gw) = (level.obj_logit.shape()[0], level.obj_logit.shape()[1]);
        let classes = level.cls_logits.shape()[0];
        for gy in 0..gh {
            for gx in 0..gw {
                let obj = sigmoid(level.obj_logit[(gy, gx)] as f64);
                let (mut best_cls, mut best_score) = (0usize, f64::NEG_INFINITY);
                for c in 0..classes {
                    let s = level.cls_logits[(c, gy, gx)] as f64;
                    if s > best_score {
                        best_score = s;
                        best_cls = c;
                    }
                }
                let score = obj * sigmoid(best_score);
                if score < tau_low {
                    continue;
                }
                let tx = level.box_raw[(0, gy, gx)] as f64;
                let ty = level.box_raw[(1, gy, gx)] as f64;
                let tw = level.box_raw[(2, gy, gx)] as f64;
                let th = level.box_raw[(3, gy, gx)] as f64;
                let raw = BBox {
                    cx: (gx as f64 + tx) * stride,
                    cy: (gy as f64 + ty) * stride,
                    w: tw.exp() * stride,
                    h: th.exp() * stride,
                };
                let Some(bbox) = raw.clip(img_w, img_h) else {
                    continue;
                };
                let source = if score >= tau_high {
                    DetectionSource::HighConf
                } else {
                    DetectionSource::LowConf
                };
                out.push(Detection {
                    bbox,
                    score,
                    class_id: best_cls,
                    source,
                });
            }
        }
    }
    out
}

/// Inverse of the decode map for an in-range box: returns the grid cell and
/// raw offsets that decode back to `b` at the given stride.
pub fn encode_box(b: &BBox, stride: usize) -> ((usize, usize), [f64; 4]) {
    let s = stride as f64;
    let gx = (b.cx / s).floor().max(0.0) as usize;
    let gy = (b.cy / s).floor().max(0.0) as usize;
    (
        (gx, gy),
        [
            b.cx / s - gx as f64,
            b.cy / s - gy as f64,
            (b.w / s).ln(),
            (b.h / s).ln(),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::HeadLevelOutput;
    use ndarray::{Array2, Array3};

    fn level_with(
        stride: usize,
        gh: usize,
        gw: usize,
        cell: (usize, usize),
        box_raw: [f32; 4],
        obj: f32,
        cls: f32,
    ) -> HeadLevelOutput {
        let mut lv = HeadLevelOutput {
            stride,
            cls_logits: Array3::from_elem((1, gh, gw), -20.0),
            box_raw: Array3::zeros((4, gh, gw)),
            obj_logit: Array2::from_elem((gh, gw), -20.0),
        };
        let (gy, gx) = (cell.1, cell.0);
        for (i, v) in box_raw.iter().enumerate() {
            lv.box_raw[(i, gy, gx)] = *v;
        }
        lv.obj_logit[(gy, gx)] = obj;
        lv.cls_logits[(0, gy, gx)] = cls;
        lv
    }

    #[test]
    fn cell_corner_decode() {
        let h = HeadOutput {
            levels: vec![level_with(8, 4, 4, (3, 2), [0.0, 0.0, 0.0, 0.0], 10.0, 10.0)],
        };
        let dets = decode_predictions(&h, 1000.0, 1000.0, 0.6, 0.1);
        assert_eq!(dets.len(), 1);
        assert!((dets[0].bbox.cx - 24.0).abs() < 1e-9);
        assert!((dets[0].bbox.cy - 16.0).abs() < 1e-9);
        // exp(0) * stride
        assert!((dets[0].bbox.w - 8.0).abs() < 1e-9);
        assert_eq!(dets[0].source, DetectionSource::HighConf);
    }

    #[test]
    fn very_negative_objectness_dropped() {
        let h = HeadOutput {
            levels: vec![level_with(8, 2, 2, (0, 0), [0.0; 4], -40.0, 10.0)],
        };
        assert!(decode_predictions(&h, 100.0, 100.0, 0.6, 0.1).is_empty());
    }

    #[test]
    fn zero_logit_fusion_is_quarter() {
        let h = HeadOutput {
            levels: vec![level_with(8, 2, 2, (1, 1), [0.1, 0.1, 0.0, 0.0], 0.0, 0.0)],
        };
        let dets = decode_predictions(&h, 100.0, 100.0, 0.6, 0.1);
        assert_eq!(dets.len(), 1);
        assert!((dets[0].score - 0.25).abs() < 1e-12);
        assert_eq!(dets[0].source, DetectionSource::LowConf);
    }

    #[test]
    fn decode_encode_roundtrip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let stride = [8usize, 16, 32][rng.random_range(0..3)];
            let b = BBox::new(
                rng.random_range(16.0..300.0),
                rng.random_range(16.0..200.0),
                rng.random_range(4.0..60.0),
                rng.random_range(4.0..60.0),
            )
            .unwrap();
            let ((gx, gy), raw) = encode_box(&b, stride);
            let s = stride as f64;
            let back = BBox {
                cx: (gx as f64 + raw[0]) * s,
                cy: (gy as f64 + raw[1]) * s,
                w: raw[2].exp() * s,
                h: raw[3].exp() * s,
            };
            assert!((back.cx - b.cx).abs() < 1e-6);
            assert!((back.cy - b.cy).abs() < 1e-6);
            assert!((back.w - b.w).abs() < 1e-6);
            assert!((back.h - b.h).abs() < 1e-6);
        }
    }
}
