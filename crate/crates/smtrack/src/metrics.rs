//! Tracking metrics: the CLEAR suite (MOTA, identity switches,
//! fragmentations), identity-F1, and the higher-order tracking accuracy
//! family with its detection/association components.

use crate::geometry::iou;
use crate::mot::Sequence;
use crate::tracker::{hungarian_assign, CostMatrix};
use ndarray::Array2;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

/// Localization thresholds of the higher-order metric: 0.05, 0.10, ... 0.95.
pub fn alpha_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Bundled report; rates are fractions in [0, 1] and display multiplied by
/// 100, following the benchmark convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub assr: f64,
    pub mota: f64,
    pub idf1: f64,
    pub ids: u32,
    pub frag: u32,
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "HOTA {:5.2}  DetA {:5.2}  AssA {:5.2}  AssR {:5.2}  MOTA {:5.2}  IDF1 {:5.2}  IDs {}  Frag {}",
            self.hota * 100.0,
            self.deta * 100.0,
            self.assa * 100.0,
            self.assr * 100.0,
            self.mota * 100.0,
            self.idf1 * 100.0,
            self.ids,
            self.frag
        )
    }
}

/// CLEAR counts at one IoU threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearResult {
    pub mota: f64,
    pub ids: u32,
    pub frag: u32,
    pub fn_count: u32,
    pub fp_count: u32,
    pub num_gt: u32,
}

type FrameItems = Vec<(i64, crate::geometry::BBox)>;

fn frames_union(gt: &Sequence, pred: &Sequence) -> Vec<u32> {
    let mut frames: BTreeSet<u32> = BTreeSet::new();
    frames.extend(gt.records.iter().map(|r| r.frame));
    frames.extend(pred.records.iter().map(|r| r.frame));
    frames.into_iter().collect()
}

fn items_at(seq: &Sequence) -> BTreeMap<u32, FrameItems> {
    let mut map: BTreeMap<u32, FrameItems> = BTreeMap::new();
    for r in &seq.records {
        map.entry(r.frame).or_default().push((r.id, r.bbox()));
    }
    map
}

/// Frame-by-frame CLEAR evaluation with match-continuation preference:
/// a pair matched in the previous frame keeps its match while it still
/// clears the IoU threshold; everything else goes through exact assignment.
pub fn clear_metrics(gt: &Sequence, pred: &Sequence, iou_match_thresh: f64) -> ClearResult {
    let gt_items = items_at(gt);
    let pred_items = items_at(pred);
    let empty: FrameItems = Vec::new();

    // last pred id each gt was matched to, and gap bookkeeping for Frag
    let mut last_pred: HashMap<i64, i64> = HashMap::new();
    let mut prev_frame_match: HashMap<i64, i64> = HashMap::new();
    let mut had_match: HashMap<i64, bool> = HashMap::new();
    let mut in_gap: HashMap<i64, bool> = HashMap::new();

    let (mut ids, mut frag, mut fn_count, mut fp_count, mut num_gt) = (0u32, 0u32, 0u32, 0u32, 0u32);

    for f in frames_union(gt, pred) {
        let gts = gt_items.get(&f).unwrap_or(&empty);
        let preds = pred_items.get(&f).unwrap_or(&empty);
        num_gt += gts.len() as u32;

        let mut gt_free: Vec<usize> = (0..gts.len()).collect();
        let mut pred_free: Vec<usize> = (0..preds.len()).collect();
        let mut matches: Vec<(usize, usize)> = Vec::new();

        // continuation pass
        let mut keep: Vec<(usize, usize)> = Vec::new();
        for &gi in &gt_free {
            let (gid, gbox) = &gts[gi];
            if let Some(&pid) = prev_frame_match.get(gid) {
                if let Some(pi) = preds.iter().position(|(q, _)| *q == pid) {
                    if pred_free.contains(&pi) && iou(gbox, &preds[pi].1) >= iou_match_thresh {
                        keep.push((gi, pi));
                    }
                }
            }
        }
        for (gi, pi) in keep {
            if gt_free.contains(&gi) && pred_free.contains(&pi) {
                gt_free.retain(|&x| x != gi);
                pred_free.retain(|&x| x != pi);
                matches.push((gi, pi));
            }
        }

        // exact assignment over the rest
        if !gt_free.is_empty() && !pred_free.is_empty() {
            let mut costs = Array2::from_elem((gt_free.len(), pred_free.len()), f64::INFINITY);
            for (r, &gi) in gt_free.iter().enumerate() {
                for (c, &pi) in pred_free.iter().enumerate() {
                    let v = iou(&gts[gi].1, &preds[pi].1);
                    if v >= iou_match_thresh {
                        costs[(r, c)] = 1.0 - v;
                    }
                }
            }
            let a = hungarian_assign(&CostMatrix { costs });
            for (r, c) in a.matches {
                matches.push((gt_free[r], pred_free[c]));
            }
        }

        fn_count += (gts.len() - matches.len()) as u32;
        fp_count += (preds.len() - matches.len()) as u32;

        prev_frame_match.clear();
        let mut matched_gids: BTreeSet<i64> = BTreeSet::new();
        for (gi, pi) in matches {
            let gid = gts[gi].0;
            let pid = preds[pi].0;
            matched_gids.insert(gid);
            if let Some(&prev) = last_pred.get(&gid) {
                if prev != pid {
                    ids += 1;
                }
            }
            if *had_match.get(&gid).unwrap_or(&false) && *in_gap.get(&gid).unwrap_or(&false) {
                frag += 1;
            }
            had_match.insert(gid, true);
            in_gap.insert(gid, false);
            last_pred.insert(gid, pid);
            prev_frame_match.insert(gid, pid);
        }
        for (gid, _) in gts {
            if !matched_gids.contains(gid) && *had_match.get(gid).unwrap_or(&false) {
                in_gap.insert(*gid, true);
            }
        }
    }

    let mota = if num_gt == 0 {
        0.0
    } else {
        1.0 - (fn_count + fp_count + ids) as f64 / num_gt as f64
    };
    ClearResult {
        mota,
        ids,
        frag,
        fn_count,
        fp_count,
        num_gt,
    }
}

/// Identity-F1: a global one-to-one mapping between ground-truth and
/// predicted identities maximizing the number of frames where the mapped
/// pair overlaps at the threshold.
pub fn idf1(gt: &Sequence, pred: &Sequence, iou_match_thresh: f64) -> f64 {
    let gt_items = items_at(gt);
    let pred_items = items_at(pred);

    let gt_ids: Vec<i64> = gt.ids();
    let pred_ids: Vec<i64> = pred.ids();
    let gi_of: HashMap<i64, usize> = gt_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pi_of: HashMap<i64, usize> = pred_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let mut overlap = Array2::<f64>::zeros((gt_ids.len().max(1), pred_ids.len().max(1)));
    for (f, gts) in &gt_items {
        if let Some(preds) = pred_items.get(f) {
            for (gid, gbox) in gts {
                for (pid, pbox) in preds {
                    if iou(gbox, pbox) >= iou_match_thresh {
                        overlap[(gi_of[gid], pi_of[pid])] += 1.0;
                    }
                }
            }
        }
    }

    let total_gt = gt.len() as f64;
    let total_pred = pred.len() as f64;
    if total_gt + total_pred == 0.0 {
        return 0.0;
    }
    if gt_ids.is_empty() || pred_ids.is_empty() {
        return 0.0;
    }

    let costs = overlap.mapv(|v| -v);
    let a = hungarian_assign(&CostMatrix { costs });
    let idtp: f64 = a.matches.iter().map(|&(i, j)| overlap[(i, j)]).sum();
    2.0 * idtp / (total_gt + total_pred)
}

/// Higher-order metric components, each already averaged over the
/// localization-threshold grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub assr: f64,
}

/// Reference two-pass evaluation: a first pass accumulates a global
/// alignment score between identities, a second pass matches per frame with
/// that alignment as a prior and thresholds the matched similarities per
/// alpha. Association scores are averaged over matched detections.
pub fn hota(gt: &Sequence, pred: &Sequence) -> HotaResult {
    let alphas = alpha_grid();
    let gt_items = items_at(gt);
    let pred_items = items_at(pred);
    let gt_ids: Vec<i64> = gt.ids();
    let pred_ids: Vec<i64> = pred.ids();
    let gi_of: HashMap<i64, usize> = gt_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pi_of: HashMap<i64, usize> = pred_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let (ng, np) = (gt_ids.len(), pred_ids.len());

    let total_gt: f64 = gt.len() as f64;
    let total_pred: f64 = pred.len() as f64;
    if total_gt == 0.0 && total_pred == 0.0 {
        return HotaResult {
            hota: 0.0,
            deta: 0.0,
            assa: 0.0,
            assr: 0.0,
        };
    }
    if ng == 0 || np == 0 {
        return HotaResult {
            hota: 0.0,
            deta: 0.0,
            assa: 0.0,
            assr: 0.0,
        };
    }

    let mut potential = Array2::<f64>::zeros((ng, np));
    let mut gt_count = vec![0.0f64; ng];
    let mut pred_count = vec![0.0f64; np];
    let empty: FrameItems = Vec::new();

    // pass 1: identity alignment prior
    for f in frames_union(gt, pred) {
        let gts = gt_items.get(&f).unwrap_or(&empty);
        let preds = pred_items.get(&f).unwrap_or(&empty);
        let mut sim = Array2::<f64>::zeros((gts.len(), preds.len()));
        for (r, (_, gbox)) in gts.iter().enumerate() {
            for (c, (_, pbox)) in preds.iter().enumerate() {
                sim[(r, c)] = iou(gbox, pbox);
            }
        }
        let row_sum: Vec<f64> = (0..gts.len()).map(|r| sim.row(r).sum()).collect();
        let col_sum: Vec<f64> = (0..preds.len()).map(|c| sim.column(c).sum()).collect();
        for (r, (gid, _)) in gts.iter().enumerate() {
            for (c, (pid, _)) in preds.iter().enumerate() {
                let denom = row_sum[r] + col_sum[c] - sim[(r, c)];
                if denom > f64::EPSILON {
                    potential[(gi_of[gid], pi_of[pid])] += sim[(r, c)] / denom;
                }
            }
        }
        for (gid, _) in gts {
            gt_count[gi_of[gid]] += 1.0;
        }
        for (pid, _) in preds {
            pred_count[pi_of[pid]] += 1.0;
        }
    }

    let mut alignment = Array2::<f64>::zeros((ng, np));
    for g in 0..ng {
        for p in 0..np {
            alignment[(g, p)] =
                potential[(g, p)] / (gt_count[g] + pred_count[p] - potential[(g, p)]);
        }
    }

    // pass 2: per-frame matching, thresholded per alpha
    let na = alphas.len();
    let mut tp = vec![0.0f64; na];
    let mut fn_ = vec![0.0f64; na];
    let mut fp = vec![0.0f64; na];
    let mut match_counts: Vec<Array2<f64>> = (0..na).map(|_| Array2::zeros((ng, np))).collect();

    for f in frames_union(gt, pred) {
        let gts = gt_items.get(&f).unwrap_or(&empty);
        let preds = pred_items.get(&f).unwrap_or(&empty);
        if gts.is_empty() && preds.is_empty() {
            continue;
        }
        let mut sim = Array2::<f64>::zeros((gts.len(), preds.len()));
        for (r, (_, gbox)) in gts.iter().enumerate() {
            for (c, (_, pbox)) in preds.iter().enumerate() {
                sim[(r, c)] = iou(gbox, pbox);
            }
        }
        let matches: Vec<(usize, usize)> = if gts.is_empty() || preds.is_empty() {
            Vec::new()
        } else {
            let mut costs = Array2::<f64>::zeros((gts.len(), preds.len()));
            for r in 0..gts.len() {
                for c in 0..preds.len() {
                    let (gid, pid) = (gts[r].0, preds[c].0);
                    costs[(r, c)] = -(alignment[(gi_of[&gid], pi_of[&pid])] * sim[(r, c)]);
                }
            }
            hungarian_assign(&CostMatrix { costs }).matches
        };
        for (a, &alpha) in alphas.iter().enumerate() {
            let mut matched = 0.0;
            for &(r, c) in &matches {
                if sim[(r, c)] >= alpha - f64::EPSILON {
                    matched += 1.0;
                    let (gid, pid) = (gts[r].0, preds[c].0);
                    match_counts[a][(gi_of[&gid], pi_of[&pid])] += 1.0;
                }
            }
            tp[a] += matched;
            fn_[a] += gts.len() as f64 - matched;
            fp[a] += preds.len() as f64 - matched;
        }
    }

    let (mut hota_sum, mut deta_sum, mut assa_sum, mut assr_sum) = (0.0, 0.0, 0.0, 0.0);
    for a in 0..na {
        let deta = tp[a] / (tp[a] + fn_[a] + fp[a]).max(1.0);
        let mut assa = 0.0;
        let mut assr = 0.0;
        for g in 0..ng {
            for p in 0..np {
                let mc = match_counts[a][(g, p)];
                if mc > 0.0 {
                    assa += mc * (mc / (gt_count[g] + pred_count[p] - mc));
                    assr += mc * (mc / gt_count[g]);
                }
            }
        }
        assa /= tp[a].max(1.0);
        assr /= tp[a].max(1.0);
        deta_sum += deta;
        assa_sum += assa;
        assr_sum += assr;
        hota_sum += (deta * assa).sqrt();
    }
    HotaResult {
        hota: hota_sum / na as f64,
        deta: deta_sum / na as f64,
        assa: assa_sum / na as f64,
        assr: assr_sum / na as f64,
    }
}

/// Evaluate all metrics at the standard 0.5 matching threshold.
pub fn evaluate(gt: &Sequence, pred: &Sequence) -> MetricReport {
    let clear = clear_metrics(gt, pred, 0.5);
    let idf1 = idf1(gt, pred, 0.5);
    let h = hota(gt, pred);
    MetricReport {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        assr: h.assr,
        mota: clear.mota,
        idf1,
        ids: clear.ids,
        frag: clear.frag,
    }
}
