//! Cost matrices and exact minimum-cost assignment.
//!
//! The solver is the O(n^3) potentials form of the Kuhn-Munkres algorithm
//! on a square padded matrix. Infeasible (gated) entries are replaced by a
//! large finite sentinel, so the optimum takes as many feasible matches as
//! possible and, among those, the minimum total cost; sentinel matches are
//! stripped from the result.

use crate::geometry::{iou, nwd_similarity, BatchNormFactor, BBox};
use ndarray::Array2;

/// Similarity family used to fill association costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMetric {
    Iou,
    Nwd,
}

/// Rows are tracks, columns are detections; entries are `1 - similarity`
/// in [0, 1], with `f64::INFINITY` marking gated-out pairs.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub costs: Array2<f64>,
}

impl CostMatrix {
    pub fn rows(&self) -> usize {
        self.costs.nrows()
    }

    pub fn cols(&self) -> usize {
        self.costs.ncols()
    }
}

/// Build the gated cost matrix between predicted track boxes and detection
/// boxes. Pairs with similarity below `gate` are infeasible. For the NWD
/// metric the normalization factor comes from the caller (the current
/// frame's detections, by convention).
pub fn cost_matrix(
    track_boxes: &[BBox],
    det_boxes: &[BBox],
    metric: CostMetric,
    gate: f64,
    cb: &BatchNormFactor,
) -> CostMatrix {
    debug_assert!(gate > 0.0 && gate <= 1.0);
    let mut costs = Array2::from_elem((track_boxes.len(), det_boxes.len()), f64::INFINITY);
    for (i, t) in track_boxes.iter().enumerate() {
        for (j, d) in det_boxes.iter().enumerate() {
            let sim = match metric {
                CostMetric::Iou => iou(t, d),
                CostMetric::Nwd => nwd_similarity(t, d, cb),
            };
            if sim >= gate {
                costs[(i, j)] = 1.0 - sim;
            }
        }
    }
    CostMatrix { costs }
}

/// Result of an assignment round.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    /// Matched (row, col) pairs over feasible entries.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

const BIG: f64 = 1e9;

/// Exact minimum-cost assignment; infeasible entries are never matched.
pub fn hungarian_assign(c: &CostMatrix) -> Assignment {
    let (rows, cols) = (c.rows(), c.cols());
    if rows == 0 || cols == 0 {
        return Assignment {
            matches: vec![],
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        };
    }
    let dim = rows.max(cols);
    let mut cost = vec![vec![0.0f64; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            cost[i][j] = if i < rows && j < cols {
                let v = c.costs[(i, j)];
                if v.is_finite() {
                    v
                } else {
                    BIG
                }
            } else {
                0.0 // padding
            };
        }
    }
    let row_of_col = solve_square(&cost, dim);

    let mut matches = Vec::new();
    let mut matched_rows = vec![false; rows];
    let mut matched_cols = vec![false; cols];
    for (j, &i) in row_of_col.iter().enumerate() {
        if i < rows && j < cols && c.costs[(i, j)].is_finite() {
            matches.push((i, j));
            matched_rows[i] = true;
            matched_cols[j] = true;
        }
    }
    matches.sort_unstable();
    Assignment {
        matches,
        unmatched_rows: (0..rows).filter(|&i| !matched_rows[i]).collect(),
        unmatched_cols: (0..cols).filter(|&j| !matched_cols[j]).collect(),
    }
}

/// Potentials Kuhn-Munkres on a dense square matrix; returns, per column,
/// the matched row.
fn solve_square(cost: &[Vec<f64>], n: usize) -> Vec<usize> {
    // 1-based internal arrays; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| p[j].saturating_sub(1)).collect()
}
