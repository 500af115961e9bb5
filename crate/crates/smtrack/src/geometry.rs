//! Box geometry and the Gaussian-Wasserstein similarity family.
//!
//! Boxes are embedded as 2D Gaussians (mean = center, covariance =
//! diag((w/2)^2, (h/2)^2)). The squared second-order Wasserstein distance
//! between two such Gaussians has a diagonal closed form, which an
//! exponential transform turns into a similarity in (0, 1]. The
//! normalization factor of that transform is recomputed per training batch
//! from the mean ground-truth box area, which keeps the loss sensitive to
//! small objects when a batch happens to contain mostly small objects.

use crate::error::{Error, Result};

/// Default scaling factor for the batch normalization factor.
pub const DEFAULT_LAMBDA: f64 = 0.8;

/// Fallback normalization factor used before the first non-empty batch:
/// `DEFAULT_LAMBDA` times a 16-px nominal object size.
pub const FALLBACK_C_B: f64 = DEFAULT_LAMBDA * 16.0;

/// Lower clamp for the normalization factor, guarding against degenerate
/// tiny ground truth.
pub const MIN_C_B: f64 = 1e-6;

/// Axis-aligned bounding box in center parameterization, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// Validating constructor: width and height must be strictly positive
    /// and all fields finite.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = BBox { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    /// Construct from top-left corner plus size (the MOTChallenge row layout).
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite =
            self.cx.is_finite() && self.cy.is_finite() && self.w.is_finite() && self.h.is_finite();
        if !finite {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive size w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    /// Corner form (x1, y1, x2, y2) under the half-open continuous convention.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    /// Top-left form (x, y, w, h).
    pub fn tlwh(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clip the box to the image rectangle `[0, img_w] x [0, img_h]`.
    /// Returns `None` when nothing remains.
    pub fn clip(&self, img_w: f64, img_h: f64) -> Option<BBox> {
        let (x1, y1, x2, y2) = self.corners();
        let x1 = x1.max(0.0);
        let y1 = y1.max(0.0);
        let x2 = x2.min(img_w);
        let y2 = y2.min(img_h);
        if x2 <= x1 || y2 <= y1 {
            return None;
        }
        Some(BBox {
            cx: (x1 + x2) / 2.0,
            cy: (y1 + y2) / 2.0,
            w: x2 - x1,
            h: y2 - y1,
        })
    }
}

/// A box embedded as a 2D Gaussian with diagonal covariance. The stored
/// `sqrt_cov_diag` is the matrix square root's diagonal, i.e. (w/2, h/2),
/// so the embedding round-trips with [`BBox`] losslessly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBox {
    pub mean: [f64; 2],
    pub sqrt_cov_diag: [f64; 2],
}

impl GaussianBox {
    pub fn to_bbox(&self) -> BBox {
        BBox {
            cx: self.mean[0],
            cy: self.mean[1],
            w: 2.0 * self.sqrt_cov_diag[0],
            h: 2.0 * self.sqrt_cov_diag[1],
        }
    }
}

/// Embed a box as a 2D Gaussian: mean (cx, cy), covariance diag((w/2)^2, (h/2)^2).
pub fn box_to_gaussian(b: &BBox) -> Result<GaussianBox> {
    b.validate()?;
    Ok(GaussianBox {
        mean: [b.cx, b.cy],
        sqrt_cov_diag: [b.w / 2.0, b.h / 2.0],
    })
}

/// Squared second-order Wasserstein distance between two Gaussian boxes:
/// `|m1 - m2|^2 + |S1 - S2|_F^2` with S the covariance square roots. For
/// diagonal covariances this reduces to
/// `(dcx)^2 + (dcy)^2 + (dw)^2/4 + (dh)^2/4`.
pub fn wasserstein2_squared(a: &GaussianBox, b: &GaussianBox) -> f64 {
    let dm0 = a.mean[0] - b.mean[0];
    let dm1 = a.mean[1] - b.mean[1];
    let ds0 = a.sqrt_cov_diag[0] - b.sqrt_cov_diag[0];
    let ds1 = a.sqrt_cov_diag[1] - b.sqrt_cov_diag[1];
    dm0 * dm0 + dm1 * dm1 + ds0 * ds0 + ds1 * ds1
}

/// Convenience wrapper computing the squared Wasserstein distance directly
/// between boxes. Panics on invalid boxes only via debug assertions; the
/// caller is expected to hold the box invariants.
pub fn w2_squared(a: &BBox, b: &BBox) -> f64 {
    let dm0 = a.cx - b.cx;
    let dm1 = a.cy - b.cy;
    let ds0 = (a.w - b.w) / 2.0;
    let ds1 = (a.h - b.h) / 2.0;
    dm0 * dm0 + dm1 * dm1 + ds0 * ds0 + ds1 * ds1
}

/// Batch-adaptive normalization factor: `lambda * sqrt(mean of w_i * h_i)`
/// over the ground-truth boxes of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchNormFactor {
    /// The factor itself, in pixels.
    pub c_b: f64,
    /// Number of ground-truth boxes that contributed.
    pub n: usize,
    /// Scaling factor used.
    pub lambda: f64,
}

impl BatchNormFactor {
    /// A fixed factor, used for the dataset-wide-constant baseline and as a
    /// fallback before any ground truth has been seen.
    pub fn fixed(c_b: f64) -> Self {
        BatchNormFactor {
            c_b: c_b.max(MIN_C_B),
            n: 0,
            lambda: DEFAULT_LAMBDA,
        }
    }

    /// Factor to use when no batch has been observed yet.
    pub fn fallback() -> Self {
        BatchNormFactor::fixed(FALLBACK_C_B)
    }
}

/// Compute the normalization factor from the ground-truth boxes of a batch.
/// Fails on an empty batch; callers reuse the previous factor or
/// [`BatchNormFactor::fallback`].
pub fn batch_norm_factor(gt_boxes: &[BBox], lambda: f64) -> Result<BatchNormFactor> {
    if gt_boxes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for b in gt_boxes {
        b.validate()?;
        sum += b.w * b.h;
    }
    let c_b = lambda * (sum / gt_boxes.len() as f64).sqrt();
    Ok(BatchNormFactor {
        c_b: c_b.max(MIN_C_B),
        n: gt_boxes.len(),
        lambda,
    })
}

/// Normalized Wasserstein similarity in (0, 1]:
/// `exp(-sqrt(W2^2 / c_b))`. Equals 1 iff the boxes are identical.
pub fn nwd_similarity(a: &BBox, b: &BBox, c_b: &BatchNormFactor) -> f64 {
    (-(w2_squared(a, b) / c_b.c_b).sqrt()).exp()
}

/// Scale-adaptive NWD regression loss: `1 - nwd_similarity`.
pub fn asa_nwd_loss(pred: &BBox, gt: &BBox, c_b: &BatchNormFactor) -> f64 {
    1.0 - nwd_similarity(pred, gt, c_b)
}

/// Analytic gradient of [`asa_nwd_loss`] with respect to the prediction's
/// (cx, cy, w, h). Defined as the zero vector at `pred == gt`, where the
/// square root is non-smooth; this is the subgradient that keeps the
/// optimum a fixed point.
pub fn asa_nwd_loss_grad(pred: &BBox, gt: &BBox, c_b: &BatchNormFactor) -> [f64; 4] {
    let w2 = w2_squared(pred, gt);
    if w2 == 0.0 {
        return [0.0; 4];
    }
    let c = c_b.c_b;
    let s = (w2 / c).sqrt();
    // loss = 1 - exp(-s); dloss/dW2 = exp(-s) / (2 s c)
    let coeff = (-s).exp() / (2.0 * s * c);
    [
        coeff * 2.0 * (pred.cx - gt.cx),
        coeff * 2.0 * (pred.cy - gt.cy),
        coeff * 0.5 * (pred.w - gt.w),
        coeff * 0.5 * (pred.h - gt.h),
    ]
}

/// Standard intersection-over-union on corner-converted boxes, in [0, 1].
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::function::erf::erf_inv;

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    fn random_box(rng: &mut ChaCha8Rng) -> BBox {
        bx(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(0.5..80.0),
            rng.random_range(0.5..80.0),
        )
    }

    /// Independent 1-D optimal-transport cost between two Gaussians via
    /// midpoint quadrature of the quantile coupling; summed per dimension
    /// this is an oracle for the closed-form W2^2.
    fn quantile_ot_cost_1d(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
        let n = 2_000_000usize;
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let z = std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0);
            let d = (m1 + s1 * z) - (m2 + s2 * z);
            acc += d * d;
        }
        acc / n as f64
    }

    fn w2_quadrature_oracle(a: &BBox, b: &BBox) -> f64 {
        quantile_ot_cost_1d(a.cx, a.w / 2.0, b.cx, b.w / 2.0)
            + quantile_ot_cost_1d(a.cy, a.h / 2.0, b.cy, b.h / 2.0)
    }

    /// Rasterization oracle for IoU: count sub-pixel cells inside each box.
    fn iou_raster_oracle(a: &BBox, b: &BBox, step: f64) -> f64 {
        let (ax1, ay1, ax2, ay2) = a.corners();
        let (bx1, by1, bx2, by2) = b.corners();
        let x_lo = ax1.min(bx1);
        let x_hi = ax2.max(bx2);
        let y_lo = ay1.min(by1);
        let y_hi = ay2.max(by2);
        let (mut inter, mut union) = (0u64, 0u64);
        let nx = ((x_hi - x_lo) / step).ceil() as usize;
        let ny = ((y_hi - y_lo) / step).ceil() as usize;
        for iy in 0..ny {
            let y = y_lo + (iy as f64 + 0.5) * step;
            for ix in 0..nx {
                let x = x_lo + (ix as f64 + 0.5) * step;
                let in_a = x >= ax1 && x < ax2 && y >= ay1 && y < ay2;
                let in_b = x >= bx1 && x < bx2 && y >= by1 && y < by2;
                if in_a && in_b {
                    inter += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn box_to_gaussian_definitional() {
        let g = box_to_gaussian(&bx(0.0, 0.0, 4.0, 2.0)).unwrap();
        assert_eq!(g.mean, [0.0, 0.0]);
        assert_eq!(g.sqrt_cov_diag, [2.0, 1.0]);

        let g = box_to_gaussian(&bx(1.0, -1.0, 1.0, 1.0)).unwrap();
        assert_eq!(g.mean, [1.0, -1.0]);
        assert_eq!(g.sqrt_cov_diag, [0.5, 0.5]);
    }

    #[test]
    fn box_to_gaussian_rejects_degenerate() {
        assert!(matches!(
            box_to_gaussian(&BBox { cx: 0.0, cy: 0.0, w: 0.0, h: 2.0 }),
            Err(Error::InvalidBox(_))
        ));
        assert!(BBox::new(0.0, 0.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn gaussian_roundtrip_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let b = random_box(&mut rng);
            let back = box_to_gaussian(&b).unwrap().to_bbox();
            assert_eq!(b.cx, back.cx);
            assert_eq!(b.cy, back.cy);
            // w/2 * 2 is exact in IEEE arithmetic
            assert_eq!(b.w, back.w);
            assert_eq!(b.h, back.h);
        }
    }

    #[test]
    fn w2_hand_values() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(w2_squared(&a, &a), 0.0);
        assert_eq!(w2_squared(&a, &bx(3.0, 4.0, 2.0, 2.0)), 25.0);
        assert_eq!(w2_squared(&a, &bx(0.0, 0.0, 4.0, 4.0)), 2.0);
    }

    #[test]
    fn w2_matches_quadrature_oracle() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        let b = bx(3.0, 4.0, 2.0, 2.0);
        assert_relative_eq!(w2_squared(&a, &b), w2_quadrature_oracle(&a, &b), max_relative = 1e-3);
        let c = bx(0.0, 0.0, 4.0, 4.0);
        assert_relative_eq!(w2_squared(&a, &c), w2_quadrature_oracle(&a, &c), max_relative = 1e-3);
    }

    #[test]
    fn w2_diagonal_equals_matrix_form() {
        // General Eq form with explicit 2x2 diagonal matrices and an
        // eigenvalue-based matrix square root.
        use nalgebra::Matrix2;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let cov = |x: &BBox| {
                Matrix2::new((x.w / 2.0) * (x.w / 2.0), 0.0, 0.0, (x.h / 2.0) * (x.h / 2.0))
            };
            let msqrt = |m: Matrix2<f64>| {
                let eig = nalgebra::SymmetricEigen::new(m);
                let d = Matrix2::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
                eig.eigenvectors * d * eig.eigenvectors.transpose()
            };
            let dm = nalgebra::Vector2::new(a.cx - b.cx, a.cy - b.cy);
            let ds = msqrt(cov(&a)) - msqrt(cov(&b));
            let matrix_form = dm.norm_squared() + ds.norm_squared();
            assert_relative_eq!(w2_squared(&a, &b), matrix_form, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn sqrt_w2_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let c = random_box(&mut rng);
            let dab = w2_squared(&a, &b).sqrt();
            let dba = w2_squared(&b, &a).sqrt();
            assert_eq!(dab, dba, "symmetry must be exact");
            let dac = w2_squared(&a, &c).sqrt();
            let dcb = w2_squared(&c, &b).sqrt();
            assert!(dab <= dac + dcb + 1e-9, "triangle inequality violated");
        }
        let a = random_box(&mut rng);
        assert_eq!(w2_squared(&a, &a), 0.0);
    }

    #[test]
    fn w2_translation_equivariance_exact() {
        // Dyadic coordinates and integer shifts keep every sum exact, so the
        // equivariance can be asserted bitwise.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let q = |r: &mut ChaCha8Rng, lo: i32, hi: i32| r.random_range(lo..hi) as f64 / 1024.0;
            let a = bx(q(&mut rng, -50_000, 50_000), q(&mut rng, -50_000, 50_000),
                       q(&mut rng, 1, 60_000), q(&mut rng, 1, 60_000));
            let b = bx(q(&mut rng, -50_000, 50_000), q(&mut rng, -50_000, 50_000),
                       q(&mut rng, 1, 60_000), q(&mut rng, 1, 60_000));
            let sx = rng.random_range(-100..100) as f64;
            let sy = rng.random_range(-100..100) as f64;
            let shift = |x: &BBox| bx(x.cx + sx, x.cy + sy, x.w, x.h);
            assert_eq!(w2_squared(&a, &b), w2_squared(&shift(&a), &shift(&b)));
        }
    }

    #[test]
    fn batch_norm_factor_hand_values() {
        let boxes = [bx(0.0, 0.0, 2.0, 2.0), bx(5.0, 5.0, 2.0, 2.0)];
        let f = batch_norm_factor(&boxes, 0.8).unwrap();
        assert_relative_eq!(f.c_b, 1.6, max_relative = 1e-15);
        assert_eq!(f.n, 2);

        let f = batch_norm_factor(&[bx(0.0, 0.0, 10.0, 10.0)], 1.0).unwrap();
        assert_eq!(f.c_b, 10.0);

        assert_eq!(DEFAULT_LAMBDA, 0.8);
        assert!(matches!(batch_norm_factor(&[], 0.8), Err(Error::EmptyBatch)));
    }

    #[test]
    fn batch_norm_factor_permutation_invariant() {
        // Integer-valued sizes make the sum exact, hence order-independent
        // bitwise; float sizes get a tolerance check.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let boxes: Vec<BBox> = (0..64)
            .map(|_| bx(0.0, 0.0, rng.random_range(1..64) as f64, rng.random_range(1..64) as f64))
            .collect();
        let mut shuffled = boxes.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        assert_eq!(
            batch_norm_factor(&boxes, 0.8).unwrap().c_b,
            batch_norm_factor(&shuffled, 0.8).unwrap().c_b
        );

        let boxes: Vec<BBox> = (0..64).map(|_| random_box(&mut rng)).collect();
        let mut shuffled = boxes.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        assert_relative_eq!(
            batch_norm_factor(&boxes, 0.8).unwrap().c_b,
            batch_norm_factor(&shuffled, 0.8).unwrap().c_b,
            max_relative = 1e-12
        );
    }

    #[test]
    fn nwd_similarity_values() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        let cb = BatchNormFactor::fixed(1.6);
        assert_eq!(nwd_similarity(&a, &a, &cb), 1.0);
        let s = nwd_similarity(&a, &bx(3.0, 4.0, 2.0, 2.0), &cb);
        assert_relative_eq!(s, (-(25.0f64 / 1.6).sqrt()).exp(), max_relative = 1e-15);
        assert_relative_eq!(s, 0.01919, max_relative = 1e-3);

        // monotone in the center offset
        let s1 = nwd_similarity(&a, &bx(1.0, 0.0, 2.0, 2.0), &cb);
        let s2 = nwd_similarity(&a, &bx(2.0, 0.0, 2.0, 2.0), &cb);
        assert!(s1 > s2);
    }

    #[test]
    fn nwd_similarity_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let cb = batch_norm_factor(&[a, b], 0.8).unwrap();
            let s = nwd_similarity(&a, &b, &cb);
            assert!(s > 0.0 && s <= 1.0);
            if a != b {
                assert!(s < 1.0);
            }
        }
    }

    #[test]
    fn asa_nwd_loss_values() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        let b = bx(3.0, 4.0, 2.0, 2.0);
        let cb = BatchNormFactor::fixed(1.6);
        assert_eq!(asa_nwd_loss(&a, &a, &cb), 0.0);
        assert_relative_eq!(asa_nwd_loss(&a, &b, &cb), 0.98081, max_relative = 1e-4);
        let l = asa_nwd_loss(&a, &b, &cb);
        assert!(l > 0.0 && l < 1.0);
    }

    #[test]
    fn grad_zero_at_identical_boxes() {
        let a = bx(1.0, 2.0, 3.0, 4.0);
        let cb = BatchNormFactor::fallback();
        assert_eq!(asa_nwd_loss_grad(&a, &a, &cb), [0.0; 4]);
    }

    #[test]
    fn grad_w2_component() {
        // dW2/dcx = 2 (cx_pred - cx_gt)
        let p = bx(1.0, 0.0, 2.0, 2.0);
        let g = bx(0.0, 0.0, 2.0, 2.0);
        let h = 1e-5;
        let fd = (w2_squared(&bx(1.0 + h, 0.0, 2.0, 2.0), &g)
            - w2_squared(&bx(1.0 - h, 0.0, 2.0, 2.0), &g))
            / (2.0 * h);
        assert_relative_eq!(fd, 2.0, max_relative = 1e-6);
        assert_relative_eq!(2.0 * (p.cx - g.cx), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let cb = BatchNormFactor::fixed(1.6);
        let pred = bx(0.0, 0.0, 2.0, 2.0);
        let gt = bx(3.0, 4.0, 2.0, 2.0);
        check_grad_fd(&pred, &gt, &cb, 1e-4);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 1000 {
            let pred = random_box(&mut rng);
            let gt = random_box(&mut rng);
            let cb = batch_norm_factor(&[gt], 0.8).unwrap();
            // Non-degenerate pairs only: outside (0.03, 6) the similarity is
            // either flat at 1 or saturated near 0, where central
            // differences cancel catastrophically and stop being an oracle.
            let s = (w2_squared(&pred, &gt) / cb.c_b).sqrt();
            if !(0.03..6.0).contains(&s) {
                continue;
            }
            check_grad_fd(&pred, &gt, &cb, 1e-4);
            checked += 1;
        }
    }

    fn fd_loss_grad(pred: &BBox, gt: &BBox, cb: &BatchNormFactor, h: f64) -> [f64; 4] {
        let mut fd = [0.0; 4];
        for k in 0..4 {
            let mut plus = *pred;
            let mut minus = *pred;
            match k {
                0 => {
                    plus.cx += h;
                    minus.cx -= h;
                }
                1 => {
                    plus.cy += h;
                    minus.cy -= h;
                }
                2 => {
                    plus.w += h;
                    minus.w -= h;
                }
                _ => {
                    plus.h += h;
                    minus.h -= h;
                }
            }
            fd[k] = (asa_nwd_loss(&plus, gt, cb) - asa_nwd_loss(&minus, gt, cb)) / (2.0 * h);
        }
        fd
    }

    fn check_grad_fd(pred: &BBox, gt: &BBox, cb: &BatchNormFactor, tol: f64) {
        let g = asa_nwd_loss_grad(pred, gt, cb);
        let fd = fd_loss_grad(pred, gt, cb, 1e-5);
        let diff: f64 = (0..4).map(|k| (g[k] - fd[k]) * (g[k] - fd[k])).sum::<f64>().sqrt();
        let scale = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        assert!(
            diff / scale < tol,
            "analytic {g:?} vs fd {fd:?} (rel err {}) for {pred:?} vs {gt:?}",
            diff / scale
        );
    }

    #[test]
    fn iou_values() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(10.0, 10.0, 2.0, 2.0)), 0.0);
        // intersection 2, union 6
        assert_relative_eq!(iou(&a, &bx(1.0, 0.0, 2.0, 2.0)), 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn iou_matches_rasterization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = bx(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(2.0..12.0),
                rng.random_range(2.0..12.0),
            );
            let b = bx(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(2.0..12.0),
                rng.random_range(2.0..12.0),
            );
            if iou(&a, &b) < 0.05 {
                // sliver overlaps need a far finer raster than is worth it
                continue;
            }
            assert_relative_eq!(iou(&a, &b), iou_raster_oracle(&a, &b, 0.02), max_relative = 2e-2);
        }
    }

    #[test]
    fn small_object_sensitivity_ordering() {
        // A fixed 2-px center shift costs a 4x4 box most of its IoU but only
        // a modest share of its NWD similarity under the batch factor of a
        // mixed {4x4, 64x64} batch. Values pinned from direct evaluation.
        let small = bx(0.0, 0.0, 4.0, 4.0);
        let small_shift = bx(2.0, 0.0, 4.0, 4.0);
        let large = bx(100.0, 100.0, 64.0, 64.0);
        let large_shift = bx(102.0, 100.0, 64.0, 64.0);
        let cb = batch_norm_factor(&[small, large], DEFAULT_LAMBDA).unwrap();

        let iou_drop_small = 1.0 - iou(&small, &small_shift);
        let iou_drop_large = 1.0 - iou(&large, &large_shift);
        let nwd_drop_small = 1.0 - nwd_similarity(&small, &small_shift, &cb);
        let nwd_drop_large = 1.0 - nwd_similarity(&large, &large_shift, &cb);

        assert!(iou_drop_small > nwd_drop_small);
        // IoU punishes the small box far harder than the large one; the
        // normalized similarity treats the same absolute shift evenly.
        assert!(iou_drop_small / iou_drop_large > 5.0);
        assert_relative_eq!(nwd_drop_small, nwd_drop_large, max_relative = 1e-12);

        // pinned regression values; a shift d costs IoU 2d/(w+d)
        assert_relative_eq!(iou_drop_small, 4.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(iou_drop_large, 4.0 / 66.0, max_relative = 1e-12);
        assert_relative_eq!(cb.c_b, 0.8 * ((16.0 + 4096.0) / 2.0f64).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(nwd_drop_small, 0.282_565, max_relative = 1e-4);
    }
}
