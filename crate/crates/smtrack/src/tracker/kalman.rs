//! Constant-velocity Kalman filter over (cx, cy, aspect, height) with
//! noise-scale-adaptive updates: measurement noise is scaled by
//! `max(1 - detection confidence, eps)`, so confident detections pull the
//! state harder toward the measurement.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use nalgebra::{SMatrix, SVector};

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
type MeasVector = SVector<f64, 4>;
type MeasMatrix = SMatrix<f64, 4, 4>;
type ObsMatrix = SMatrix<f64, 4, 8>;

/// Floor for the NSA noise scale; a confidence of exactly 1 must not zero
/// the measurement noise.
pub const NSA_EPS: f64 = 1e-2;

/// Track motion state: mean (cx, cy, a, h, vcx, vcy, va, vh) and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanState {
    /// Box corresponding to the state's position components.
    pub fn bbox(&self) -> BBox {
        let a = self.mean[2];
        let h = self.mean[3];
        BBox {
            cx: self.mean[0],
            cy: self.mean[1],
            w: a * h,
            h,
        }
    }
}

fn measurement(z: &BBox) -> MeasVector {
    MeasVector::new(z.cx, z.cy, z.w / z.h, z.h)
}

/// Filter parameters; the position/velocity noise weights follow the usual
/// height-scaled convention.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        KalmanFilter {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
        }
    }
}

impl KalmanFilter {
    fn motion_matrix() -> StateMatrix {
        let mut f = StateMatrix::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        f
    }

    fn observation_matrix() -> ObsMatrix {
        let mut h = ObsMatrix::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        h
    }

    /// Start a track from a measurement with zero velocity and a broad
    /// height-scaled covariance.
    pub fn initiate(&self, z: &BBox) -> KalmanState {
        let m = measurement(z);
        let mut mean = StateVector::zeros();
        for i in 0..4 {
            mean[i] = m[i];
        }
        let wp = self.std_weight_position;
        let wv = self.std_weight_velocity;
        let h = z.h;
        let std = [
            2.0 * wp * h,
            2.0 * wp * h,
            1e-2,
            2.0 * wp * h,
            10.0 * wv * h,
            10.0 * wv * h,
            1e-5,
            10.0 * wv * h,
        ];
        let mut cov = StateMatrix::zeros();
        for i in 0..8 {
            cov[(i, i)] = std[i] * std[i];
        }
        KalmanState { mean, covariance: cov }
    }

    /// Predict one frame ahead: `x <- F x`, `P <- F P F' + Q` with motion
    /// noise scaled by the current height.
    pub fn predict(&self, s: &KalmanState) -> KalmanState {
        let f = Self::motion_matrix();
        let wp = self.std_weight_position;
        let wv = self.std_weight_velocity;
        let h = s.mean[3];
        let std = [
            wp * h,
            wp * h,
            1e-2,
            wp * h,
            wv * h,
            wv * h,
            1e-5,
            wv * h,
        ];
        let mut q = StateMatrix::zeros();
        for i in 0..8 {
            q[(i, i)] = std[i] * std[i];
        }
        let mean = f * s.mean;
        let covariance = f * s.covariance * f.transpose() + q;
        KalmanState {
            mean,
            covariance: symmetrize(&covariance),
        }
    }

    fn measurement_noise(&self, s: &KalmanState) -> MeasMatrix {
        let wp = self.std_weight_position;
        let h = s.mean[3];
        let std = [wp * h, wp * h, 1e-1, wp * h];
        let mut r = MeasMatrix::zeros();
        for i in 0..4 {
            r[(i, i)] = std[i] * std[i];
        }
        r
    }

    /// Vanilla Kalman update (equivalent to the NSA update at confidence 0).
    pub fn update(&self, s: &KalmanState, z: &BBox) -> Result<KalmanState> {
        self.update_nsa(s, z, 0.0)
    }

    /// Noise-scale-adaptive update: `R~ = max(1 - det_conf, eps) * R`.
    /// Joseph-form covariance update keeps the result symmetric PSD.
    pub fn update_nsa(&self, s: &KalmanState, z: &BBox, det_conf: f64) -> Result<KalmanState> {
        if !(0.0..=1.0).contains(&det_conf) {
            return Err(Error::InvalidValue(format!(
                "detection confidence {det_conf} outside [0, 1]"
            )));
        }
        let h_obs = Self::observation_matrix();
        let scale = (1.0 - det_conf).max(NSA_EPS);
        let r = self.measurement_noise(s) * scale;
        let innovation_cov = h_obs * s.covariance * h_obs.transpose() + r;
        let chol = innovation_cov.cholesky().ok_or_else(|| {
            Error::InvalidValue("projected covariance is not positive definite".into())
        })?;
        // K = P H' S^-1 via the Cholesky solve of S K' = H P'
        let pht = s.covariance * h_obs.transpose();
        let gain_t = chol.solve(&pht.transpose());
        let gain = gain_t.transpose();

        let innovation = measurement(z) - h_obs * s.mean;
        let mean = s.mean + gain * innovation;
        let ikh = StateMatrix::identity() - gain * h_obs;
        let covariance = ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
        let state = KalmanState {
            mean,
            covariance: symmetrize(&covariance),
        };
        if state.mean[3] <= 0.0 {
            return Err(Error::InvalidValue("updated height is non-positive".into()));
        }
        Ok(state)
    }
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}
