//! Rank-5 activation tensors and the integer/spike representation switch.

use crate::error::{Error, Result};
use ndarray::{Array5, Axis};

/// How the values of a [`SpikeTensor`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    /// Post-neuron integers in `[0, d_max]` (training representation).
    /// Residual sums of such tensors may exceed `d_max`; only raw neuron
    /// outputs are guaranteed to stay within range.
    IntegerActivation,
    /// Binary values over `d_max` virtual sub-steps per outer timestep
    /// (inference representation). The leading axis has length `T * d_max`.
    BinarySpike,
}

/// Activation tensor indexed (timestep, batch, channel, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTensor {
    pub data: Array5<f32>,
    pub mode: SpikeMode,
    pub d_max: u32,
}

impl SpikeTensor {
    pub fn integer(data: Array5<f32>, d_max: u32) -> Self {
        SpikeTensor {
            data,
            mode: SpikeMode::IntegerActivation,
            d_max,
        }
    }

    pub fn zeros(t: usize, b: usize, c: usize, h: usize, w: usize, d_max: u32) -> Self {
        SpikeTensor::integer(Array5::zeros((t, b, c, h, w)), d_max)
    }

    /// Number of outer timesteps, independent of representation.
    pub fn outer_timesteps(&self) -> usize {
        match self.mode {
            SpikeMode::IntegerActivation => self.data.shape()[0],
            SpikeMode::BinarySpike => self.data.shape()[0] / self.d_max as usize,
        }
    }

    /// Expand integer activations into `d_max` binary virtual sub-steps per
    /// outer timestep: value `v` becomes `v` ones followed by zeros. The sum
    /// over each sub-step group reconstructs `v` exactly.
    pub fn expand_to_spikes(&self) -> Result<SpikeTensor> {
        if self.mode != SpikeMode::IntegerActivation {
            return Err(Error::InvalidValue(
                "expand_to_spikes requires an integer-activation tensor".into(),
            ));
        }
        let d = self.d_max as usize;
        let (t, b, c, h, w) = match self.data.shape() {
            [t, b, c, h, w] => (*t, *b, *c, *h, *w),
            _ => unreachable!(),
        };
        let mut out = Array5::<f32>::zeros((t * d, b, c, h, w));
        for (idx, &v) in self.data.indexed_iter() {
            if v.fract() != 0.0 || v < 0.0 || v > self.d_max as f32 {
                return Err(Error::InvalidValue(format!(
                    "activation {v} at {idx:?} is not an integer in [0, {}]",
                    self.d_max
                )));
            }
            let (ti, bi, ci, hi, wi) = idx;
            for sub in 0..(v as usize) {
                out[(ti * d + sub, bi, ci, hi, wi)] = 1.0;
            }
        }
        Ok(SpikeTensor {
            data: out,
            mode: SpikeMode::BinarySpike,
            d_max: self.d_max,
        })
    }

    /// Collapse binary sub-steps back to integer counts; exact inverse of
    /// [`Self::expand_to_spikes`].
    pub fn collapse_spikes(&self) -> Result<SpikeTensor> {
        if self.mode != SpikeMode::BinarySpike {
            return Err(Error::InvalidValue(
                "collapse_spikes requires a binary-spike tensor".into(),
            ));
        }
        let d = self.d_max as usize;
        let td = self.data.shape()[0];
        if td % d != 0 {
            return Err(Error::ShapeMismatch(format!(
                "spike axis length {td} is not a multiple of d_max {d}"
            )));
        }
        for &v in self.data.iter() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidValue(format!(
                    "binary-spike tensor contains non-binary value {v}"
                )));
            }
        }
        let (_, b, c, h, w) = match self.data.shape() {
            [t, b, c, h, w] => (*t, *b, *c, *h, *w),
            _ => unreachable!(),
        };
        let t = td / d;
        let mut out = Array5::<f32>::zeros((t, b, c, h, w));
        for ti in 0..t {
            let mut acc = out.index_axis_mut(Axis(0), ti);
            for sub in 0..d {
                acc += &self.data.index_axis(Axis(0), ti * d + sub);
            }
        }
        Ok(SpikeTensor::integer(out, self.d_max))
    }
}
