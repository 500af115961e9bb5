//! Convolution specs with optional batch-norm, plus the direct conv kernel
//! shared by training-mode and spike-mode execution. The accumulation order
//! is identical in both modes, which is what makes the integer/spike
//! duality bit-exact.

use crate::error::{Error, Result};
use crate::snn::tensor::{SpikeMode, SpikeTensor};
use ndarray::{Array1, Array4, Array5, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    /// 1x1 convolution mixing channels only.
    Pointwise,
    /// k x k convolution applied per channel (groups == channels).
    Depthwise { kernel: usize },
    /// k x k dense convolution.
    Standard { kernel: usize },
}

impl ConvKind {
    pub fn kernel(&self) -> usize {
        match self {
            ConvKind::Pointwise => 1,
            ConvKind::Depthwise { kernel } | ConvKind::Standard { kernel } => *kernel,
        }
    }

    pub fn groups(&self, channels: usize) -> usize {
        match self {
            ConvKind::Depthwise { .. } => channels,
            _ => 1,
        }
    }
}

/// Batch-norm parameters applied per output channel. At inference they fold
/// into the convolution weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub scale: Array1<f32>,
    pub shift: Array1<f32>,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
    pub eps: f32,
}

impl BatchNormParams {
    pub fn identity(channels: usize) -> Self {
        // eps = 0 keeps the affine gain at exactly 1
        BatchNormParams {
            scale: Array1::ones(channels),
            shift: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            eps: 0.0,
        }
    }

    pub fn random<R: Rng>(channels: usize, rng: &mut R) -> Self {
        BatchNormParams {
            scale: Array1::from_shape_fn(channels, |_| rng.random_range(0.5..1.5)),
            shift: Array1::from_shape_fn(channels, |_| rng.random_range(-0.2..0.2)),
            running_mean: Array1::from_shape_fn(channels, |_| rng.random_range(-0.5..0.5)),
            running_var: Array1::from_shape_fn(channels, |_| rng.random_range(0.5..2.0)),
            eps: 1e-5,
        }
    }

    /// Per-channel affine form (gain, bias) equivalent to this normalization.
    pub fn affine(&self) -> (Array1<f32>, Array1<f32>) {
        let gain = &self.scale / (&self.running_var + self.eps).mapv(f32::sqrt);
        let bias = &self.shift - &(&gain * &self.running_mean);
        (gain, bias)
    }
}

/// A convolution layer: weights, optional bias, optional batch-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub kind: ConvKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// Layout (out_channels, in_channels / groups, k, k).
    pub weights: Array4<f32>,
    pub bias: Option<Array1<f32>>,
    pub bn: Option<BatchNormParams>,
}

impl ConvSpec {
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            kind: ConvKind::Pointwise,
            in_channels,
            out_channels,
            stride: 1,
            weights: Array4::zeros((out_channels, in_channels, 1, 1)),
            bias: None,
            bn: None,
        }
    }

    pub fn depthwise(channels: usize, kernel: usize) -> Self {
        ConvSpec {
            kind: ConvKind::Depthwise { kernel },
            in_channels: channels,
            out_channels: channels,
            stride: 1,
            weights: Array4::zeros((channels, 1, kernel, kernel)),
            bias: None,
            bn: None,
        }
    }

    pub fn standard(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvSpec {
            kind: ConvKind::Standard { kernel },
            in_channels,
            out_channels,
            stride: 1,
            weights: Array4::zeros((out_channels, in_channels, kernel, kernel)),
            bias: None,
            bn: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_bn(mut self, bn: BatchNormParams) -> Self {
        self.bn = Some(bn);
        self
    }

    /// Kaiming-style random weights for tests and toy models.
    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        let fan_in = (self.in_channels / self.kind.groups(self.in_channels))
            * self.kind.kernel()
            * self.kind.kernel();
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).unwrap();
        self.weights.mapv_inplace(|_| normal.sample(rng) as f32);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let ConvKind::Depthwise { .. } = self.kind {
            if self.in_channels != self.out_channels {
                return Err(Error::ShapeMismatch(format!(
                    "depthwise conv requires in == out channels, got {} vs {}",
                    self.in_channels, self.out_channels
                )));
            }
        }
        let k = self.kind.kernel();
        let groups = self.kind.groups(self.in_channels);
        let expect = [self.out_channels, self.in_channels / groups, k, k];
        if self.weights.shape() != expect {
            return Err(Error::ShapeMismatch(format!(
                "weight shape {:?}, expected {:?}",
                self.weights.shape(),
                expect
            )));
        }
        Ok(())
    }

    /// Fold the batch-norm into weights and bias, producing the fused
    /// inference form (bn == None).
    pub fn fold_batch_norm(&self) -> ConvSpec {
        let Some(bn) = &self.bn else {
            return self.clone();
        };
        let (gain, bn_bias) = bn.affine();
        let mut fused = self.clone();
        for o in 0..self.out_channels {
            let g = gain[o];
            fused
                .weights
                .index_axis_mut(Axis(0), o)
                .mapv_inplace(|w| w * g);
        }
        let base = match &self.bias {
            Some(b) => b * &gain + &bn_bias,
            None => bn_bias,
        };
        fused.bias = Some(base);
        fused.bn = None;
        fused
    }

    /// Apply the layer to one timestep (batch, channel, h, w).
    pub fn forward_frame(&self, x: &Array4<f32>) -> Result<Array4<f32>> {
        self.validate()?;
        if x.shape()[1] != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, conv expects {}",
                x.shape()[1],
                self.in_channels
            )));
        }
        let mut y = conv2d(
            x,
            &self.weights,
            self.stride,
            self.kind.kernel() / 2,
            self.kind.groups(self.in_channels),
        );
        if let Some(b) = &self.bias {
            for o in 0..self.out_channels {
                y.index_axis_mut(Axis(1), o).mapv_inplace(|v| v + b[o]);
            }
        }
        if let Some(bn) = &self.bn {
            let (gain, bias) = bn.affine();
            for o in 0..self.out_channels {
                let (g, bb) = (gain[o], bias[o]);
                y.index_axis_mut(Axis(1), o).mapv_inplace(|v| v * g + bb);
            }
        }
        Ok(y)
    }

    /// Apply the layer across all outer timesteps of a current tensor.
    pub fn forward(&self, x: &Array5<f32>) -> Result<Array5<f32>> {
        let t = x.shape()[0];
        let mut frames = Vec::with_capacity(t);
        for ti in 0..t {
            frames.push(self.forward_frame(&x.index_axis(Axis(0), ti).to_owned())?);
        }
        stack_frames(&frames)
    }

    /// Apply the layer to a post-neuron tensor. Binary-spike inputs are
    /// collapsed to exact integer counts first, so both representations go
    /// through the identical accumulation path.
    pub fn forward_spikes(&self, x: &SpikeTensor) -> Result<Array5<f32>> {
        match x.mode {
            SpikeMode::IntegerActivation => self.forward(&x.data),
            SpikeMode::BinarySpike => self.forward(&x.collapse_spikes()?.data),
        }
    }
}

impl ConvSpec {
    /// Store weights, bias and batch-norm under `prefix` in a checkpoint.
    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        ck.put4(&format!("{prefix}.weight"), &self.weights);
        if let Some(b) = &self.bias {
            ck.put1(&format!("{prefix}.bias"), b);
        }
        if let Some(bn) = &self.bn {
            ck.put1(&format!("{prefix}.bn.scale"), &bn.scale);
            ck.put1(&format!("{prefix}.bn.shift"), &bn.shift);
            ck.put1(&format!("{prefix}.bn.mean"), &bn.running_mean);
            ck.put1(&format!("{prefix}.bn.var"), &bn.running_var);
        }
    }

    /// Inverse of [`Self::export`]; bias/bn presence must match the spec.
    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> crate::error::Result<()> {
        self.weights = ck.get4(&format!("{prefix}.weight"))?;
        if self.bias.is_some() {
            self.bias = Some(ck.get1(&format!("{prefix}.bias"))?);
        }
        if let Some(bn) = &mut self.bn {
            bn.scale = ck.get1(&format!("{prefix}.bn.scale"))?;
            bn.shift = ck.get1(&format!("{prefix}.bn.shift"))?;
            bn.running_mean = ck.get1(&format!("{prefix}.bn.mean"))?;
            bn.running_var = ck.get1(&format!("{prefix}.bn.var"))?;
        }
        Ok(())
    }
}

/// Direct 2-D convolution with zero padding.
pub fn conv2d(
    x: &Array4<f32>,
    weights: &Array4<f32>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Array4<f32> {
    let (b, c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (c_out, c_in_g, kh, kw) = (
        weights.shape()[0],
        weights.shape()[1],
        weights.shape()[2],
        weights.shape()[3],
    );
    debug_assert_eq!(c_in / groups, c_in_g);
    let out_h = (h + 2 * padding - kh) / stride + 1;
    let out_w = (w + 2 * padding - kw) / stride + 1;
    let out_per_group = c_out / groups;
    let mut y = Array4::<f32>::zeros((b, c_out, out_h, out_w));
    for bi in 0..b {
        for oc in 0..c_out {
            let g = oc / out_per_group;
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = 0.0f32;
                    for ic in 0..c_in_g {
                        let xc = g * c_in_g + ic;
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += weights[(oc, ic, ky, kx)]
                                    * x[(bi, xc, iy as usize, ix as usize)];
                            }
                        }
                    }
                    y[(bi, oc, oy, ox)] = acc;
                }
            }
        }
    }
    y
}

pub(crate) fn stack_frames(frames: &[Array4<f32>]) -> Result<Array5<f32>> {
    let views: Vec<_> = frames.iter().map(|f| f.view()).collect();
    ndarray::stack(Axis(0), &views)
        .map_err(|e| Error::ShapeMismatch(format!("stacking timesteps: {e}")))
}
