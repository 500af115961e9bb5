//! Integer leaky integrate-and-fire neuron.
//!
//! Training-mode dynamics per outer timestep: accumulate the input current
//! into the membrane, emit `y = clamp(round(u / theta), 0, d_max)`, then
//! soft-reset `u <- u - y * theta`. The membrane carries across the T outer
//! timesteps of one frame and is reset between frames. At inference each
//! emitted integer is equivalent to `y` binary spikes over `d_max` virtual
//! sub-steps (see [`super::tensor::SpikeTensor::expand_to_spikes`]).

use crate::error::{Error, Result};
use crate::snn::tensor::{SpikeMode, SpikeTensor};
use ndarray::{Array4, Array5, Axis};

/// Per-invocation neuron state for one feature map.
#[derive(Debug, Clone)]
pub struct IlifState {
    pub membrane: Array4<f32>,
    /// Firing threshold, fixed at 1.0 and non-learnable.
    pub threshold: f32,
    pub d_max: u32,
    /// Membrane decay per outer timestep; 1.0 means no leak. Kept as a
    /// configuration slot, unused by the shipped blocks.
    pub decay: f32,
}

impl IlifState {
    pub fn new(b: usize, c: usize, h: usize, w: usize, d_max: u32) -> Self {
        IlifState {
            membrane: Array4::zeros((b, c, h, w)),
            threshold: 1.0,
            d_max,
            decay: 1.0,
        }
    }
}

/// One membrane step: returns the integer activation map and updates the
/// state in place.
pub fn ilif_step(state: &mut IlifState, input_current: &Array4<f32>) -> Result<Array4<f32>> {
    if state.membrane.shape() != input_current.shape() {
        return Err(Error::ShapeMismatch(format!(
            "membrane {:?} vs input {:?}",
            state.membrane.shape(),
            input_current.shape()
        )));
    }
    let theta = state.threshold;
    let d = state.d_max as f32;
    if state.decay != 1.0 {
        state.membrane.mapv_inplace(|u| u * state.decay);
    }
    state.membrane += input_current;
    let y = state.membrane.mapv(|u| (u / theta).round().clamp(0.0, d));
    state.membrane.zip_mut_with(&y, |u, &yy| *u -= yy * theta);
    Ok(y)
}

/// Run the neuron over all outer timesteps of a current tensor with a fresh
/// membrane, producing integer activations. When `spike_roundtrip` is set
/// the output additionally passes through the binary-spike representation
/// (expand then collapse), which is how inference-mode execution transmits
/// activations between layers.
pub fn ilif_forward(current: &Array5<f32>, d_max: u32, spike_roundtrip: bool) -> Result<SpikeTensor> {
    let (t, b, c, h, w) = match current.shape() {
        [t, b, c, h, w] => (*t, *b, *c, *h, *w),
        _ => unreachable!(),
    };
    let mut state = IlifState::new(b, c, h, w, d_max);
    let mut out = Array5::zeros((t, b, c, h, w));
    for ti in 0..t {
        let x = current.index_axis(Axis(0), ti).to_owned();
        let y = ilif_step(&mut state, &x)?;
        out.index_axis_mut(Axis(0), ti).assign(&y);
    }
    let tensor = SpikeTensor::integer(out, d_max);
    if spike_roundtrip {
        let spikes = tensor.expand_to_spikes()?;
        debug_assert_eq!(spikes.mode, SpikeMode::BinarySpike);
        spikes.collapse_spikes()
    } else {
        Ok(tensor)
    }
}

/// Straight-through surrogate for the gradient of the round-and-clamp
/// emission: 1 inside `[-window, d_max + window]` of the normalized
/// membrane `u / theta`, 0 outside. Endpoints included.
pub fn surrogate_grad(u_over_theta: f64, d_max: u32, window: f64) -> f64 {
    if u_over_theta >= -window && u_over_theta <= d_max as f64 + window {
        1.0
    } else {
        0.0
    }
}
