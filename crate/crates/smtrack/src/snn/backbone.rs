//! Desk-scale spiking backbone: direct-coded input, strided stem, four
//! stages of meta blocks (low mixers in the first half, re-parameterized
//! mixers in the second half), emitting feature maps at strides 8/16/32.

use crate::error::Result;
use crate::snn::blocks::{ExecMode, MetaBlock, Trace};
use crate::snn::conv::{BatchNormParams, ConvSpec};
use ndarray::{Array3, Array5, Axis};
use rand::Rng;

/// Feature channel widths at strides 8, 16 and 32.
pub const FEATURE_CHANNELS: [usize; 3] = [24, 32, 48];

#[derive(Debug, Clone)]
pub struct SpikeBackbone {
    /// Image -> stride-2 stem (the only layer that sees analog input).
    pub stem: ConvSpec,
    /// Stride-2 downsampling convs entering each stage.
    pub downs: Vec<ConvSpec>,
    /// One meta block per stage.
    pub blocks: Vec<MetaBlock>,
    pub d_max: u32,
    pub timesteps: usize,
}

impl SpikeBackbone {
    pub fn new(timesteps: usize, d_max: u32) -> Self {
        let widths = [12, FEATURE_CHANNELS[0], FEATURE_CHANNELS[1], FEATURE_CHANNELS[2]];
        let stem = ConvSpec::standard(3, 8, 3)
            .with_stride(2)
            .with_bn(BatchNormParams::identity(8));
        let mut downs = Vec::new();
        let mut blocks = Vec::new();
        let mut prev = 8;
        for (i, &w) in widths.iter().enumerate() {
            downs.push(
                ConvSpec::standard(prev, w, 3)
                    .with_stride(2)
                    .with_bn(BatchNormParams::identity(w)),
            );
            // first half of the stages uses the low-level mixer
            blocks.push(if i < widths.len() / 2 {
                MetaBlock::low(w, 3, d_max)
            } else {
                MetaBlock::high(w, 3, d_max)
            });
            prev = w;
        }
        SpikeBackbone {
            stem,
            downs,
            blocks,
            d_max,
            timesteps,
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.stem = self.stem.randomize(rng);
        self.downs = self.downs.into_iter().map(|d| d.randomize(rng)).collect();
        self.blocks = self.blocks.into_iter().map(|b| b.randomize(rng)).collect();
        self
    }

    /// Direct coding: replicate the image across the outer timesteps.
    pub fn encode_image(&self, image: &Array3<f32>) -> Array5<f32> {
        let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
        let mut out = Array5::zeros((self.timesteps, 1, c, h, w));
        for t in 0..self.timesteps {
            out.index_axis_mut(Axis(0), t)
                .index_axis_mut(Axis(0), 0)
                .assign(image);
        }
        out
    }

    /// Run the backbone, returning current tensors at strides 8, 16, 32.
    pub fn forward(
        &self,
        image: &Array3<f32>,
        mode: ExecMode,
        mut trace: Option<&mut Trace>,
    ) -> Result<[Array5<f32>; 3]> {
        let x = self.encode_image(image);
        let mut cur = self.stem.forward(&x)?; // stride 2
        let mut features = Vec::new();
        for (i, (down, block)) in self.downs.iter().zip(self.blocks.iter()).enumerate() {
            cur = down.forward(&cur)?;
            cur = block.forward(&cur, mode, trace.as_deref_mut())?;
            if i >= 1 {
                features.push(cur.clone()); // strides 8, 16, 32
            }
        }
        let mut it = features.into_iter();
        Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
    }

    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.stem.export(&format!("{prefix}.stem"), ck);
        for (i, d) in self.downs.iter().enumerate() {
            d.export(&format!("{prefix}.down{i}"), ck);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.export(&format!("{prefix}.block{i}"), ck);
        }
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.stem.import(&format!("{prefix}.stem"), ck)?;
        for (i, d) in self.downs.iter_mut().enumerate() {
            d.import(&format!("{prefix}.down{i}"), ck)?;
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.import(&format!("{prefix}.block{i}"), ck)?;
        }
        Ok(())
    }
}
