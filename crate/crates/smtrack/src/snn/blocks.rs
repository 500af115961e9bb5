//! Meta SNN blocks: the residual token mixer (SepConv), the two channel
//! mixers (ChConv1 with 4x channel expansion, ChConv2 built from
//! re-parameterizable convolutions), and the fusion that turns a RepConv
//! into a single standard convolution for inference.

use crate::error::{Error, Result};
use crate::snn::conv::{BatchNormParams, ConvKind, ConvSpec};
use crate::snn::neuron::ilif_forward;
use ndarray::Array5;
use rand::Rng;

/// Execution representation for block forwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Training representation: neuron outputs stay integer tensors.
    Integer,
    /// Inference representation: every neuron output is expanded to binary
    /// virtual sub-steps and collapsed again at the next synapse.
    Spike,
}

impl ExecMode {
    fn roundtrip(self) -> bool {
        matches!(self, ExecMode::Spike)
    }
}

/// Named pre-activation capture used by the duality tests: one entry per
/// convolution output, in execution order.
pub type Trace = Vec<(String, Array5<f32>)>;

fn record(trace: &mut Option<&mut Trace>, name: &str, x: &Array5<f32>) {
    if let Some(t) = trace.as_deref_mut() {
        t.push((name.to_string(), x.clone()));
    }
}

/// Depthwise-separable token mixer:
/// `Z = DWConv1(ILIF(PWConv1(ILIF(Y))))`, then
/// `SepConv(Y) = ILIF(DWConv2(PWConv2(Z)))`.
#[derive(Debug, Clone)]
pub struct SepConv {
    pub pw1: ConvSpec,
    pub dw1: ConvSpec,
    pub pw2: ConvSpec,
    pub dw2: ConvSpec,
    pub d_max: u32,
}

impl SepConv {
    /// `expansion` scales the hidden width; the depthwise kernel is large
    /// (7x7 by default in the full model, configurable for tests).
    pub fn new(channels: usize, expansion: usize, kernel: usize, d_max: u32) -> Self {
        let hidden = channels * expansion;
        SepConv {
            pw1: ConvSpec::pointwise(channels, hidden).with_bn(BatchNormParams::identity(hidden)),
            dw1: ConvSpec::depthwise(hidden, kernel).with_bn(BatchNormParams::identity(hidden)),
            pw2: ConvSpec::pointwise(hidden, channels).with_bn(BatchNormParams::identity(channels)),
            dw2: ConvSpec::depthwise(channels, kernel)
                .with_bn(BatchNormParams::identity(channels)),
            d_max,
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.pw1 = self.pw1.randomize(rng);
        self.dw1 = self.dw1.randomize(rng);
        self.pw2 = self.pw2.randomize(rng);
        self.dw2 = self.dw2.randomize(rng);
        self
    }

    pub fn forward(
        &self,
        y: &Array5<f32>,
        mode: ExecMode,
        mut trace: Option<&mut Trace>,
    ) -> Result<Array5<f32>> {
        let rt = mode.roundtrip();
        let s1 = ilif_forward(y, self.d_max, rt)?;
        let z = self.pw1.forward_spikes(&s1)?;
        record(&mut trace, "sep.pw1", &z);
        let s2 = ilif_forward(&z, self.d_max, rt)?;
        let z = self.dw1.forward_spikes(&s2)?;
        record(&mut trace, "sep.dw1", &z);
        let z = self.pw2.forward(&z)?;
        record(&mut trace, "sep.pw2", &z);
        let z = self.dw2.forward(&z)?;
        record(&mut trace, "sep.dw2", &z);
        let out = ilif_forward(&z, self.d_max, rt)?;
        Ok(out.data)
    }
}

/// Channel mixer for the lower stages: `Conv(ILIF(Conv(ILIF(Y))))` with a
/// 4x hidden expansion, 1x1 standard convolutions.
#[derive(Debug, Clone)]
pub struct ChConv1 {
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub d_max: u32,
}

/// Hidden-width expansion factor of [`ChConv1`].
pub const CH_CONV1_EXPANSION: usize = 4;

impl ChConv1 {
    pub fn new(channels: usize, d_max: u32) -> Self {
        let hidden = channels * CH_CONV1_EXPANSION;
        ChConv1 {
            conv1: ConvSpec::pointwise(channels, hidden).with_bn(BatchNormParams::identity(hidden)),
            conv2: ConvSpec::pointwise(hidden, channels)
                .with_bn(BatchNormParams::identity(channels)),
            d_max,
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.conv1 = self.conv1.randomize(rng);
        self.conv2 = self.conv2.randomize(rng);
        self
    }

    pub fn forward(
        &self,
        y: &Array5<f32>,
        mode: ExecMode,
        mut trace: Option<&mut Trace>,
    ) -> Result<Array5<f32>> {
        debug_assert_eq!(
            self.conv1.out_channels,
            CH_CONV1_EXPANSION * self.conv1.in_channels
        );
        let rt = mode.roundtrip();
        let s1 = ilif_forward(y, self.d_max, rt)?;
        let z = self.conv1.forward_spikes(&s1)?;
        record(&mut trace, "ch1.conv1", &z);
        let s2 = ilif_forward(&z, self.d_max, rt)?;
        let z = self.conv2.forward_spikes(&s2)?;
        record(&mut trace, "ch1.conv2", &z);
        Ok(z)
    }
}

/// Re-parameterizable composite `PWConv2(DWConv1(PWConv1(Y)))` with a
/// trailing batch-norm. All three convolutions are bias-free, so the
/// composition is a single linear map that [`RepConv::fuse`] turns into one
/// standard convolution.
#[derive(Debug, Clone)]
pub struct RepConv {
    pub pw1: ConvSpec,
    pub dw: ConvSpec,
    pub pw2: ConvSpec,
    pub bn: BatchNormParams,
}

impl RepConv {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        RepConv {
            pw1: ConvSpec::pointwise(in_channels, in_channels),
            dw: ConvSpec::depthwise(in_channels, kernel),
            pw2: ConvSpec::pointwise(in_channels, out_channels),
            bn: BatchNormParams::identity(out_channels),
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.pw1 = self.pw1.randomize(rng);
        self.dw = self.dw.randomize(rng);
        self.pw2 = self.pw2.randomize(rng);
        self
    }

    pub fn randomize_with_bn<R: Rng>(mut self, rng: &mut R) -> Self {
        self = self.randomize(rng);
        self.bn = BatchNormParams::random(self.pw2.out_channels, rng);
        self
    }

    /// Composed (training-time) form.
    pub fn forward(&self, x: &Array5<f32>) -> Result<Array5<f32>> {
        let z = self.pw1.forward(x)?;
        let z = self.dw.forward(&z)?;
        let mut z = self.pw2.forward(&z)?;
        let (gain, bias) = self.bn.affine();
        for o in 0..self.pw2.out_channels {
            let (g, b) = (gain[o], bias[o]);
            // rank-5 layout (T, B, C, H, W): channels live on axis 2
            z.index_axis_mut(ndarray::Axis(2), o)
                .mapv_inplace(|v| v * g + b);
        }
        Ok(z)
    }

    /// Single-convolution inference form with the batch-norm folded in.
    pub fn fuse(&self) -> Result<ConvSpec> {
        let mut fused = repconv_fuse(&self.pw1, &self.dw, &self.pw2)?;
        fused.bn = Some(self.bn.clone());
        Ok(fused.fold_batch_norm())
    }
}

/// Fuse the bias-free composition `pw2 . dw . pw1` into one standard k x k
/// convolution whose output equals the composition on every input.
pub fn repconv_fuse(pw1: &ConvSpec, dw: &ConvSpec, pw2: &ConvSpec) -> Result<ConvSpec> {
    pw1.validate()?;
    dw.validate()?;
    pw2.validate()?;
    if pw1.kind != ConvKind::Pointwise || pw2.kind != ConvKind::Pointwise {
        return Err(Error::ShapeMismatch("outer convs must be pointwise".into()));
    }
    let k = match dw.kind {
        ConvKind::Depthwise { kernel } => kernel,
        _ => return Err(Error::ShapeMismatch("middle conv must be depthwise".into())),
    };
    if pw1.out_channels != dw.in_channels || dw.out_channels != pw2.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "channel chain {} -> {} -> {} -> {} does not compose",
            pw1.in_channels, pw1.out_channels, dw.out_channels, pw2.out_channels
        )));
    }
    if pw1.bias.is_some() || dw.bias.is_some() || pw2.bias.is_some() {
        return Err(Error::InvalidValue(
            "fusion requires bias-free inner convolutions".into(),
        ));
    }
    let mid = dw.in_channels;
    let mut fused = ConvSpec::standard(pw1.in_channels, pw2.out_channels, k);
    for o in 0..pw2.out_channels {
        for i in 0..pw1.in_channels {
            for m in 0..mid {
                let outer = pw2.weights[(o, m, 0, 0)] * pw1.weights[(m, i, 0, 0)];
                if outer == 0.0 {
                    continue;
                }
                for ky in 0..k {
                    for kx in 0..k {
                        fused.weights[(o, i, ky, kx)] += outer * dw.weights[(m, 0, ky, kx)];
                    }
                }
            }
        }
    }
    Ok(fused)
}

/// Channel mixer for the higher stages: `RepConv(ILIF(RepConv(ILIF(Y))))`.
#[derive(Debug, Clone)]
pub struct ChConv2 {
    pub rep1: RepConv,
    pub rep2: RepConv,
    pub d_max: u32,
}

impl ChConv2 {
    pub fn new(channels: usize, d_max: u32) -> Self {
        ChConv2 {
            rep1: RepConv::new(channels, channels, 3),
            rep2: RepConv::new(channels, channels, 3),
            d_max,
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.rep1 = self.rep1.randomize(rng);
        self.rep2 = self.rep2.randomize(rng);
        self
    }

    pub fn forward(
        &self,
        y: &Array5<f32>,
        mode: ExecMode,
        mut trace: Option<&mut Trace>,
    ) -> Result<Array5<f32>> {
        let rt = mode.roundtrip();
        let s1 = ilif_forward(y, self.d_max, rt)?;
        let z = self.rep1.forward(&s1.data)?;
        record(&mut trace, "ch2.rep1", &z);
        let s2 = ilif_forward(&z, self.d_max, rt)?;
        let z = self.rep2.forward(&s2.data)?;
        record(&mut trace, "ch2.rep2", &z);
        Ok(z)
    }
}

impl SepConv {
    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.pw1.export(&format!("{prefix}.pw1"), ck);
        self.dw1.export(&format!("{prefix}.dw1"), ck);
        self.pw2.export(&format!("{prefix}.pw2"), ck);
        self.dw2.export(&format!("{prefix}.dw2"), ck);
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.pw1.import(&format!("{prefix}.pw1"), ck)?;
        self.dw1.import(&format!("{prefix}.dw1"), ck)?;
        self.pw2.import(&format!("{prefix}.pw2"), ck)?;
        self.dw2.import(&format!("{prefix}.dw2"), ck)
    }
}

impl ChConv1 {
    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.conv1.export(&format!("{prefix}.conv1"), ck);
        self.conv2.export(&format!("{prefix}.conv2"), ck);
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.conv1.import(&format!("{prefix}.conv1"), ck)?;
        self.conv2.import(&format!("{prefix}.conv2"), ck)
    }
}

impl RepConv {
    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.pw1.export(&format!("{prefix}.pw1"), ck);
        self.dw.export(&format!("{prefix}.dw"), ck);
        self.pw2.export(&format!("{prefix}.pw2"), ck);
        ck.put1(&format!("{prefix}.bn.scale"), &self.bn.scale);
        ck.put1(&format!("{prefix}.bn.shift"), &self.bn.shift);
        ck.put1(&format!("{prefix}.bn.mean"), &self.bn.running_mean);
        ck.put1(&format!("{prefix}.bn.var"), &self.bn.running_var);
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.pw1.import(&format!("{prefix}.pw1"), ck)?;
        self.dw.import(&format!("{prefix}.dw"), ck)?;
        self.pw2.import(&format!("{prefix}.pw2"), ck)?;
        self.bn.scale = ck.get1(&format!("{prefix}.bn.scale"))?;
        self.bn.shift = ck.get1(&format!("{prefix}.bn.shift"))?;
        self.bn.running_mean = ck.get1(&format!("{prefix}.bn.mean"))?;
        self.bn.running_var = ck.get1(&format!("{prefix}.bn.var"))?;
        Ok(())
    }
}

impl ChConv2 {
    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.rep1.export(&format!("{prefix}.rep1"), ck);
        self.rep2.export(&format!("{prefix}.rep2"), ck);
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.rep1.import(&format!("{prefix}.rep1"), ck)?;
        self.rep2.import(&format!("{prefix}.rep2"), ck)
    }
}

/// Which channel mixer a block uses.
#[derive(Debug, Clone)]
pub enum ChannelMixer {
    Low(ChConv1),
    High(ChConv2),
}

/// One meta SNN block: `Y' = Y + SepConv(Y)`, `Y'' = Y' + ChConv(Y')`.
#[derive(Debug, Clone)]
pub struct MetaBlock {
    pub sep: SepConv,
    pub mixer: ChannelMixer,
}

impl MetaBlock {
    /// Lower-stage block (ChConv1 mixer).
    pub fn low(channels: usize, sep_kernel: usize, d_max: u32) -> Self {
        MetaBlock {
            sep: SepConv::new(channels, 2, sep_kernel, d_max),
            mixer: ChannelMixer::Low(ChConv1::new(channels, d_max)),
        }
    }

    /// Higher-stage block (re-parameterized ChConv2 mixer).
    pub fn high(channels: usize, sep_kernel: usize, d_max: u32) -> Self {
        MetaBlock {
            sep: SepConv::new(channels, 2, sep_kernel, d_max),
            mixer: ChannelMixer::High(ChConv2::new(channels, d_max)),
        }
    }

    pub fn randomize<R: Rng>(mut self, rng: &mut R) -> Self {
        self.sep = self.sep.randomize(rng);
        self.mixer = match self.mixer {
            ChannelMixer::Low(m) => ChannelMixer::Low(m.randomize(rng)),
            ChannelMixer::High(m) => ChannelMixer::High(m.randomize(rng)),
        };
        self
    }

    pub fn forward(
        &self,
        y: &Array5<f32>,
        mode: ExecMode,
        mut trace: Option<&mut Trace>,
    ) -> Result<Array5<f32>> {
        let sep_out = self.sep.forward(y, mode, trace.as_deref_mut())?;
        let y1 = y + &sep_out;
        let mix_out = match &self.mixer {
            ChannelMixer::Low(m) => m.forward(&y1, mode, trace.as_deref_mut())?,
            ChannelMixer::High(m) => m.forward(&y1, mode, trace.as_deref_mut())?,
        };
        Ok(&y1 + &mix_out)
    }

    pub fn export(&self, prefix: &str, ck: &mut crate::snn::checkpoint::Checkpoint) {
        self.sep.export(&format!("{prefix}.sep"), ck);
        match &self.mixer {
            ChannelMixer::Low(m) => m.export(&format!("{prefix}.ch1"), ck),
            ChannelMixer::High(m) => m.export(&format!("{prefix}.ch2"), ck),
        }
    }

    pub fn import(
        &mut self,
        prefix: &str,
        ck: &crate::snn::checkpoint::Checkpoint,
    ) -> Result<()> {
        self.sep.import(&format!("{prefix}.sep"), ck)?;
        match &mut self.mixer {
            ChannelMixer::Low(m) => m.import(&format!("{prefix}.ch1"), ck),
            ChannelMixer::High(m) => m.import(&format!("{prefix}.ch2"), ck),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::conv::conv2d;
    use ndarray::Array4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_current(rng: &mut ChaCha8Rng, t: usize, c: usize, hw: usize) -> Array5<f32> {
        Array5::from_shape_fn((t, 1, c, hw, hw), |_| rng.random_range(-1.5..2.5))
    }

    #[test]
    fn sepconv_zero_input_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sep = SepConv::new(3, 2, 3, 4).randomize(&mut rng);
        let y = Array5::<f32>::zeros((2, 1, 3, 4, 4));
        let out = sep.forward(&y, ExecMode::Integer, None).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        assert_eq!(out.shape(), y.shape());
    }

    #[test]
    fn sepconv_scalar_trace() {
        // 1x1 spatial extent, 1 channel, identity weights: the pipeline is
        // ILIF -> x1 -> ILIF -> x1 -> x1 -> x1 -> ILIF, i.e. round-and-clamp
        // applied to the input value.
        let mut sep = SepConv::new(1, 1, 1, 4);
        sep.pw1.weights[(0, 0, 0, 0)] = 1.0;
        sep.dw1.weights[(0, 0, 0, 0)] = 1.0;
        sep.pw2.weights[(0, 0, 0, 0)] = 1.0;
        sep.dw2.weights[(0, 0, 0, 0)] = 1.0;
        let mut y = Array5::<f32>::zeros((1, 1, 1, 1, 1));
        y[(0, 0, 0, 0, 0)] = 2.6;
        let out = sep.forward(&y, ExecMode::Integer, None).unwrap();
        assert_eq!(out[(0, 0, 0, 0, 0)], 3.0);
    }

    #[test]
    fn chconv1_width_contract() {
        let m = ChConv1::new(5, 4);
        assert_eq!(m.conv1.out_channels, 20);
        assert_eq!(CH_CONV1_EXPANSION, 4);
    }

    #[test]
    fn chconv2_uses_3x3_repconv() {
        let m = ChConv2::new(4, 4);
        assert_eq!(m.rep1.dw.kind, ConvKind::Depthwise { kernel: 3 });
    }

    #[test]
    fn repconv_fuse_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..100 {
            let cin = rng.random_range(1..5);
            let cout = rng.random_range(1..5);
            let rep = RepConv::new(cin, cout, 3).randomize_with_bn(&mut rng);
            let fused = rep.fuse().unwrap();
            let x = Array5::from_shape_fn((1, 1, cin, 5, 5), |_| rng.random_range(-2.0..2.0));
            let composed = rep.forward(&x).unwrap();
            let single = fused.forward(&x).unwrap();
            let max_diff = composed
                .iter()
                .zip(single.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(max_diff < 1e-5, "case {case}: max diff {max_diff}");
        }
    }

    #[test]
    fn repconv_fuse_identity_embeds_depthwise() {
        let c = 3;
        let mut rep = RepConv::new(c, c, 3);
        for i in 0..c {
            rep.pw1.weights[(i, i, 0, 0)] = 1.0;
            rep.pw2.weights[(i, i, 0, 0)] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        rep.dw = rep.dw.randomize(&mut rng);
        let fused = rep.fuse().unwrap();
        for o in 0..c {
            for i in 0..c {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let expect = if o == i { rep.dw.weights[(o, 0, ky, kx)] } else { 0.0 };
                        assert_eq!(fused.weights[(o, i, ky, kx)], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn fuse_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rep = RepConv::new(3, 2, 3).randomize_with_bn(&mut rng);
        let f1 = rep.fuse().unwrap();
        let f2 = rep.fuse().unwrap();
        let x = Array5::from_shape_fn((1, 1, 3, 4, 4), |_| rng.random_range(-1.0..1.0));
        assert_eq!(f1.forward(&x).unwrap(), f2.forward(&x).unwrap());
    }

    #[test]
    fn fuse_rejects_unchainable() {
        let pw1 = ConvSpec::pointwise(3, 4);
        let dw = ConvSpec::depthwise(5, 3);
        let pw2 = ConvSpec::pointwise(5, 2);
        assert!(repconv_fuse(&pw1, &dw, &pw2).is_err());
    }

    #[test]
    fn zeroed_blocks_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let low = MetaBlock::low(3, 3, 4);
        let high = MetaBlock::high(3, 3, 4);
        let y = random_current(&mut rng, 2, 3, 4);
        assert_eq!(low.forward(&y, ExecMode::Integer, None).unwrap(), y);
        assert_eq!(high.forward(&y, ExecMode::Integer, None).unwrap(), y);
    }

    #[test]
    fn integer_spike_duality_single_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20u64 {
            let mut brng = ChaCha8Rng::seed_from_u64(seed);
            let block = if seed % 2 == 0 {
                MetaBlock::low(2, 3, 4).randomize(&mut brng)
            } else {
                MetaBlock::high(2, 3, 4).randomize(&mut brng)
            };
            let y = random_current(&mut rng, 2, 2, 4);
            let mut ti: Trace = Vec::new();
            let mut ts: Trace = Vec::new();
            let a = block.forward(&y, ExecMode::Integer, Some(&mut ti)).unwrap();
            let b = block.forward(&y, ExecMode::Spike, Some(&mut ts)).unwrap();
            assert_eq!(a, b, "block outputs diverged between modes");
            assert_eq!(ti.len(), ts.len());
            for ((na, xa), (nb, xb)) in ti.iter().zip(ts.iter()) {
                assert_eq!(na, nb);
                assert_eq!(xa, xb, "pre-activation {na} diverged between modes");
            }
        }
    }

    #[test]
    fn conv2d_padding_matches_manual() {
        let mut w = Array4::<f32>::zeros((1, 1, 3, 3));
        w[(0, 0, 0, 0)] = 1.0; // top-left tap
        let mut x = Array4::<f32>::zeros((1, 1, 2, 2));
        x[(0, 0, 0, 0)] = 5.0;
        let y = conv2d(&x, &w, 1, 1, 1);
        // output (1,1) sees input (0,0) through the top-left tap
        assert_eq!(y[(0, 0, 1, 1)], 5.0);
        assert_eq!(y[(0, 0, 0, 0)], 0.0);
    }
}
