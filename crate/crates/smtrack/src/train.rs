//! Toy spiking box regressor and its training loop.
//!
//! A three-layer dense network with integer-spiking hidden layers (two
//! I-LIF layers, one linear readout averaged over the outer timesteps)
//! regresses a box from its normalized encoding through the quantized
//! bottleneck, trained with the scale-adaptive NWD loss and a
//! straight-through surrogate for the round-and-clamp emission. A fifth
//! output is an objectness logit trained with binary cross-entropy at
//! weight 1:1 against background samples.

use crate::error::Result;
use crate::geometry::{
    asa_nwd_loss, asa_nwd_loss_grad, batch_norm_factor, iou, nwd_similarity, BatchNormFactor, BBox,
};
use crate::snn::checkpoint::Checkpoint;
use crate::snn::neuron::surrogate_grad;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Center coordinates span this many pixels each side of the origin.
pub const CENTER_SCALE: f64 = 8.0;
/// Nominal size anchoring the log-size encoding.
pub const SIZE_REF: f64 = 16.0;

/// Normalized 4-vector encoding of a box.
pub fn encode_box(b: &BBox) -> [f64; 4] {
    [
        b.cx / CENTER_SCALE,
        b.cy / CENTER_SCALE,
        (b.w / SIZE_REF).ln(),
        (b.h / SIZE_REF).ln(),
    ]
}

/// Inverse of [`encode_box`] applied to network outputs. Log-sizes are
/// clamped to keep the exponential sane early in training.
pub fn decode_box(o: &[f64]) -> BBox {
    BBox {
        cx: o[0] * CENTER_SCALE,
        cy: o[1] * CENTER_SCALE,
        w: SIZE_REF * o[2].clamp(-4.0, 4.0).exp(),
        h: SIZE_REF * o[3].clamp(-4.0, 4.0).exp(),
    }
}

/// Box-size regime a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleClass {
    Small,
    Large,
}

/// Size distribution of generated datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleProfile {
    /// Sizes uniform in [8, 32].
    Uniform,
    /// Half small (6..12 px), half large (24..48 px); batches are drawn
    /// scale-homogeneously, like crops from scale-correlated scenes.
    MixedBimodal,
}

#[derive(Debug, Clone, Copy)]
pub struct BoxSample {
    /// None marks a background sample (objectness target 0).
    pub target: Option<BBox>,
    pub input: [f64; 4],
    pub class: ScaleClass,
}

/// Deterministic dataset of positive boxes plus background encodings.
pub fn make_dataset(n: usize, background_rate: f64, profile: ScaleProfile, seed: u64) -> Vec<BoxSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if rng.random_bool(background_rate) {
                let input = [
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                ];
                return BoxSample {
                    target: None,
                    input,
                    class: ScaleClass::Small,
                };
            }
            let (class, w, h, span) = match profile {
                ScaleProfile::Uniform => (
                    ScaleClass::Small,
                    rng.random_range(8.0..32.0),
                    rng.random_range(8.0..32.0),
                    CENTER_SCALE,
                ),
                ScaleProfile::MixedBimodal => {
                    if i % 2 == 0 {
                        (
                            ScaleClass::Small,
                            rng.random_range(6.0..12.0),
                            rng.random_range(6.0..12.0),
                            4.0,
                        )
                    } else {
                        (
                            ScaleClass::Large,
                            rng.random_range(24.0..48.0),
                            rng.random_range(24.0..48.0),
                            CENTER_SCALE,
                        )
                    }
                }
            };
            let b = BBox {
                cx: rng.random_range(-span..span),
                cy: rng.random_range(-span..span),
                w,
                h,
            };
            BoxSample {
                target: Some(b),
                input: encode_box(&b),
                class,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// (out, in)
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseLayer {
    fn new(inputs: usize, outputs: usize, bias_init: f64, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        DenseLayer {
            w: Array2::from_shape_fn((outputs, inputs), |_| {
                // Box-Muller keeps this independent of distribution crates
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }),
            b: Array1::from_elem(outputs, bias_init),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }
}

/// Gradient buffer matching a [`DenseLayer`].
#[derive(Debug, Clone)]
struct DenseGrad {
    w: Array2<f64>,
    b: Array1<f64>,
}

impl DenseGrad {
    fn zeros(layer: &DenseLayer) -> Self {
        DenseGrad {
            w: Array2::zeros(layer.w.raw_dim()),
            b: Array1::zeros(layer.b.raw_dim()),
        }
    }
}

/// Per-timestep cache of one spiking layer, for backward.
struct LayerTrace {
    /// membrane before reset, per timestep (B, H)
    u_mid: Vec<Array2<f64>>,
    /// emitted integers per timestep (B, H)
    y: Vec<Array2<f64>>,
}

pub const NUM_OUTPUTS: usize = 5; // cx, cy, log w, log h, objectness

#[derive(Debug, Clone)]
pub struct SpikingRegressor {
    pub l1: DenseLayer,
    pub l2: DenseLayer,
    pub out: DenseLayer,
    pub timesteps: usize,
    pub d_max: u32,
    pub theta: f64,
    pub window: f64,
}

impl SpikingRegressor {
    pub fn new(hidden: usize, timesteps: usize, d_max: u32, window: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The broad first layer sets the input-space resolution of the
        // integer staircase: larger fan-out gain means more threshold
        // crossings per unit of input. The readout consumes the spike
        // counts of both hidden layers, so layer-one resolution is not
        // lost to the second quantization.
        let mut l1 = DenseLayer::new(4, hidden, 0.25, &mut rng);
        l1.w.mapv_inplace(|v| v * 3.0);
        SpikingRegressor {
            l1,
            l2: DenseLayer::new(hidden, hidden, 0.25, &mut rng),
            out: DenseLayer::new(hidden * 2, NUM_OUTPUTS, 0.0, &mut rng),
            timesteps,
            d_max,
            theta: 1.0,
            window,
        }
    }

    fn spike_layer(&self, layer: &DenseLayer, x_per_t: &[Array2<f64>]) -> LayerTrace {
        let b = x_per_t[0].nrows();
        let h = layer.b.len();
        let mut u = Array2::<f64>::zeros((b, h));
        let mut trace = LayerTrace {
            u_mid: Vec::with_capacity(self.timesteps),
            y: Vec::with_capacity(self.timesteps),
        };
        let d = self.d_max as f64;
        for x in x_per_t {
            let a = layer.forward(x);
            u += &a;
            trace.u_mid.push(u.clone());
            let y = u.mapv(|v| (v / self.theta).round().clamp(0.0, d));
            u = u - &(y.mapv(|v| v * self.theta));
            trace.y.push(y);
        }
        trace
    }

    /// Forward pass; returns the time-averaged outputs (B, 5).
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_traced(x).0
    }

    fn forward_traced(&self, x: &Array2<f64>) -> (Array2<f64>, LayerTrace, LayerTrace) {
        let xs: Vec<Array2<f64>> = (0..self.timesteps).map(|_| x.clone()).collect();
        let t1 = self.spike_layer(&self.l1, &xs);
        let t2 = self.spike_layer(&self.l2, &t1.y);
        let mut o = Array2::<f64>::zeros((x.nrows(), NUM_OUTPUTS));
        for (y1, y2) in t1.y.iter().zip(&t2.y) {
            o += &self.out.forward(&concat_cols(y1, y2));
        }
        o /= self.timesteps as f64;
        (o, t1, t2)
    }

    pub fn predict_boxes(&self, inputs: &Array2<f64>) -> Vec<(BBox, f64)> {
        let o = self.forward(inputs);
        (0..o.nrows())
            .map(|i| {
                let row: Vec<f64> = o.row(i).to_vec();
                let obj = 1.0 / (1.0 + (-row[4]).exp());
                (decode_box(&row), obj)
            })
            .collect()
    }

    /// Backprop through the spiking layers: straight-through surrogate for
    /// the emission, exact linear algebra elsewhere, full unroll over the
    /// outer timesteps including the soft-reset path.
    fn backward(
        &self,
        x: &Array2<f64>,
        t1: &LayerTrace,
        t2: &LayerTrace,
        grad_o: &Array2<f64>,
    ) -> (DenseGrad, DenseGrad, DenseGrad) {
        let tsteps = self.timesteps;
        let hidden = self.l1.b.len();
        let go_t = grad_o.mapv(|v| v / tsteps as f64);

        let mut g_out = DenseGrad::zeros(&self.out);
        let mut gy1_direct: Vec<Array2<f64>> = Vec::with_capacity(tsteps);
        let mut gy2: Vec<Array2<f64>> = Vec::with_capacity(tsteps);
        for (y1, y2) in t1.y.iter().zip(&t2.y) {
            g_out.w = g_out.w + &go_t.t().dot(&concat_cols(y1, y2));
            g_out.b = g_out.b + &go_t.sum_axis(Axis(0));
            let g_concat = go_t.dot(&self.out.w);
            gy1_direct.push(g_concat.slice(ndarray::s![.., 0..hidden]).to_owned());
            gy2.push(g_concat.slice(ndarray::s![.., hidden..]).to_owned());
        }

        let (g_l2, gx2) = self.backward_spike_layer(&self.l2, &t1.y, t2, &gy2);
        let gy1: Vec<Array2<f64>> = gx2
            .iter()
            .zip(&gy1_direct)
            .map(|(a, b)| a + b)
            .collect();
        let xs: Vec<Array2<f64>> = (0..tsteps).map(|_| x.clone()).collect();
        let (g_l1, _) = self.backward_spike_layer(&self.l1, &xs, t1, &gy1);
        (g_l1, g_l2, g_out)
    }

    fn backward_spike_layer(
        &self,
        layer: &DenseLayer,
        inputs_per_t: &[Array2<f64>],
        trace: &LayerTrace,
        gy: &[Array2<f64>],
    ) -> (DenseGrad, Vec<Array2<f64>>) {
        let tsteps = self.timesteps;
        let mut grad = DenseGrad::zeros(layer);
        let mut gx: Vec<Array2<f64>> = vec![Array2::zeros(inputs_per_t[0].raw_dim()); tsteps];
        let mut gu = Array2::<f64>::zeros(trace.u_mid[0].raw_dim());
        for t in (0..tsteps).rev() {
            let g_win = trace.u_mid[t].mapv(|u| surrogate_grad(u / self.theta, self.d_max, self.window));
            // u_after = u_mid - theta * y(u_mid):
            //   dL/du_mid = gu * (1 - g) + dL/dy * g / theta
            let gum = &gu * &g_win.mapv(|g| 1.0 - g) + &gy[t] * &g_win.mapv(|g| g / self.theta);
            grad.w = grad.w + &gum.t().dot(&inputs_per_t[t]);
            grad.b = grad.b + &gum.sum_axis(Axis(0));
            gx[t] = gum.dot(&layer.w);
            gu = gum;
        }
        (grad, gx)
    }
}

/// Loss normalization mode for training runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Per-batch factor from the batch's ground-truth boxes.
    Adaptive { lambda: f64 },
    /// Dataset-wide constant, the fixed baseline.
    Fixed { c: f64 },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: usize,
    pub timesteps: usize,
    pub d_max: u32,
    pub window: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub train_size: usize,
    pub holdout_size: usize,
    pub background_rate: f64,
    pub profile: ScaleProfile,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 128,
            timesteps: 2,
            d_max: 4,
            window: 1.0,
            lr: 1e-2,
            steps: 2000,
            batch: 64,
            seed: 0,
            normalization: Normalization::Adaptive { lambda: 0.8 },
            train_size: 500,
            holdout_size: 100,
            background_rate: 0.2,
            profile: ScaleProfile::Uniform,
        }
    }
}

/// Dataset-wide fixed normalization constant: the default lambda times the
/// root mean ground-truth area, computed once over all positives.
pub fn dataset_fixed_c(data: &[BoxSample], lambda: f64) -> f64 {
    let boxes: Vec<BBox> = data.iter().filter_map(|s| s.target).collect();
    batch_norm_factor(&boxes, lambda)
        .map(|f| f.c_b)
        .unwrap_or(crate::geometry::FALLBACK_C_B)
}

/// Held-out evaluation under a shared normalization protocol.
#[derive(Debug, Clone, Copy)]
pub struct HoldoutEval {
    pub mean_nwd: f64,
    pub mean_iou: f64,
    pub mean_center_err: f64,
    pub mean_loss: f64,
    pub obj_accuracy: f64,
}

/// Evaluate on a held-out set. Positives are grouped by scale class and
/// each group gets its own adaptive normalization at the default lambda,
/// mirroring how scale-homogeneous batches are scored in training; for a
/// single-scale dataset this is one factor over the whole set.
pub fn evaluate_holdout(model: &SpikingRegressor, data: &[BoxSample]) -> HoldoutEval {
    let inputs = stack_inputs(data);
    let o = model.forward(&inputs);
    let group_cb = |class: ScaleClass| -> BatchNormFactor {
        let boxes: Vec<BBox> = data
            .iter()
            .filter(|s| s.class == class)
            .filter_map(|s| s.target)
            .collect();
        batch_norm_factor(&boxes, crate::geometry::DEFAULT_LAMBDA)
            .unwrap_or_else(|_| BatchNormFactor::fallback())
    };
    let cb_small = group_cb(ScaleClass::Small);
    let cb_large = group_cb(ScaleClass::Large);
    let (mut nwd_sum, mut iou_sum, mut err_sum, mut loss_sum) = (0.0, 0.0, 0.0, 0.0);
    let mut n_pos = 0.0f64;
    let (mut obj_correct, mut n_all) = (0.0f64, 0.0f64);
    for (i, s) in data.iter().enumerate() {
        let row: Vec<f64> = o.row(i).to_vec();
        let obj = 1.0 / (1.0 + (-row[4]).exp());
        n_all += 1.0;
        match s.target {
            Some(gt) => {
                if obj >= 0.5 {
                    obj_correct += 1.0;
                }
                let cb = match s.class {
                    ScaleClass::Small => &cb_small,
                    ScaleClass::Large => &cb_large,
                };
                let pred = decode_box(&row);
                nwd_sum += nwd_similarity(&pred, &gt, cb);
                iou_sum += iou(&pred, &gt);
                err_sum += ((pred.cx - gt.cx).powi(2) + (pred.cy - gt.cy).powi(2)).sqrt();
                loss_sum += asa_nwd_loss(&pred, &gt, cb);
                n_pos += 1.0;
            }
            None => {
                if obj < 0.5 {
                    obj_correct += 1.0;
                }
            }
        }
    }
    HoldoutEval {
        mean_nwd: nwd_sum / n_pos.max(1.0),
        mean_iou: iou_sum / n_pos.max(1.0),
        mean_center_err: err_sum / n_pos.max(1.0),
        mean_loss: loss_sum / n_pos.max(1.0),
        obj_accuracy: obj_correct / n_all.max(1.0),
    }
}

fn stack_inputs(data: &[BoxSample]) -> Array2<f64> {
    Array2::from_shape_fn((data.len(), 4), |(i, j)| data[i].input[j])
}

fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

fn clip_global_norm(grads: &mut [&mut DenseGrad], max_norm: f64) {
    let mut sq = 0.0;
    for g in grads.iter() {
        sq += g.w.iter().map(|v| v * v).sum::<f64>();
        sq += g.b.iter().map(|v| v * v).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.w.mapv_inplace(|v| v * scale);
            g.b.mapv_inplace(|v| v * scale);
        }
    }
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(layers: [&DenseLayer; 3], lr: f64) -> Self {
        Adam {
            m: layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            v: layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            mb: layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
            vb: layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, layers: [&mut DenseLayer; 3], grads: [&DenseGrad; 3]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t);
        let bc2 = 1.0 - B2.powi(self.t);
        for (k, (layer, grad)) in layers.into_iter().zip(grads.into_iter()).enumerate() {
            self.m[k] = &self.m[k] * B1 + &(&grad.w * (1.0 - B1));
            self.v[k] = &self.v[k] * B2 + &(&grad.w * &grad.w * (1.0 - B2));
            let update = (&self.m[k] / bc1) / ((&self.v[k] / bc2).mapv(f64::sqrt) + EPS);
            layer.w = &layer.w - &(update * self.lr);

            self.mb[k] = &self.mb[k] * B1 + &(&grad.b * (1.0 - B1));
            self.vb[k] = &self.vb[k] * B2 + &(&grad.b * &grad.b * (1.0 - B2));
            let update = (&self.mb[k] / bc1) / ((&self.vb[k] / bc2).mapv(f64::sqrt) + EPS);
            layer.b = &layer.b - &(update * self.lr);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: SpikingRegressor,
    /// (step, batch loss) every few steps.
    pub loss_curve: Vec<(usize, f64)>,
    pub holdout: HoldoutEval,
}

/// Train the regressor per the config and evaluate on a held-out set.
pub fn train_regressor(cfg: &TrainConfig) -> Result<TrainResult> {
    let data = make_dataset(cfg.train_size, cfg.background_rate, cfg.profile, cfg.seed);
    let holdout = make_dataset(
        cfg.holdout_size,
        cfg.background_rate,
        cfg.profile,
        cfg.seed ^ 0x4a11_d0e5,
    );
    train_on(cfg, &data, &holdout)
}

/// Train on explicit datasets (the sweep harnesses share datasets across
/// runs so rows stay comparable).
pub fn train_on(cfg: &TrainConfig, data: &[BoxSample], holdout: &[BoxSample]) -> Result<TrainResult> {
    let mut model = SpikingRegressor::new(cfg.hidden, cfg.timesteps, cfg.d_max, cfg.window, cfg.seed);
    let mut opt = Adam::new([&model.l1, &model.l2, &model.out], cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xba7c_4e55);
    let mut curve = Vec::new();

    let small_pool: Vec<usize> = (0..data.len()).filter(|&i| data[i].class == ScaleClass::Small).collect();
    let large_pool: Vec<usize> = (0..data.len()).filter(|&i| data[i].class == ScaleClass::Large).collect();

    for step in 0..cfg.steps {
        let pool: &[usize] = match cfg.profile {
            ScaleProfile::Uniform => &[],
            ScaleProfile::MixedBimodal => {
                if step % 2 == 0 && !small_pool.is_empty() {
                    &small_pool
                } else {
                    &large_pool
                }
            }
        };
        let batch: Vec<BoxSample> = (0..cfg.batch)
            .map(|_| {
                if pool.is_empty() {
                    data[rng.random_range(0..data.len())]
                } else {
                    data[pool[rng.random_range(0..pool.len())]]
                }
            })
            .collect();

        let gt_boxes: Vec<BBox> = batch.iter().filter_map(|s| s.target).collect();
        let cb = match cfg.normalization {
            Normalization::Adaptive { lambda } => batch_norm_factor(&gt_boxes, lambda)
                .unwrap_or_else(|_| BatchNormFactor::fallback()),
            Normalization::Fixed { c } => BatchNormFactor::fixed(c),
        };

        let inputs = stack_inputs(&batch);
        let (o, tr1, tr2) = model.forward_traced(&inputs);

        let mut grad_o = Array2::<f64>::zeros(o.raw_dim());
        let mut loss = 0.0;
        let n_pos = batch.iter().filter(|s| s.target.is_some()).count().max(1) as f64;
        let n_all = batch.len() as f64;
        for (i, s) in batch.iter().enumerate() {
            let row: Vec<f64> = o.row(i).to_vec();
            let obj_logit = row[4];
            let obj = 1.0 / (1.0 + (-obj_logit).exp());
            let label = if s.target.is_some() { 1.0 } else { 0.0 };
            loss += -(label * obj.max(1e-12).ln() + (1.0 - label) * (1.0 - obj).max(1e-12).ln()) / n_all;
            grad_o[(i, 4)] = (obj - label) / n_all;
            if let Some(gt) = s.target {
                let pred = decode_box(&row);
                loss += asa_nwd_loss(&pred, &gt, &cb) / n_pos;
                let g = asa_nwd_loss_grad(&pred, &gt, &cb);
                // chain through the decode: d cx / d o0 = CENTER_SCALE,
                // d w / d o2 = w. The log-size clamp stays straight-through
                // (w evaluated at the clamped value), so outputs pushed past
                // the clamp still receive the gradient pulling them back.
                grad_o[(i, 0)] = g[0] * CENTER_SCALE / n_pos;
                grad_o[(i, 1)] = g[1] * CENTER_SCALE / n_pos;
                grad_o[(i, 2)] = g[2] * pred.w / n_pos;
                grad_o[(i, 3)] = g[3] * pred.h / n_pos;
            }
        }

        let (mut g1, mut g2, mut go) = model.backward(&inputs, &tr1, &tr2, &grad_o);
        clip_global_norm(&mut [&mut g1, &mut g2, &mut go], 5.0);
        // linear warmup, then cosine decay to 5% of the initial rate; the
        // similarity loss saturates if early steps throw predictions far
        // from the targets, so the ramp matters
        let warmup = 100.0;
        let progress = step as f64 / cfg.steps.max(1) as f64;
        let ramp = ((step as f64 + 1.0) / warmup).min(1.0);
        opt.lr = cfg.lr * ramp * (0.05 + 0.95 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        opt.step([&mut model.l1, &mut model.l2, &mut model.out], [&g1, &g2, &go]);

        if step % 25 == 0 || step + 1 == cfg.steps {
            curve.push((step, loss));
        }
    }

    let eval = evaluate_holdout(&model, holdout);
    Ok(TrainResult {
        model,
        loss_curve: curve,
        holdout: eval,
    })
}

impl SpikingRegressor {
    pub fn export(&self, ck: &mut Checkpoint) {
        ck.put2d("regressor.l1.weight", &self.l1.w);
        ck.put1d("regressor.l1.bias", &self.l1.b);
        ck.put2d("regressor.l2.weight", &self.l2.w);
        ck.put1d("regressor.l2.bias", &self.l2.b);
        ck.put2d("regressor.out.weight", &self.out.w);
        ck.put1d("regressor.out.bias", &self.out.b);
    }

    pub fn import(&mut self, ck: &Checkpoint) -> Result<()> {
        self.l1.w = ck.get2d("regressor.l1.weight")?;
        self.l1.b = ck.get1d("regressor.l1.bias")?;
        self.l2.w = ck.get2d("regressor.l2.weight")?;
        self.l2.b = ck.get1d("regressor.l2.bias")?;
        self.out.w = ck.get2d("regressor.out.weight")?;
        self.out.b = ck.get1d("regressor.out.bias")?;
        Ok(())
    }
}
