//! Desk-scale sweep harnesses: the outer-timestep sweep, the lambda sweep
//! with its fixed-normalization baseline, and the loss sensitivity bench
//! comparing IoU against the normalized Wasserstein similarity.

use crate::error::Result;
use crate::geometry::{batch_norm_factor, iou, nwd_similarity, BBox, DEFAULT_LAMBDA};
use crate::head::{Detection, DetectionSource};
use crate::metrics::{evaluate, MetricReport};
use crate::mot::Sequence;
use crate::synth::SyntheticScene;
use crate::tracker::{Tracker, TrackerParams};
use crate::train::{
    dataset_fixed_c, encode_box, make_dataset, train_on, Normalization, ScaleProfile, TrainConfig,
};
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;

/// Outer-timestep values of the sweep.
pub const TIMESTEP_GRID: [usize; 4] = [1, 2, 4, 8];
/// Scaling-factor values of the sweep; the fixed-normalization baseline is
/// appended as its own row.
pub const LAMBDA_GRID: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone)]
pub struct TimestepRow {
    pub timesteps: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct LambdaRow {
    /// "0.2" ... "1.0" or "Fixed C".
    pub label: String,
    pub final_loss: f64,
    pub mean_nwd: f64,
    pub mean_iou: f64,
    pub center_err: f64,
}

/// Anchor a scene box to its 16-px grid cell so it lands in the
/// regressor's relative-coordinate domain.
fn to_relative(b: &BBox) -> (BBox, (f64, f64)) {
    let anchor = (
        ((b.cx / 16.0).floor() + 0.5) * 16.0,
        ((b.cy / 16.0).floor() + 0.5) * 16.0,
    );
    (
        BBox {
            cx: b.cx - anchor.0,
            cy: b.cy - anchor.1,
            w: b.w,
            h: b.h,
        },
        anchor,
    )
}

/// Run ground truth through a trained regressor to simulate a detector
/// whose localization noise is the network's quantization error.
fn regress_detections(
    model: &crate::train::SpikingRegressor,
    gt: &Sequence,
) -> Vec<(u32, Vec<Detection>)> {
    let mut out = Vec::new();
    for (frame, records) in gt.by_frame() {
        let mut inputs = Array2::<f64>::zeros((records.len(), 4));
        let mut anchors = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let (rel, anchor) = to_relative(&r.bbox());
            let enc = encode_box(&rel);
            for j in 0..4 {
                inputs[(i, j)] = enc[j];
            }
            anchors.push(anchor);
        }
        let preds = model.predict_boxes(&inputs);
        let dets = preds
            .into_iter()
            .zip(anchors)
            .map(|((rel, obj), anchor)| Detection {
                bbox: BBox {
                    cx: rel.cx + anchor.0,
                    cy: rel.cy + anchor.1,
                    w: rel.w,
                    h: rel.h,
                },
                score: obj.clamp(0.05, 1.0),
                class_id: 0,
                source: DetectionSource::HighConf,
            })
            .collect();
        out.push((frame, dets));
    }
    out
}

/// Train the toy regressor per outer-timestep count, push a synthetic
/// scene's ground truth through it as a simulated detector, track, and
/// evaluate. Reports one row per T.
pub fn timestep_sweep(base: &TrainConfig, scene_seed: u64) -> Result<Vec<TimestepRow>> {
    let scene = SyntheticScene::random(scene_seed, 6, 60, 320, 256);
    let (gt, _) = crate::synth::gen_synthetic(&scene)?;
    let data = make_dataset(base.train_size, base.background_rate, base.profile, base.seed);
    let holdout = make_dataset(
        base.holdout_size,
        base.background_rate,
        base.profile,
        base.seed ^ 0x4a11_d0e5,
    );
    let mut rows = Vec::new();
    for &t in &TIMESTEP_GRID {
        let cfg = TrainConfig {
            timesteps: t,
            ..base.clone()
        };
        let trained = train_on(&cfg, &data, &holdout)?;
        let mut tracker = Tracker::new(TrackerParams::default());
        let mut records = Vec::new();
        for (frame, dets) in regress_detections(&trained.model, &gt) {
            for o in tracker.step(&dets, &[], &[]) {
                records.push(crate::mot::SequenceRecord::from_parts(
                    frame,
                    o.track_id as i64,
                    &o.bbox,
                    o.conf,
                ));
            }
        }
        let pred = Sequence::new(records);
        rows.push(TimestepRow {
            timesteps: t,
            report: evaluate(&gt, &pred),
        });
    }
    Ok(rows)
}

/// Train per lambda on a mixed-scale dataset with scale-homogeneous
/// batches, plus the fixed dataset-wide normalization baseline. All rows
/// share datasets and the evaluation protocol. The adaptive factor makes
/// the loss much sharper on small-box batches than the uniform task, so
/// the sweep runs at a gentler learning rate.
pub fn lambda_sweep(base: &TrainConfig) -> Result<Vec<LambdaRow>> {
    let cfg0 = TrainConfig {
        profile: ScaleProfile::MixedBimodal,
        lr: base.lr.min(3e-3),
        ..base.clone()
    };
    let data = make_dataset(cfg0.train_size, cfg0.background_rate, cfg0.profile, cfg0.seed);
    let holdout = make_dataset(
        cfg0.holdout_size,
        cfg0.background_rate,
        cfg0.profile,
        cfg0.seed ^ 0x4a11_d0e5,
    );
    let mut rows = Vec::new();
    for &lambda in &LAMBDA_GRID {
        let cfg = TrainConfig {
            normalization: Normalization::Adaptive { lambda },
            ..cfg0.clone()
        };
        let r = train_on(&cfg, &data, &holdout)?;
        rows.push(LambdaRow {
            label: format!("{lambda:.1}"),
            final_loss: r.holdout.mean_loss,
            mean_nwd: r.holdout.mean_nwd,
            mean_iou: r.holdout.mean_iou,
            center_err: r.holdout.mean_center_err,
        });
    }
    let fixed_c = dataset_fixed_c(&data, DEFAULT_LAMBDA);
    let cfg = TrainConfig {
        normalization: Normalization::Fixed { c: fixed_c },
        ..cfg0.clone()
    };
    let r = train_on(&cfg, &data, &holdout)?;
    rows.push(LambdaRow {
        label: "Fixed C".to_string(),
        final_loss: r.holdout.mean_loss,
        mean_nwd: r.holdout.mean_nwd,
        mean_iou: r.holdout.mean_iou,
        center_err: r.holdout.mean_center_err,
    });
    Ok(rows)
}

/// Render the timestep table in the benchmark layout.
pub fn render_timestep_table(rows: &[TimestepRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<6} {:>7} {:>7} {:>7} {:>7}", "T", "HOTA", "IDF1", "MOTA", "DetA").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<6} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            r.timesteps,
            r.report.hota * 100.0,
            r.report.idf1 * 100.0,
            r.report.mota * 100.0,
            r.report.deta * 100.0
        )
        .unwrap();
    }
    s
}

/// Render the lambda table in the benchmark layout, fixed baseline last.
pub fn render_lambda_table(rows: &[LambdaRow]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<8} {:>9} {:>7} {:>7} {:>10}",
        "lambda", "loss", "NWD", "IoU", "CenterErr"
    )
    .unwrap();
    for r in rows {
        writeln!(
            s,
            "{:<8} {:>9.4} {:>7.4} {:>7.4} {:>10.3}",
            r.label, r.final_loss, r.mean_nwd, r.mean_iou, r.center_err
        )
        .unwrap();
    }
    s
}

/// One point of the loss sensitivity bench: similarity responses of a
/// small and a large box to the same absolute center shift.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityRow {
    pub delta: f64,
    pub iou_small: f64,
    pub iou_large: f64,
    pub nwd_small: f64,
    pub nwd_large: f64,
}

/// Sweep center shifts for a 4x4 and a 64x64 box; the NWD normalization
/// comes from the mixed pair, as a batch containing both would set it.
pub fn loss_sensitivity(deltas: &[f64]) -> Vec<SensitivityRow> {
    let small = BBox {
        cx: 0.0,
        cy: 0.0,
        w: 4.0,
        h: 4.0,
    };
    let large = BBox {
        cx: 0.0,
        cy: 0.0,
        w: 64.0,
        h: 64.0,
    };
    let cb = batch_norm_factor(&[small, large], DEFAULT_LAMBDA).expect("two boxes");
    deltas
        .iter()
        .map(|&delta| {
            let shift = |b: &BBox| BBox {
                cx: b.cx + delta,
                ..*b
            };
            SensitivityRow {
                delta,
                iou_small: iou(&small, &shift(&small)),
                iou_large: iou(&large, &shift(&large)),
                nwd_small: nwd_similarity(&small, &shift(&small), &cb),
                nwd_large: nwd_similarity(&large, &shift(&large), &cb),
            }
        })
        .collect()
}

pub fn write_sensitivity_csv(path: impl AsRef<Path>, rows: &[SensitivityRow]) -> Result<()> {
    let mut s = String::from("delta,iou_small,iou_large,nwd_small,nwd_large\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.delta, r.iou_small, r.iou_large, r.nwd_small, r.nwd_large
        )
        .expect("string write cannot fail");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Minimal polyline chart of the sensitivity curves.
pub fn plot_sensitivity(path: impl AsRef<Path>, rows: &[SensitivityRow]) -> Result<()> {
    const W: u32 = 640;
    const H: u32 = 420;
    const ML: f64 = 50.0;
    const MB: f64 = 40.0;
    const MT: f64 = 20.0;
    const MR: f64 = 20.0;
    let mut img = image::RgbImage::from_pixel(W, H, image::Rgb([255, 255, 255]));
    let x_max = rows.iter().map(|r| r.delta).fold(1.0, f64::max);
    let to_px = |d: f64, v: f64| -> (f64, f64) {
        let x = ML + (d / x_max) * (W as f64 - ML - MR);
        let y = H as f64 - MB - v * (H as f64 - MT - MB);
        (x, y)
    };
    for gy in 0..=10 {
        let v = gy as f64 / 10.0;
        let (_, y) = to_px(0.0, v);
        for x in (ML as u32)..(W - MR as u32) {
            let c = if gy == 0 { [0, 0, 0] } else { [225, 225, 225] };
            img.put_pixel(x, y as u32, image::Rgb(c));
        }
    }
    for x in [ML as u32, (W as f64 - MR) as u32] {
        for y in (MT as u32)..(H - MB as u32) {
            img.put_pixel(x, y, image::Rgb([0, 0, 0]));
        }
    }
    let series: [([u8; 3], fn(&SensitivityRow) -> f64); 4] = [
        ([220, 60, 50], |r| r.iou_small),
        ([240, 160, 60], |r| r.iou_large),
        ([50, 90, 220], |r| r.nwd_small),
        ([80, 180, 220], |r| r.nwd_large),
    ];
    for (si, (color, get)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| to_px(r.delta, get(r))).collect();
        for seg in pts.windows(2) {
            draw_line(&mut img, seg[0], seg[1], *color);
        }
        let ly = MT as u32 + 14 * si as u32 + 4;
        for dx in 0..22u32 {
            for dy in 0..6u32 {
                img.put_pixel(ML as u32 + 8 + dx, ly + dy, image::Rgb(*color));
            }
        }
    }
    img.save(path.as_ref())?;
    Ok(())
}

fn draw_line(img: &mut image::RgbImage, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = a.0 + (b.0 - a.0) * t;
        let y = a.1 + (b.1 - a.1) * t;
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, image::Rgb(color));
        }
    }
}
