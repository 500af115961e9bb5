//! Command-line front end. Thin by design: every subcommand is a couple of
//! library calls; see the crate examples for the same flows in code.

use clap::{Args, Parser, Subcommand};
use smtrack::config::RunConfig;
use smtrack::error::{Error, Result};
use smtrack::harness;
use smtrack::head::{partition_detections, Detection, DetectionSource, Detector};
use smtrack::metrics::evaluate;
use smtrack::mot::{load_sequence, write_results, SeqInfo, Sequence};
use smtrack::synth::{gen_synthetic, render_frames, DetectorNoise, SyntheticScene};
use smtrack::tracker::Tracker;
use smtrack::train::{train_regressor, TrainConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "smtrack",
    about = "Spiking-network multi-object tracking toolkit",
    version
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// RNG seed for anything stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Association similarity: iou or nwd.
    #[arg(long, global = true)]
    cost: Option<String>,
    /// High-confidence detection threshold.
    #[arg(long, global = true)]
    tau_high: Option<f64>,
    /// Low-confidence detection threshold.
    #[arg(long, global = true)]
    tau_low: Option<f64>,
    /// NMS IoU threshold.
    #[arg(long, global = true)]
    nms_iou: Option<f64>,
    /// Scaling factor of the batch-adaptive loss normalization.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Outer timesteps T.
    #[arg(long, global = true)]
    timesteps: Option<usize>,
    /// Maximum integer activation D.
    #[arg(long, global = true)]
    dmax: Option<u32>,
    /// key=value overrides file, applied before explicit flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection file or an image directory into a result file.
    Track {
        /// MOTChallenge det.txt-style input.
        #[arg(long, conflicts_with = "images")]
        dets: Option<PathBuf>,
        /// Directory of numbered frames for the spiking detector.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Detector weight checkpoint (images route).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output result file.
        #[arg(long)]
        output: PathBuf,
        /// Also dump the (post-NMS kept) detections in det.txt layout.
        #[arg(long)]
        dump_dets: Option<PathBuf>,
    },
    /// Evaluate a result file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        results: PathBuf,
        /// Also write machine-readable key,value rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic scene: gt.txt, det.txt, seqinfo.ini, frames/.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        objects: usize,
        #[arg(long, default_value_t = 80)]
        frames: u32,
        #[arg(long, default_value_t = 320)]
        width: u32,
        #[arg(long, default_value_t = 256)]
        height: u32,
        /// Center jitter sigma in pixels.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Per-box drop probability.
        #[arg(long, default_value_t = 0.0)]
        drop: f64,
        /// Overlapping-duplicate rate.
        #[arg(long, default_value_t = 0.0)]
        fp: f64,
        #[arg(long, default_value_t = 1.0)]
        score_mean: f64,
        #[arg(long, default_value_t = 0.0)]
        score_sigma: f64,
        /// Rasterize frames as PNGs.
        #[arg(long)]
        render: bool,
    },
    /// Loss sensitivity bench: CSV plus a plot image.
    LossBench {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy spiking regressor; writes the loss curve and weights.
    DemoTrain {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
    /// Timestep and lambda sweeps in the benchmark table layout.
    Ablate {
        #[arg(long)]
        out: PathBuf,
        /// t, lambda, or all.
        #[arg(long, default_value = "all")]
        which: String,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn build_config(globals: &Globals) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &globals.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = globals.seed {
        cfg.seed = v;
    }
    if let Some(v) = &globals.cost {
        cfg.apply_kv("cost", v)?;
    }
    if let Some(v) = globals.tau_high {
        cfg.tau_high = v;
    }
    if let Some(v) = globals.tau_low {
        cfg.tau_low = v;
    }
    if let Some(v) = globals.nms_iou {
        cfg.nms_iou = v;
    }
    if let Some(v) = globals.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = globals.timesteps {
        cfg.timesteps = v;
    }
    if let Some(v) = globals.dmax {
        cfg.d_max = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli.globals)?;
    match cli.command {
        Command::Track {
            dets,
            images,
            weights,
            output,
            dump_dets,
        } => track(&cfg, dets, images, weights, output, dump_dets),
        Command::Eval { gt, results, csv } => eval(gt, results, csv),
        Command::Gen {
            out,
            objects,
            frames,
            width,
            height,
            jitter,
            drop,
            fp,
            score_mean,
            score_sigma,
            render,
        } => {
            let mut scene = SyntheticScene::random(cfg.seed, objects, frames, width, height);
            scene.noise = DetectorNoise {
                jitter_sigma: jitter,
                drop_rate: drop,
                fp_rate: fp,
                score_mean,
                score_sigma,
            };
            std::fs::create_dir_all(&out)?;
            let (gt, det) = gen_synthetic(&scene)?;
            smtrack::mot::write_sequence(out.join("gt.txt"), &gt)?;
            smtrack::mot::write_sequence(out.join("det.txt"), &det)?;
            SeqInfo {
                name: format!("synth-{:04}", cfg.seed),
                im_width: width,
                im_height: height,
                seq_length: frames,
            }
            .save(out.join("seqinfo.ini"))?;
            if render {
                render_frames(&scene, out.join("frames"))?;
            }
            println!(
                "wrote {} gt rows, {} det rows to {}",
                gt.len(),
                det.len(),
                out.display()
            );
            Ok(())
        }
        Command::LossBench { out } => {
            std::fs::create_dir_all(&out)?;
            let deltas: Vec<f64> = (0..=32).map(|i| i as f64 * 0.25).collect();
            let rows = harness::loss_sensitivity(&deltas);
            harness::write_sensitivity_csv(out.join("sensitivity.csv"), &rows)?;
            harness::plot_sensitivity(out.join("sensitivity.png"), &rows)?;
            let at2 = rows.iter().find(|r| (r.delta - 2.0).abs() < 1e-9).unwrap();
            println!(
                "2-px shift: IoU drop small {:.4} vs large {:.4}; NWD drop small {:.4} vs large {:.4}",
                1.0 - at2.iou_small,
                1.0 - at2.iou_large,
                1.0 - at2.nwd_small,
                1.0 - at2.nwd_large
            );
            println!("wrote sensitivity.csv and sensitivity.png to {}", out.display());
            Ok(())
        }
        Command::DemoTrain { out, steps } => {
            std::fs::create_dir_all(&out)?;
            let tcfg = TrainConfig {
                steps,
                seed: cfg.seed,
                timesteps: cfg.timesteps,
                d_max: cfg.d_max,
                normalization: smtrack::train::Normalization::Adaptive { lambda: cfg.lambda },
                ..TrainConfig::default()
            };
            let r = train_regressor(&tcfg)?;
            let mut curve = String::from("step,loss\n");
            for (s, l) in &r.loss_curve {
                curve.push_str(&format!("{s},{l}\n"));
            }
            std::fs::write(out.join("loss_curve.csv"), curve)?;
            let mut ck = smtrack::snn::Checkpoint::default();
            r.model.export(&mut ck);
            ck.save(out.join("regressor.json"))?;
            println!(
                "holdout: mean NWD {:.4}, mean IoU {:.4}, center err {:.3} px, objectness acc {:.3}",
                r.holdout.mean_nwd, r.holdout.mean_iou, r.holdout.mean_center_err, r.holdout.obj_accuracy
            );
            println!("wrote loss_curve.csv and regressor.json to {}", out.display());
            Ok(())
        }
        Command::Ablate { out, which, steps } => {
            std::fs::create_dir_all(&out)?;
            let base = TrainConfig {
                steps,
                seed: cfg.seed,
                d_max: cfg.d_max,
                ..TrainConfig::default()
            };
            if which == "t" || which == "all" {
                let rows = harness::timestep_sweep(&base, cfg.seed.wrapping_add(42))?;
                let table = harness::render_timestep_table(&rows);
                print!("{table}");
                if rows.len() >= 2 && rows[1].report.hota < rows[0].report.hota {
                    println!("warning: no improvement from T=1 to T=2 on this toy run");
                }
                std::fs::write(out.join("ablate_timesteps.txt"), table)?;
            }
            if which == "lambda" || which == "all" {
                let rows = harness::lambda_sweep(&base)?;
                let table = harness::render_lambda_table(&rows);
                print!("{table}");
                std::fs::write(out.join("ablate_lambda.txt"), table)?;
            }
            println!("wrote tables to {}", out.display());
            Ok(())
        }
    }
}

fn track(
    cfg: &RunConfig,
    dets: Option<PathBuf>,
    images: Option<PathBuf>,
    weights: Option<PathBuf>,
    output: PathBuf,
    dump_dets: Option<PathBuf>,
) -> Result<()> {
    let mut tracker = Tracker::new(cfg.tracker_params());
    let mut frames_out: Vec<(u32, Vec<smtrack::tracker::TrackOutput>)> = Vec::new();
    let mut kept_dump = Vec::new();

    match (dets, images) {
        (Some(path), None) => {
            let seq = load_sequence(&path)?;
            // also collect the post-NMS kept detections for --dump-dets
            let by_frame = seq.by_frame();
            for (frame, rows) in &by_frame {
                let raw: Vec<Detection> = rows
                    .iter()
                    .map(|r| Detection {
                        bbox: r.bbox(),
                        score: r.conf,
                        class_id: 0,
                        source: DetectionSource::HighConf,
                    })
                    .collect();
                let (high, low, _) =
                    partition_detections(&raw, cfg.tau_high, cfg.tau_low, cfg.nms_iou);
                for d in high.iter().chain(low.iter()) {
                    kept_dump.push((*frame, d.bbox, d.score));
                }
            }
            frames_out = smtrack::tracker::track_detection_sequence(
                cfg.tracker_params(),
                &seq,
                cfg.tau_high,
                cfg.tau_low,
                cfg.nms_iou,
            );
        }
        (None, Some(dir)) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "png").unwrap_or(false))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::Validation(format!(
                    "no .png frames in {}",
                    dir.display()
                )));
            }
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
            let mut detector = Detector::new(cfg.timesteps, cfg.d_max, 1);
            match &weights {
                Some(w) => detector.load_into(w)?,
                None => {
                    detector = detector.randomize(&mut rng);
                    eprintln!("note: no --weights given; using a seeded random detector");
                }
            }
            for (i, p) in paths.iter().enumerate() {
                let img = image::open(p)?.to_rgb8();
                let (w, h) = (img.width() as usize, img.height() as usize);
                let mut arr = ndarray::Array3::<f32>::zeros((3, h, w));
                for (x, y, px) in img.enumerate_pixels() {
                    for c in 0..3 {
                        arr[(c, y as usize, x as usize)] = px.0[c] as f32 / 255.0;
                    }
                }
                let (high, low, suppressed) =
                    detector.detect(&arr, cfg.tau_high, cfg.tau_low, cfg.nms_iou)?;
                let frame = (i + 1) as u32;
                for d in high.iter().chain(low.iter()) {
                    kept_dump.push((frame, d.bbox, d.score));
                }
                let outs = tracker.step(&high, &low, &suppressed);
                frames_out.push((frame, outs));
            }
        }
        _ => {
            return Err(Error::Validation(
                "track needs exactly one of --dets or --images".into(),
            ))
        }
    }

    write_results(&output, &frames_out)?;
    let n: usize = frames_out.iter().map(|(_, o)| o.len()).sum();
    println!("wrote {n} result rows to {}", output.display());

    if let Some(path) = dump_dets {
        let records: Vec<smtrack::mot::SequenceRecord> = kept_dump
            .iter()
            .map(|(f, b, s)| smtrack::mot::SequenceRecord::from_parts(*f, -1, b, *s))
            .collect();
        smtrack::mot::write_sequence(&path, &Sequence::new(records))?;
        println!("dumped detections to {}", path.display());
    }
    Ok(())
}

fn eval(gt: PathBuf, results: PathBuf, csv: Option<PathBuf>) -> Result<()> {
    let gt_seq = load_sequence(&gt)?;
    let pred = load_sequence(&results)?;
    let report = evaluate(&gt_seq, &pred);
    println!(
        "{:<6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6}",
        "", "HOTA", "DetA", "AssA", "MOTA", "IDF1", "IDs", "Frag"
    );
    println!(
        "{:<6} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>6} {:>6}",
        "all",
        report.hota * 100.0,
        report.deta * 100.0,
        report.assa * 100.0,
        report.mota * 100.0,
        report.idf1 * 100.0,
        report.ids,
        report.frag
    );
    if let Some(path) = csv {
        let s = format!(
            "metric,value\nhota,{}\ndeta,{}\nassa,{}\nassr,{}\nmota,{}\nidf1,{}\nids,{}\nfrag,{}\n",
            report.hota,
            report.deta,
            report.assa,
            report.assr,
            report.mota,
            report.idf1,
            report.ids,
            report.frag
        );
        std::fs::write(&path, s)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
