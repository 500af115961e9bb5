//! Train the toy spiking box regressor with the scale-adaptive NWD loss
//! and report held-out quality.

use smtrack::train::{train_regressor, TrainConfig};

fn main() {
    let cfg = TrainConfig::default();
    println!(
        "training a {}-unit two-hidden-layer integer-spiking regressor (T={}, D={}) for {} steps",
        cfg.hidden, cfg.timesteps, cfg.d_max, cfg.steps
    );
    let t0 = std::time::Instant::now();
    let r = train_regressor(&cfg).unwrap();
    println!("done in {:.1?}", t0.elapsed());
    println!();
    for (step, loss) in r.loss_curve.iter().filter(|(s, _)| s % 250 == 0 || *s + 1 == cfg.steps) {
        println!("  step {step:5}  batch loss {loss:.4}");
    }
    println!();
    println!(
        "held-out: mean NWD similarity {:.4}, mean IoU {:.4}, center error {:.3} px, objectness accuracy {:.3}",
        r.holdout.mean_nwd, r.holdout.mean_iou, r.holdout.mean_center_err, r.holdout.obj_accuracy
    );
}
