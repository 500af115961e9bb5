//! Black-box checks of the `smtrack` binary: subcommand flows, global
//! flags, config overrides and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smtrack"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn gen_track_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let res = dir.path().join("res.txt");
    let csv = dir.path().join("metrics.csv");

    run_ok(&[
        "--seed",
        "11",
        "gen",
        "--out",
        scene.to_str().unwrap(),
        "--objects",
        "4",
        "--frames",
        "40",
    ]);
    for f in ["gt.txt", "det.txt", "seqinfo.ini"] {
        assert!(scene.join(f).exists(), "{f} missing");
    }

    run_ok(&[
        "track",
        "--dets",
        scene.join("det.txt").to_str().unwrap(),
        "--output",
        res.to_str().unwrap(),
    ]);
    let stdout = run_ok(&[
        "eval",
        "--gt",
        scene.join("gt.txt").to_str().unwrap(),
        "--results",
        res.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(stdout.contains("HOTA"));
    assert!(stdout.contains("100.00"), "perfect scene must score 100:\n{stdout}");
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.contains("hota,1"));
}

#[test]
fn config_file_and_flags_interact() {
    let dir = tempfile::tempdir().unwrap();
    let cfgfile = dir.path().join("run.cfg");
    std::fs::write(&cfgfile, "tau_high=0.5\nmax_lost=5\n").unwrap();
    let scene = dir.path().join("scene");
    run_ok(&[
        "gen",
        "--out",
        scene.to_str().unwrap(),
        "--objects",
        "2",
        "--frames",
        "10",
    ]);
    // config file applies, explicit flag wins over it
    run_ok(&[
        "--config",
        cfgfile.to_str().unwrap(),
        "--tau-high",
        "0.7",
        "track",
        "--dets",
        scene.join("det.txt").to_str().unwrap(),
        "--output",
        dir.path().join("r.txt").to_str().unwrap(),
    ]);
    // a bad config key is a validation failure
    std::fs::write(&cfgfile, "nonsense=1\n").unwrap();
    let out = bin()
        .args([
            "--config",
            cfgfile.to_str().unwrap(),
            "eval",
            "--gt",
            scene.join("gt.txt").to_str().unwrap(),
            "--results",
            scene.join("gt.txt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_map_error_classes() {
    // missing input file: I/O class, exit 2
    let out = bin()
        .args(["eval", "--gt", "/definitely/missing", "--results", "/nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // malformed usage: validation class, exit 1
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "track",
            "--output",
            dir.path().join("x.txt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // malformed detection row: validation class, exit 1
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1,1,0,0,-5,10,1\n").unwrap();
    let out = bin()
        .args([
            "track",
            "--dets",
            bad.to_str().unwrap(),
            "--output",
            dir.path().join("y.txt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn loss_bench_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let stdout = run_ok(&["loss-bench", "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("2-px shift"));
    assert!(out.join("sensitivity.csv").exists());
    assert!(out.join("sensitivity.png").exists());
    let csv = std::fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    assert!(csv.starts_with("delta,iou_small,iou_large,nwd_small,nwd_large"));
}

#[test]
fn demo_train_short_run_writes_curve_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let stdout = run_ok(&["demo-train", "--out", out.to_str().unwrap(), "--steps", "60"]);
    assert!(stdout.contains("holdout"));
    assert!(out.join("loss_curve.csv").exists());
    assert!(out.join("regressor.json").exists());
}

#[test]
fn images_route_runs_with_random_detector() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    run_ok(&[
        "--seed",
        "13",
        "gen",
        "--out",
        scene.to_str().unwrap(),
        "--objects",
        "2",
        "--frames",
        "4",
        "--width",
        "96",
        "--height",
        "80",
        "--render",
    ]);
    assert!(scene.join("frames").join("000001.png").exists());
    run_ok(&[
        "track",
        "--images",
        scene.join("frames").to_str().unwrap(),
        "--output",
        dir.path().join("res.txt").to_str().unwrap(),
        "--dump-dets",
        dir.path().join("dets.txt").to_str().unwrap(),
    ]);
    assert!(dir.path().join("res.txt").exists());
    assert!(dir.path().join("dets.txt").exists());
}

#[test]
fn ablate_minimal_emits_tables(){
    // guarded tiny run so the full grid machinery is exercised end to end
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ablate");
    let stdout = run_ok(&["ablate", "--out", out.to_str().unwrap(), "--which", "lambda", "--steps", "30"]);
    assert!(stdout.contains("lambda"));
    assert!(stdout.contains("Fixed C"));
    assert!(Path::new(&out.join("ablate_lambda.txt")).exists());
}
