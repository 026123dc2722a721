mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::tree_bytes;
use tempfile::TempDir;

fn apg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apg"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, count: &str) {
    let out = apg(&[
        "synth",
        "--seed",
        "7",
        "--count",
        count,
        "--size",
        "96",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_run_then_eval() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, "6");
    let manifest = corpus.join("manifest.csv");
    assert_eq!(fs::read_to_string(&manifest).unwrap().lines().count(), 7);

    let out = tmp.path().join("out");
    let run = apg(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eval",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("IoU"));
    let metrics = fs::read(out.join("metrics.csv")).unwrap();

    fs::remove_file(out.join("metrics.csv")).unwrap();
    let eval = apg(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&eval), 0);
    assert_eq!(fs::read(out.join("metrics.csv")).unwrap(), metrics);
}

#[test]
fn run_without_eval_writes_no_metrics() {
    let tmp = TempDir::new().unwrap();
    synth(&tmp.path().join("c"), "3");
    let out = tmp.path().join("out");
    let run = apg(&[
        "run",
        "--manifest",
        tmp.path().join("c/manifest.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0);
    assert!(out.join("report.csv").is_file());
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn cli_and_library_write_the_same_tree() {
    let tmp = TempDir::new().unwrap();
    synth(&tmp.path().join("c"), "6");
    let manifest = tmp.path().join("c/manifest.csv");
    let cli_out = tmp.path().join("cli");
    let lib_out = tmp.path().join("lib");
    let run = apg(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        cli_out.to_str().unwrap(),
        "--eval",
    ]);
    assert_eq!(code(&run), 0);
    let cfg = apg_core::pipeline::RunConfig::new(&manifest, &lib_out);
    apg_core::pipeline::run_pipeline(&cfg, &apg_core::segmenter::MockSegmenter::default()).unwrap();
    assert_eq!(tree_bytes(&cli_out), tree_bytes(&lib_out));
}

#[test]
fn sweep_and_ablate_write_tables() {
    let tmp = TempDir::new().unwrap();
    synth(&tmp.path().join("c"), "4");
    let manifest = tmp.path().join("c/manifest.csv");
    let out = tmp.path().join("out");
    let (m, o) = (manifest.to_str().unwrap(), out.to_str().unwrap());

    let sweep = apg(&["sweep", "--manifest", m, "--out", o, "--thresholds", "60,120,180"]);
    assert_eq!(code(&sweep), 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let ts: Vec<_> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ts, ["60", "120", "180"]);

    let ablate = apg(&["ablate", "--manifest", m, "--out", o]);
    assert_eq!(code(&ablate), 0);
    assert_eq!(fs::read_to_string(out.join("ablation.csv")).unwrap().lines().count(), 4);
    assert!(stdout(&ablate).contains("point-only"));
}

#[test]
fn grid_mode_from_the_command_line() {
    let tmp = TempDir::new().unwrap();
    synth(&tmp.path().join("c"), "4");
    let out = tmp.path().join("out");
    let run = apg(&[
        "run",
        "--manifest",
        tmp.path().join("c/manifest.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "grid",
        "--grid-n",
        "3",
    ]);
    assert_eq!(code(&run), 0);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(
        report
            .lines()
            .filter(|l| l.contains(",1,processed,"))
            .all(|l| l.contains(",processed,9,")),
        "{report}"
    );
}

#[test]
fn fatal_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(
        code(&apg(&["run", "--manifest", "/no/such/manifest.csv", "--out", o])),
        1
    );
    assert_eq!(code(&apg(&["run", "--out", o])), 1);
    assert_eq!(code(&apg(&["frobnicate"])), 1);

    synth(&tmp.path().join("c"), "2");
    let m = tmp.path().join("c/manifest.csv");
    let m = m.to_str().unwrap();
    assert_eq!(
        code(&apg(&["run", "--manifest", m, "--out", o, "--threshold", "300"])),
        1
    );
    assert_eq!(code(&apg(&["run", "--manifest", m, "--out", o, "--mode", "lasso"])), 1);
    assert_eq!(
        code(&apg(&[
            "run",
            "--manifest",
            m,
            "--out",
            o,
            "--mode",
            "grid",
            "--grid-n",
            "0"
        ])),
        1
    );

    fs::write(
        tmp.path().join("bad.csv"),
        "id,image,heatmap,label,gt_mask\na,x.pgm,y.pgm,2,\n",
    )
    .unwrap();
    let bad = apg(&[
        "run",
        "--manifest",
        tmp.path().join("bad.csv").to_str().unwrap(),
        "--out",
        o,
    ]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("label"));
}

#[test]
fn help_exits_zero() {
    let out = apg(&["--help"]);
    assert_eq!(code(&out), 0);
    for sub in ["run", "sweep", "ablate", "synth", "eval"] {
        assert!(stdout(&out).contains(sub));
    }
}

#[test]
fn per_image_failures_exit_two() {
    let tmp = TempDir::new().unwrap();
    synth(&tmp.path().join("c"), "6");
    let manifest = tmp.path().join("c/manifest.csv");
    let out = tmp.path().join("out");
    let missing = tmp.path().join("no-bridge");
    let run = apg(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--segmenter",
        "external",
        "--bridge",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2, "{}", stdout(&run));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("backend-error"));
    assert!(!report.contains(",processed,"));
}
