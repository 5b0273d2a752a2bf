mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn maxplus(args: &[&str], data: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_maxplus"));
    cmd.args(args).env_remove("MNIST_DIR");
    if let Some(d) = data {
        cmd.arg("--mnist-dir").arg(d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_prune_sweep_viz_on_a_tiny_set() {
    let tmp = tempfile::tempdir().unwrap();
    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 600, 200);
    let run = tmp.path().join("run");
    let o = maxplus(
        &["train", "--units", "16", "--epochs", "3", "--val-size", "100", "--lr0", "0.05", "--out", p(&run)],
        Some(&data),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.mxpl", "metrics.csv", "manifest.txt"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(metrics.starts_with("epoch,step,lr,train_loss,val_accuracy\n"));
    let manifest = std::fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.units = 16"));

    let model = run.join("model.mxpl");
    let o = maxplus(&["eval", "--model", p(&model), "--val-size", "100"], Some(&data));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("accuracy "));

    let pruned = tmp.path().join("pruned");
    let o = maxplus(&["prune", "--model", p(&model), "--threshold", "1", "--out", p(&pruned), "--val-size", "100"], Some(&data));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(pruned.join("prune_report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[2], "16");
    assert!(row[1].parse::<usize>().unwrap() <= 10);

    let o = maxplus(&["eval", "--model", p(&pruned.join("pruned.mxpl")), "--val-size", "100"], Some(&data));
    assert_eq!(o.status.code(), Some(0));

    let sweep = tmp.path().join("sweep");
    let baseline = format!("same={}", p(&model));
    let o = maxplus(
        &["sweep", "--model", p(&model), "--grid", "0,0.5,1", "--baseline", &baseline, "--out", p(&sweep), "--val-size", "100"],
        Some(&data),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 + 2);
    let unpruned = table.lines().find(|l| l.starts_with("unpruned,")).unwrap();
    let same = table.lines().find(|l| l.starts_with("same,")).unwrap();
    assert!(unpruned.ends_with(same.rsplitn(3, ',').collect::<Vec<_>>()[..2].iter().rev().cloned().collect::<Vec<_>>().join(",").as_str()));

    let viz = tmp.path().join("viz");
    let o = maxplus(&["viz", "--model", p(&model), "--out", p(&viz)], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(viz.join("wm.pgm").exists());
    assert!(viz.join("wm_class0_padded4x4.pgm").exists() || viz.join("wm_class0.pgm").exists());
    assert!(viz.join("collisions.csv").exists());
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 300, 50);
    let runs: Vec<_> = ["a", "b"].iter().map(|n| tmp.path().join(n)).collect();
    for run in &runs {
        let o = maxplus(&["train", "--units", "6", "--epochs", "2", "--val-size", "60", "--out", p(run)], Some(&data));
        assert_eq!(o.status.code(), Some(0));
        let o = maxplus(&["sweep", "--model", p(&run.join("model.mxpl")), "--out", p(run), "--val-size", "60"], Some(&data));
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["model.mxpl", "metrics.csv", "sweep.csv"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_study_writes_both_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 300, 50);
    let out = tmp.path().join("study");
    let o = maxplus(
        &["seed-study", "--seeds", "1,2", "--ratios", "0,0.5", "--units", "8", "--epochs", "1", "--val-size", "50", "--threads", "2", "--out", p(&out)],
        Some(&data),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("seed_study.csv")).unwrap().lines().count(), 5);
    let summary = std::fs::read_to_string(out.join("seed_study_summary.csv")).unwrap();
    assert!(summary.starts_with("dropout,runs,mean,min,max,std\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 200, 20);
    let cfg = write(tmp.path(), "run.cfg", b"# tiny\nunits = 5\nepochs = 2\nseed = 9\n");
    let out = tmp.path().join("run");
    let o = maxplus(&["train", "--config", p(&cfg), "--epochs", "1", "--val-size", "50", "--out", p(&out)], Some(&data));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.units = 5"));
    assert!(manifest.contains("config.epochs = 1"));
    assert!(manifest.contains("config.seed = 9"));
}

#[test]
fn approx_reports_exact_reconstruction() {
    for args in [&["approx"][..], &["approx", "--pwl", "relu"], &["approx", "--pwl", "random", "--pieces", "8", "--inputs", "3"]] {
        let o = maxplus(args, None);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("max |block - direct|"));
    }
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("abs.csv");
    let o = maxplus(&["approx", "--grid-steps", "11", "--out", p(&csv)], None);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,block,direct,abs_error");
    assert_eq!(text.lines().nth(1).unwrap(), "-2,2,2,0");
}

#[test]
fn exit_codes() {
    assert_eq!(maxplus(&[], None).status.code(), Some(1));
    assert_eq!(maxplus(&["train"], None).status.code(), Some(1));
    assert_eq!(maxplus(&["--help"], None).status.code(), Some(0));
    assert_eq!(maxplus(&["approx", "--grid-steps", "1"], None).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = maxplus(&["train", "--dropout", "1.5", "--out", p(&out)], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
    let o = maxplus(&["train", "--out", p(&out)], Some(&tmp.path().join("absent")));
    assert_eq!(o.status.code(), Some(2));

    let junk = write(tmp.path(), "junk.mxpl", b"not a model");
    assert_eq!(maxplus(&["viz", "--model", p(&junk), "--out", p(&out)], None).status.code(), Some(2));

    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 100, 20);
    write(&data, "t10k-labels-idx1-ubyte", &idx_labels(&[1, 2, 3]));
    let o = maxplus(&["train", "--epochs", "1", "--val-size", "10", "--out", p(&out)], Some(&data));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_finite_training_is_a_numeric_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let data = stripe_dataset(&tmp.path().join("data").tap_mkdir(), 200, 20);
    let out = tmp.path().join("run");
    let o = maxplus(
        &["train", "--arch", "softmax-linear", "--lr0", "1e308", "--epochs", "3", "--val-size", "50", "--out", p(&out)],
        Some(&data),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

trait Mkdir {
    fn tap_mkdir(self) -> Self;
}

impl Mkdir for std::path::PathBuf {
    fn tap_mkdir(self) -> Self {
        std::fs::create_dir_all(&self).unwrap();
        self
    }
}
