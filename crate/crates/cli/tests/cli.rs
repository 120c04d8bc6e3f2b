use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lojasgd")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn chung_writes_summary_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[chung]\nc1 = 2.0\nc2 = 1.0\nq = 1.0\np = 1.0\nk_max = 100000\n");
    let out = dir.path().join("out");
    let o = run(&["chung", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("PASS chung_limit"));
    assert!(stdout.contains("failed: []"));
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("status = \"pass\""));
    assert!(out.join("per_step.csv").exists());
}

#[test]
fn failing_check_sets_exit_one_and_lists_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[chung]\nc1 = 2.0\nc2 = 1.0\nq = 1.0\np = 1.0\nk_max = 20\ntolerance = 1e-9\n",
    );
    let out = dir.path().join("out");
    let o = run(&["chung", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("failed: [chung_limit]"));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[landscape]\nkind = \"quadratic\"\ndim = 2\n[schedule]\nkind = \"robbins_monro\"\ngamma = 4.0\nq = 0.4\n",
    );
    let o = run(&["rate-fit", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("schedule.q"), "{err}");
}

#[test]
fn seed_and_worker_count_leave_results_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[landscape]\nkind = \"quadratic\"\ndim = 4\n[run]\nhorizon = 50\nn_runs = 40\n\
         [noise]\nkind = \"ml_scaled\"\nsigma = 1.0\n[constants]\nalpha_samples = 200\nclip_pairs = 200\n\
         floor_samples = 200\ngrowth_points = 100\n",
    );
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let o = run(&[
            "run-ensemble",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--workers",
            workers,
        ]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(out.join("per_run.csv")).unwrap());
        let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
        assert!(summary.contains("base_seed = 7"));
    }
    assert_eq!(csvs[0], csvs[1]);
}
