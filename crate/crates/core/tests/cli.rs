//! Runs the `usct` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
nx = 48
ny = 48
dx_m = 1.875e-4

[wave]
frequency_hz = 1e6

[ring]
count = 16

[phantom]
kind = "breast-like"
count = 2
seed = 5

[inversion]
max_iter = 3
regularization = "total-variation"

[bench]
repeats = 2
batch_sources = 2
"#;

fn usct(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_usct"));
    cmd.args(args).env_remove("USCT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The single `error category=...` line, if any.
fn error_line(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error category=")).collect();
    assert!(lines.len() <= 1, "{err}");
    lines.first().map(|l| l.to_string()).unwrap_or_default()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_and_solver_failure_exit_differently() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = usct(&["simulate", "-c", s(&dir.path().join("nope.toml")), "-o", s(&out), "--homogeneous"], &[]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(error_line(&missing).starts_with("error category=config "));

    let cfg = write_config(dir.path(), &format!("{SMALL}\n[solver]\nmax_iter = 2\n"));
    let stalled = usct(&["simulate", "-c", s(&cfg), "-o", s(&out), "--phantom", "0"], &[]);
    assert_eq!(stalled.status.code(), Some(7));
    assert!(error_line(&stalled).starts_with("error category=solver "));
}

#[test]
fn unknown_key_and_bad_thread_count_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[solver]\nmax_iters = 2\n"));
    let o = usct(&["gen-phantoms", "-c", s(&cfg), "-o", s(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o).contains("max_iters"));

    let cfg = write_config(dir.path(), SMALL);
    for bad in ["0", "many"] {
        let o = usct(&["gen-phantoms", "-c", s(&cfg), "-o", s(dir.path())], &[("USCT_THREADS", bad)]);
        assert_eq!(o.status.code(), Some(3), "USCT_THREADS={bad}");
    }
    let o = usct(&["gen-phantoms", "-c", s(&cfg), "-o", s(dir.path()), "--plot"], &[("USCT_THREADS", "2")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("phantom_0001.fld").exists() && dir.path().join("phantom_0001.png").exists());
}

#[test]
fn usage_errors_use_clap_status() {
    let o = usct(&["simulate", "--homogeneous"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn homogeneous_simulation_matches_hankel_oracle() {
    let dir = tempfile::tempdir().unwrap();
    // 12 wavelengths across leaves an annulus from 3 to 6 wavelengths.
    let cfg = write_config(dir.path(), &SMALL.replace("nx = 48\nny = 48", "nx = 96\nny = 96"));
    let o = usct(&["simulate", "-c", s(&cfg), "-o", s(dir.path()), "--homogeneous", "--center", "--plot"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("rrmse_vs_analytic")).unwrap();
    let e: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(e < 1e-2, "{line}");
    assert!(dir.path().join("field_s0000.png").exists());
}

#[test]
fn metrics_on_identical_fixture() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ramp_8x8_real64.fld");
    let o = usct(&["metrics", "--reference", s(&fx), "--estimate", s(&fx), "--window", "3"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    let psnr = text.lines().find(|l| l.starts_with("psnr")).unwrap();
    assert!(psnr.contains("inf"), "{psnr}");
    let ssim = text.lines().find(|l| l.starts_with("ssim")).unwrap();
    assert!(ssim.split('\t').nth(1).unwrap().starts_with("1.0"), "{ssim}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fld");
    fs::write(&bad, b"NOTAFLD!").unwrap();
    let o = usct(&["metrics", "--reference", s(&fx), "--estimate", s(&bad)], &[]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn bench_prints_one_row_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = usct(&["bench", "-c", s(&cfg), "--threads", "1"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 2, "{rows:?}");
    assert!(rows.iter().all(|r| r.starts_with("cbs-1t") && r.contains('±')));
}

#[test]
fn observe_reconstruct_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path();
    let o = usct(&["observe", "-c", s(&cfg), "-o", s(out), "--phantom", "1", "--snr-db", "20"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let y = out.join("measurements.json");
    let truth = out.join("truth.fld");
    let o = usct(
        &["reconstruct", "-c", s(&cfg), "-o", s(out), "--observed", s(&y), "--truth", s(&truth), "--plot"],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["reconstruction.fld", "trace.tsv", "reconstruction.png", "loss.png", "truth.png"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("psnr") && l.contains("reconstruction")), "{text}");
    // Three steps plus the starting point.
    let trace = fs::read_to_string(out.join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4, "{trace}");

    let o = usct(&["reconstruct", "-c", s(&cfg), "-o", s(out), "--observed", s(&out.join("missing.json"))], &[]);
    assert_eq!(o.status.code(), Some(4));
}
