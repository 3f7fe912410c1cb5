use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csc_core::cli::formats::{encode_pgm, parse_pgm, RunConfigFile, TensorFile};
use csc_core::cli::{parse_grid, CSV_VERSION_LINE};
use csc_core::pipeline::{Method, SplitMix64};
use csc_core::spectral::Image;
use proptest::prelude::*;

fn csc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes an 8-filter dictionary and a noisy 24×24 image pair into `dir`.
fn fixture(dir: &Path) -> PathBuf {
    let out = csc(dir, &["synth", "--dict-out", "dict.csct", "--filters", "8", "--size", "4", "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = csc(
        dir,
        &["synth", "--image", "piecewise", "--size", "24", "--seed", "2", "--out", "clean.pgm", "--sigma", "0.05", "--noisy-out", "noisy.pgm"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    dir.to_path_buf()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(csc(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(csc(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(csc(dir.path(), &["denoise", "--in", "x.pgm"]).status.code(), Some(2));
    assert_eq!(csc(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn mu_with_cbpdn_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = csc(
        dir.path(),
        &["denoise", "--in", "noisy.pgm", "--out", "o.pgm", "--dict", "dict.csct", "--method", "cbpdn", "--mu", "0.1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mu not applicable"), "{}", stderr(&out));
    assert!(!dir.path().join("o.pgm").exists());
    let out = csc(
        dir.path(),
        &["gridsearch", "--images", "clean.pgm", "--dict", "dict.csct", "--method", "bpdn", "--mu-grid", "0.1"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = csc(dir.path(), &["gridsearch", "--images", "clean.pgm", "--dict", "dict.csct", "--method", "stv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_and_corrupt_inputs() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = csc(dir.path(), &["denoise", "--in", "noisy.pgm", "--out", "o.pgm", "--dict", "nowhere.csct"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere.csct"), "{}", stderr(&out));
    std::fs::write(dir.path().join("bad.pgm"), b"P2\n1 1\n255\n0").unwrap();
    let out = csc(dir.path(), &["denoise", "--in", "bad.pgm", "--out", "o.pgm", "--dict", "dict.csct"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.pgm"));
    let out = csc(dir.path(), &["denoise", "--in", "noisy.pgm", "--out", "o.pgm"]);
    assert_eq!(out.status.code(), Some(2));
    let out = csc(dir.path(), &["denoise", "--in", "noisy.pgm", "--out", "o.pgm", "--dict", "dict.csct", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn denoise_with_reference_reports_psnr() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = csc(
        dir.path(),
        &[
            "denoise", "--in", "noisy.pgm", "--out", "o.pgm", "--reference", "clean.pgm", "--dict", "dict.csct", "--method", "stv",
            "--lambda", "0.02", "--mu", "0.02", "--max-iter", "20",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text.trim().strip_prefix("psnr ").unwrap().parse().unwrap();
    assert!(value.is_finite() && value > 10.0);
    let img = parse_pgm(&std::fs::read(dir.path().join("o.pgm")).unwrap(), Path::new("o.pgm")).unwrap();
    assert_eq!(img.dims(), (24, 24));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    std::fs::write(dir.path().join("run.cfg"), "# run\nmethod = stv\nlambda = 0.02\nmu = 0.02\nmax_iter = 10\ndict_path = dict.csct\n").unwrap();
    let args = ["denoise", "--in", "noisy.pgm", "--config", "run.cfg"];
    let a = csc(dir.path(), &[&args[..], &["--out", "a.pgm"]].concat());
    assert!(a.status.success(), "{}", stderr(&a));
    let b = csc(dir.path(), &[&args[..], &["--out", "b.pgm", "--max-iter", "10"]].concat());
    assert!(b.status.success());
    let c = csc(dir.path(), &[&args[..], &["--out", "c.pgm", "--max-iter", "1"]].concat());
    assert!(c.status.success());
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.pgm"), read("b.pgm"));
    assert_ne!(read("a.pgm"), read("c.pgm"));
    std::fs::write(dir.path().join("bad.cfg"), "lambda = 1\nlambda = 2\n").unwrap();
    let out = csc(dir.path(), &["denoise", "--in", "noisy.pgm", "--out", "d.pgm", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(RunConfigFile::parse("colour = red").is_err());
    assert_eq!(RunConfigFile::parse("method = vtv").unwrap().method, Some(Method::Vtv));
}

#[test]
fn gridsearch_csv_structure() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = csc(
        dir.path(),
        &[
            "gridsearch", "--images", "clean.pgm", "noisy.pgm", "--dict", "dict.csct", "--method", "stv", "--lambda-grid", "0.01:0.04:3-log",
            "--mu-grid", "0.01:0.02:2-log", "--max-iter", "10", "--sigma", "0.05",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_VERSION_LINE);
    assert_eq!(lines[1], "method,image,lambda,mu,psnr");
    assert_eq!(lines.len(), 2 + 3 * 2 * 2 + 2 + 1);
    for row in &lines[2..14] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[0], "stv");
        assert!(cols[1] == "clean" || cols[1] == "noisy");
        assert!(cols[4].parse::<f64>().unwrap().is_finite());
    }
    assert!(lines[14].starts_with("stv,best-per-image:clean,"));
    assert!(lines[16].starts_with("stv,best-average,"));

    let out = csc(
        dir.path(),
        &[
            "gridsearch", "--images", "clean.pgm", "--dict", "dict.csct", "--method", "stv", "--fix-lambda", "0", "--mu-grid", "0.02",
            "--max-iter", "10", "--sigma", "0.05", "--out", "grid.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!((row[2], row[3]), ("0", "0.02"));
}

#[test]
fn reruns_are_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let out = csc(
            dir.path(),
            &["denoise", "--in", "clean.pgm", "--out", "o.csct", "--dict", "dict.csct", "--method", "vtv", "--lambda", "0.02", "--mu", "0.01", "--max-iter", "15", "--sigma", "0.05", "--seed", "4"],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        ["dict.csct", "clean.pgm", "noisy.pgm", "o.csct"].map(|n| std::fs::read(dir.path().join(n)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn grid_specs() {
    assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
    assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
    let g = parse_grid("0.01:1:3-log").unwrap();
    assert!((g[1] - 0.1).abs() < 1e-12 && g.len() == 3);
    for bad in ["", "a", "1:2", "1:2:3", "0:1:3-log", "-1", "1:2:x-log"] {
        assert!(parse_grid(bad).is_err(), "{bad}");
    }
}

#[test]
fn short_or_foreign_tensors_are_rejected() {
    let p = Path::new("t.csct");
    let t = TensorFile::new(vec![2, 3], vec![0.0; 6]).unwrap();
    let bytes = t.to_bytes();
    assert!(TensorFile::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
    assert!(TensorFile::from_bytes(b"NOPE\x01\x00\x00\x00", p).is_err());
    let mut v2 = bytes.clone();
    v2[4] = 2;
    assert!(TensorFile::from_bytes(&v2, p).is_err());
    assert!(TensorFile::new(vec![2, 2], vec![0.0; 3]).is_err());
}

proptest! {
    #[test]
    fn tensor_round_trip(dims in prop::collection::vec(1usize..5, 0..=4), seed in any::<u64>()) {
        let n: usize = dims.iter().product();
        let mut rng = SplitMix64::new(seed);
        let data: Vec<f32> = (0..n).map(|_| rng.next_normal() as f32).collect();
        let t = TensorFile::new(dims, data).unwrap();
        prop_assert_eq!(TensorFile::from_bytes(&t.to_bytes(), Path::new("x")).unwrap(), t);
    }

    #[test]
    fn pgm_round_trip(h in 1usize..20, w in 1usize..20, seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let img = Image::from_fn(h, w, |_, _| rng.next_f64());
        let back = parse_pgm(&encode_pgm(&img), Path::new("x.pgm")).unwrap();
        prop_assert_eq!(back.dims(), (h, w));
        for (a, b) in back.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
        let again = parse_pgm(&encode_pgm(&back), Path::new("x.pgm")).unwrap();
        prop_assert_eq!(again, back);
    }
}
