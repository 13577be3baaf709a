use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;

use lbe_cli::output::fmt_f64;

fn experiments() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn spec(name: &str) -> String {
    experiments().join(name).to_string_lossy().into_owned()
}

fn lbe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbe")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn one_iteration_gives_seed_plus_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&["simulate", "--spec", &spec("duffing_ueda.exp"), "--iters", "1", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    for id in ["F", "G"] {
        let rows = read_csv(&tmp.path().join(format!("orbit_{id}.csv")));
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.1);
    }
    assert!(tmp.path().join("simulate.manifest.json").exists());
}

#[test]
fn missing_model_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = tmp.path().join("m.exp");
    std::fs::write(
        &exp,
        "model no_such.model\nseed 1\niters 3\nextension A = canonical\nextension B = reverse\n",
    )
    .unwrap();
    let o = lbe(&["simulate", "--spec", exp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such.model"), "{}", stderr(&o));
}

#[test]
fn non_equivalent_extension_is_a_spec_error() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = tmp.path().join("bad.exp");
    let model = experiments().join("../models/chua.model");
    std::fs::write(
        &exp,
        format!(
            "model {}\nseed 1 1 1 1\niters 3\nextension A = canonical\nextension B = regroup(term=6, tree=\"c*y0*y1*y1\")\n",
            model.display()
        ),
    )
    .unwrap();
    let o = lbe(&["lbe", "--spec", exp.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn huge_epsilon_never_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&["horizon", "--spec", &spec("chua.exp"), "--epsilon", "1e9", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("OrbitEnd"));
}

#[test]
fn lbe_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&["lbe", "--spec", &spec("chua.exp"), "--iters", "600", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("lbe.csv")).unwrap();
    assert!(text.starts_with("n,lbe,log2_lbe,epsilon,guard\n"));
    let f = read_csv(&tmp.path().join("orbit_F.csv"));
    let g = read_csv(&tmp.path().join("orbit_G.csv"));
    for (n, row) in read_csv(&tmp.path().join("lbe.csv")).iter().enumerate() {
        let a: f64 = f[n][1].parse().unwrap();
        let b: f64 = g[n][1].parse().unwrap();
        let l: f64 = row[1].parse().unwrap();
        assert_eq!(l, (a - b).abs() / 2.0);
        assert_eq!(row[2].parse::<f64>().unwrap(), l.log2());
    }
}

#[test]
fn verify_beyond_trust_window_names_the_length() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&[
        "verify", "--spec", &spec("chua.exp"), "--window", "3000", "--ref-bits", "128", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trusted for"), "{}", stderr(&o));
}

#[test]
fn verify_chua_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&["verify", "--spec", &spec("chua.exp"), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 violations"));
    assert_eq!(read_csv(&tmp.path().join("verify.csv")).len(), 404);
}

#[test]
fn bench_rejects_too_few_reps() {
    for reps in ["0", "1"] {
        let o = lbe(&["bench", "--spec", &spec("chua.exp"), "--reps", reps]);
        assert_eq!(o.status.code(), Some(2));
    }
}

#[test]
fn bench_ratios_follow_from_the_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&[
        "bench", "--spec", &spec("chua.exp"), "--spec", &spec("logistic.exp"), "--reps", "5", "--iters", "200",
        "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = read_csv(&tmp.path().join("bench_runs.csv"));
    assert_eq!(runs.len(), 10);
    let mean = |task: &str| {
        let xs: Vec<f64> = runs.iter().filter(|r| r[0] == task).map(|r| r[2].parse().unwrap()).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let table = read_csv(&tmp.path().join("bench_compare.csv"));
    let fastest = mean(&table[0][0]);
    for row in &table {
        let ratio: f64 = row[3].parse().unwrap();
        let expected = mean(&row[0]) / fastest;
        assert!((ratio - expected).abs() <= 1e-12 * expected, "{row:?}");
    }
    let manifest = std::fs::read_to_string(tmp.path().join("bench.manifest.json")).unwrap();
    assert!(manifest.contains("\"warmup\": true"));
}

#[test]
fn overflow_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = lbe(&["simulate", "--spec", &spec("logistic.exp"), "--out", out]);
    assert!(o.status.success());
    let exp = tmp.path().join("blowup.exp");
    let model = experiments().join("../models/logistic_expanded.model");
    std::fs::write(
        &exp,
        format!(
            "model {}\nseed 5\niters 50\nextension F = canonical\nextension G = regroup(term=2, tree=\"c*(y0*y0)\")\n",
            model.display()
        ),
    )
    .unwrap();
    let o = lbe(&["simulate", "--spec", exp.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("non-finite"));
    assert!(tmp.path().join("orbit_F.csv").exists());
}

proptest! {
    #[test]
    fn csv_values_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back: f64 = fmt_f64(x).parse().unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
