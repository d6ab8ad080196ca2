use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use tempfile::TempDir;
use xsdr::rng::from_seed;

fn xsdr() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_xsdr"));
    c.env_remove("XSDR_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `n` rows of `p` standard normal predictors and a response built by `f`.
fn write_data(dir: &Path, n: usize, p: usize, seed: u64, f: impl Fn(&[f64], f64) -> f64) -> PathBuf {
    let mut rng = from_seed(seed);
    let mut text = (1..=p).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",") + ",y\n";
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let y = f(&x, rng.sample(StandardNormal));
        let cells: Vec<String> = x.iter().chain(std::iter::once(&y)).map(|v| v.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_writes_basis_and_manifest() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 80, 4, 1, |x, e| x[0] * e);
    let out = dir.path().join("fit");
    let o = run(xsdr().arg("fit").arg(&data).args([
        "--response", "y", "--method", "ea-sir", "--H", "2", "--d", "1", "--seed", "7", "--N", "100",
        "--lambda", "0.1", "--out",
    ]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let basis = fs::read_to_string(out.join("basis.csv")).unwrap();
    let lines: Vec<&str> = basis.lines().collect();
    assert_eq!(lines[0], "predictor,b1");
    assert_eq!(lines.len(), 5);
    assert_eq!(fs::read_to_string(out.join("eigenvalues.csv")).unwrap().lines().count(), 5);
    assert_eq!(fs::read_to_string(out.join("reduced.csv")).unwrap().lines().count(), 81);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["options"]["method"], "EA-SIR");
    assert_eq!(m["options"]["seed"], 7);
    assert_eq!(m["options"]["lambda"], 0.1);
    assert!(m["options"]["r"].as_f64().unwrap() > 0.0);
    assert_eq!(m["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["input"]["n"], 80);
}

#[test]
fn missing_value_exits_two_and_names_row() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b,y\n1,2,3\n2,1,4\n3,3,1\n4,0,2\n5,,6\n6,2,2\n").unwrap();
    let o = run(xsdr().arg("fit").arg(&path).args(["--response", "y", "--method", "sir", "--out"]).arg(dir.path().join("o")));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 5"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn estimator_error_exits_three() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("const.csv");
    fs::write(&path, "a,y\n1,3\n1,4\n1,1\n1,2\n").unwrap();
    let o = run(xsdr().arg("fit").arg(&path).args(["--response", "y", "--method", "sir", "--H", "2", "--out"]).arg(dir.path().join("o")));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn lambda_auto_records_selection() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 60, 3, 2, |x, e| x[0] + 0.3 * e);
    let out = dir.path().join("fit");
    let o = run(xsdr().arg("fit").arg(&data).args([
        "--response", "y", "--method", "ea-dr", "--N", "50", "--lambda", "auto", "--out",
    ]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&out.join("manifest.json"));
    let lambda = &m["options"]["lambda"];
    assert_eq!(lambda["mode"], "data-driven");
    let chosen = lambda["selected"].as_f64().unwrap();
    assert!([0.001, 0.01, 0.1, 1.0, 10.0].contains(&chosen));
    assert_eq!(lambda["scores"].as_array().unwrap().len(), 5);
}

#[test]
fn seed_flag_beats_environment() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 40, 3, 3, |x, _| x[1]);
    let base = ["--response", "y", "--method", "sir", "--out"];
    let a = dir.path().join("a");
    let o = run(xsdr().env("XSDR_SEED", "5").arg("fit").arg(&data).args(base).arg(&a));
    assert!(o.status.success());
    assert_eq!(json(&a.join("manifest.json"))["options"]["seed"], 5);
    let b = dir.path().join("b");
    let o = run(xsdr().env("XSDR_SEED", "5").arg("fit").arg(&data).args(base).arg(&b).args(["--seed", "9"]));
    assert!(o.status.success());
    assert_eq!(json(&b.join("manifest.json"))["options"]["seed"], 9);
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    run(xsdr()
        .args([
            "simulate", "--model", "I", "--n", "60", "--p", "6", "--H", "5", "--reps", "4", "--methods", "dr,ea-dr",
            "--N", "30", "--lambda", "0.1", "--seed", "1", "--out",
        ])
        .arg(out)
        .args(extra))
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(simulate(&a, &[]).status.success());
    assert!(simulate(&b, &[]).status.success());
    assert!(simulate(&c, &["--threads", "3"]).status.success());
    for f in ["table.csv", "table.json", "manifest.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let table = fs::read_to_string(a.join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,method,flavor,n,p,H,N,k,d,mean_delta,se_delta,reps,seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("I,DR,classical,60,6,5,0,0,2,"));
    assert!(lines[2].starts_with("I,EA-DR,projective,60,6,5,30,9,2,"));
}

#[test]
fn simulate_sweep_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = simulate(&out, &["--sweep", "H", "--values", "4,5,10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("axis,value,model,"));
    assert_eq!(lines.len(), 7);
    assert!(lines[5].starts_with("H,10,I,DR,classical,60,6,10,"));
}

#[test]
fn simulate_invalid_config_exits_four() {
    let dir = TempDir::new().unwrap();
    let bad_model = run(xsdr().args(["simulate", "--model", "VII", "--out"]).arg(dir.path()));
    assert_eq!(bad_model.status.code(), Some(4));
    let small_p = run(xsdr().args(["simulate", "--model", "I", "--p", "4", "--reps", "1", "--methods", "sir", "--out"]).arg(dir.path()));
    assert_eq!(small_p.status.code(), Some(4), "{}", stderr(&small_p));
    let bad_flag = run(xsdr().args(["simulate", "--bogus"]));
    assert_eq!(bad_flag.status.code(), Some(4));
}

#[test]
fn order_single_permutation_pvalues() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 60, 3, 4, |x, e| x[0] + 0.2 * e);
    let out = dir.path().join("o");
    let o = run(xsdr().arg("order").arg(&data).args(["--response", "y", "--method", "dr", "--B", "1", "--out"]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("order.json"));
    for step in report["steps"].as_array().unwrap() {
        let p = step["pvalue"].as_f64().unwrap();
        assert!(p == 0.0 || p == 1.0);
    }
}

#[test]
fn order_linear_response_gives_one() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 100, 4, 5, |x, _| x[0]);
    let out = dir.path().join("o");
    let o = run(xsdr().arg("order").arg(&data).args([
        "--response", "y", "--method", "mea-dr", "--lambda", "0.01", "--alpha", "0.1", "--B", "200", "--seed", "3", "--out",
    ]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("order.json"));
    assert_eq!(report["d_hat"], 1);
    assert_eq!(report["steps"].as_array().unwrap().len(), 2);
    assert!(json(&out.join("manifest.json"))["options"]["alpha"].as_f64().unwrap() == 0.1);
}

#[test]
fn plot_expectiles_toy_model() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 100, 2, 6, |x, e| x[0] * e);
    let out = dir.path().join("p");
    let o = run(xsdr().arg("plot-expectiles").arg(&data).args([
        "--response", "y", "--method", "ea-sir", "--H", "5", "--N", "100", "--lambda", "0.1", "--taus", "0.2,0.5,0.8",
        "--svg", "--out",
    ]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,b1x,y,f_0.2,f_0.5,f_0.8");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.windows(2).all(|w| w[0][1] <= w[1][1]));
    let mean = |c: usize| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
    assert!(mean(3) < mean(4) && mean(4) < mean(5));
    assert!(fs::read_to_string(out.join("curves.svg")).unwrap().contains("<polyline"));
    assert_eq!(json(&out.join("manifest.json"))["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn loocv_reports_each_tau() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), 30, 3, 7, |x, e| x[0] + x[0] * e);
    let out = dir.path().join("l");
    let o = run(xsdr().arg("loocv").arg(&data).args([
        "--response", "y", "--method", "dr", "--H", "2", "--taus", "0.2,0.5", "--out",
    ]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("loocv.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,delta");
    assert_eq!(lines.len(), 3);
    let bad = run(xsdr().arg("loocv").arg(&data).args(["--response", "y", "--taus", "1.5", "--out"]).arg(&out));
    assert_eq!(bad.status.code(), Some(4));
}
