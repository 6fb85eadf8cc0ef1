use std::path::Path;
use std::process::{Command, Output};

use mindiv::simlab::fmt_sig;
use mindiv::{DivergenceKind, FinitePmf};

fn mindiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mindiv")).args(args).env_remove("GAMMA_DIV_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn logistic_csv() -> String {
    let mut s = String::from("y,x1,x2\n");
    for i in 0..120 {
        let a = ((i * 37) % 23) as f64 / 5.0 - 2.2;
        let b = ((i * 11) % 17) as f64 / 4.0 - 2.0;
        // deterministic but not separable
        let y = if a - 0.5 * b + if i % 5 == 0 { 2.5 } else { -0.3 } > 0.0 { 1 } else { 0 };
        s.push_str(&format!("{y},{a},{b}\n"));
    }
    s
}

#[test]
fn poisson_gamma_divergence_matches_summation() {
    let out = stdout(&mindiv(&["divergence", "--kind", "gamma", "--gamma", "0.5", "--poisson", "2", "1"]));
    let p = FinitePmf::poisson(2.0, 150).unwrap();
    let q = FinitePmf::poisson(1.0, 150).unwrap();
    let oracle = mindiv::divergence::divergence(&p, &q, DivergenceKind::Gamma(0.5)).unwrap();
    let printed: f64 = out.trim().parse().unwrap();
    assert!((printed - oracle).abs() < 1e-6 * oracle, "{printed} vs {oracle}");
    assert_eq!(out.trim(), fmt_sig(oracle));
}

#[test]
fn categorical_divergence_and_json() {
    let out = stdout(&mindiv(&["divergence", "--kind", "kl", "--p", "0.2,0.8", "--q", "0.5,0.5", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let oracle = 0.2 * (0.4f64).ln() + 0.8 * (1.6f64).ln();
    assert!((v["divergence"].as_f64().unwrap() - oracle).abs() < 1e-6);
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = mindiv(&["simulate", "normal-mixture", "--reps", "300", "--seed", "42", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn simulate_independent_of_thread_cap() {
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_mindiv"))
            .args(["simulate", "logistic-case-control", "--reps", "12"])
            .env("GAMMA_DIV_THREADS", threads)
            .output()
            .unwrap();
        stdout(&o)
    };
    assert_eq!(run("1"), run("3"));
    let bad = Command::new(env!("CARGO_BIN_EXE_mindiv"))
        .args(["simulate", "normal-mixture", "--reps", "2"])
        .env("GAMMA_DIV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn bm_bench_times_are_positive() {
    let out = stdout(&mindiv(&["bm", "bench", "--dims", "5..10", "--n", "100"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("d,N,t_nll_ms,t_gm_ms"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 6);
    for (r, d) in rows.iter().zip(5..) {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], d.to_string());
        assert_eq!(f[1], "100");
        assert!(f[2].parse::<f64>().unwrap() > 0.0);
        assert!(f[3].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "y,x1,x2\n1,0.5,0.1\n0,0.2,oops\n");
    let o = mindiv(&["fit", "--family", "bernoulli", "--data", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2"), "{err}");
    assert!(err.contains("column 3 (x2)"), "{err}");
    assert!(err.contains("oops"), "{err}");

    let ragged = write(dir.path(), "ragged.csv", "y,x1\n1,0.5\n0\n");
    let o = mindiv(&["fit", "--family", "normal", "--data", &ragged]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    let no_y = write(dir.path(), "noy.csv", "x1,x2\n1,0.5\n");
    assert_eq!(mindiv(&["fit", "--family", "normal", "--data", &no_y]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mindiv(&["fit", "--family", "normal"]).status.code(), Some(1));
    assert_eq!(mindiv(&["divergence", "--kind", "kl", "--bogus", "1"]).status.code(), Some(1));
    assert_eq!(mindiv(&["simulate", "no-such-scenario"]).status.code(), Some(1));
    assert_eq!(mindiv(&["divergence", "--kind", "gamma", "--poisson", "2", "1"]).status.code(), Some(1));
    assert_eq!(mindiv(&["divergence", "--kind", "kl", "--p", "0.5,0.6", "--q", "0.5,0.5"]).status.code(), Some(1));
    let help = mindiv(&["fit", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("`y` column first"));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut sep = String::from("y,x1\n");
    for i in 0..40 {
        let x = i as f64 / 10.0 - 2.0 + 0.05;
        sep.push_str(&format!("{},{x}\n", (x > 0.0) as i32));
    }
    let sep = write(dir.path(), "sep.csv", &sep);
    let out = dir.path().join("m.json");
    let o = mindiv(&["fit", "--family", "bernoulli", "--data", &sep, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = mindiv(&["divergence", "--kind", "kl", "--poisson", "1e308", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &logistic_csv());
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    let o = mindiv(&["fit", "--family", "bernoulli", "--estimator", "gamma", "--gamma", "0.3", "--data", &data, "--out", m]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(doc["label"], "gamma(0.3)");
    let theta: Vec<f64> = serde_json::from_value(doc["fit"]["theta"].clone()).unwrap();
    assert_eq!(theta.len(), 3);

    let out = stdout(&mindiv(&["predict", "--model", m, "--data", &data]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("row,y,prediction"));
    let text = logistic_csv();
    for (line, row) in lines.zip(text.lines().skip(1)) {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        let eta = theta[0] + theta[1] * v[1] + theta[2] * v[2];
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], fmt_sig(v[0]));
        assert_eq!(f[2].parse::<f64>().unwrap(), if eta > 0.0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn boost_train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pm = logistic_csv().replace("\n0,", "\n-1,");
    let data = write(dir.path(), "pm.csv", &pm);
    let model = dir.path().join("e.json");
    let m = model.to_str().unwrap();
    assert!(mindiv(&["boost", "train", "--data", &data, "--rounds", "15", "--out", m]).status.success());
    let acc = stdout(&mindiv(&["boost", "eval", "--model", m, "--data", &data]));

    let rows: Vec<Vec<f64>> =
        pm.lines().skip(1).map(|r| r.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    let y = rows.iter().map(|r| r[0] as i32).collect();
    let x = rows.iter().map(|r| r[1..].to_vec()).collect();
    let d = mindiv::boosting::LabeledData::new(x, y).unwrap();
    let direct = mindiv::boosting::train_adaboost(&d, 15).unwrap().accuracy(&d);
    assert_eq!(acc.trim(), fmt_sig(direct));

    // a GLM model is not a boosting model
    let glm = dir.path().join("g.json");
    let data01 = write(dir.path(), "d.csv", &logistic_csv());
    assert!(mindiv(&["fit", "--family", "bernoulli", "--data", &data01, "--out", glm.to_str().unwrap()]).status.success());
    assert_eq!(mindiv(&["boost", "eval", "--model", glm.to_str().unwrap(), "--data", &data]).status.code(), Some(1));
}

#[test]
fn ppp_simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("ppp.csv");
    assert!(mindiv(&["ppp", "simulate", "--eps", "0", "--out", sim.to_str().unwrap()]).status.success());
    let from_file = stdout(&mindiv(&["ppp", "fit", "--estimator", "ml", "--data", sim.to_str().unwrap()]));
    let direct = stdout(&mindiv(&["ppp", "fit", "--estimator", "ml", "--eps", "0"]));
    let a: serde_json::Value = serde_json::from_str(&from_file).unwrap();
    let b: serde_json::Value = serde_json::from_str(&direct).unwrap();
    let ta: Vec<f64> = serde_json::from_value(a["fit"]["theta"].clone()).unwrap();
    let tb: Vec<f64> = serde_json::from_value(b["fit"]["theta"].clone()).unwrap();
    // the file round-trips sites and weights through 6 significant digits
    for (x, y) in ta.iter().zip(&tb) {
        assert!((x - y).abs() < 1e-3, "{ta:?} vs {tb:?}");
    }
}

#[test]
fn similarity_and_active_tables() {
    let cos: f64 = stdout(&mindiv(&["similarity", "cos", "--x", "1,2,3", "--y", "2,4,6"])).trim().parse().unwrap();
    assert!((cos - 1.0).abs() < 1e-6);
    let out = stdout(&mindiv(&["similarity", "table", "--sigma2", "0.05", "--pairs", "1:1", "--reps", "20", "--d", "50"]));
    assert!(out.starts_with("kind,sigma2,beta,gamma,mean,sd\nproportional,0.05,1,1,"));
    let out = stdout(&mindiv(&["active", "--rounds", "2", "--pool", "50", "--test", "100"]));
    assert_eq!(out.lines().count(), 3);
    assert!(out.starts_with("round,chosen,acquisition,test_accuracy,random_accuracy\n"));
}

#[test]
fn bm_fit_reads_binary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = String::from("s1,s2\n");
    for i in 0..50 {
        s.push_str(if i % 3 == 0 { "1,-1\n" } else if i % 3 == 1 { "1,1\n" } else { "-1,-1\n" });
    }
    let p = write(dir.path(), "bm.csv", &s);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&mindiv(&["bm", "fit", "--data", &p]))).unwrap();
    assert_eq!(doc["fit"]["status"], "Converged");
    let bad = write(dir.path(), "bad.csv", "s1,s2\n1,0.5\n");
    assert_eq!(mindiv(&["bm", "fit", "--data", &bad]).status.code(), Some(1));
}
