use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ellipse-minimax"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn solve_circle() {
    let cfg = configs().join("circle.toml");
    let (code, out, _) = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["eps_u_sq"].as_f64().unwrap() - 1.6).abs() < 1e-9);
    assert_eq!(v["k_u"], 100);
    assert!(v["eps_l"].as_f64().unwrap() <= v["eps_u"].as_f64().unwrap());
}

#[test]
fn solve_boundary_reports_t_star() {
    let cfg = configs().join("boundary.toml");
    let (code, out, _) = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    let t = &v["t_star"];
    assert!(t["t_u"].as_f64().unwrap() > t["t_l"].as_f64().unwrap());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[ellipse\n").unwrap();
    assert_eq!(run(&["solve", "--config", bad.to_str().unwrap()]).0, 2);
    assert_eq!(run(&["solve", "--config", "/nonexistent.toml"]).0, 2);
    let cfg = configs().join("sobolev.toml");
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["mc", "--config", c, "--trials", "0"]).0, 2);
    let (code, _, err) = run(&["sweep", "--config", c, "--sweep-lo", "0.01", "--sweep-hi", "0.02", "--sweep-points", "2"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(run(&["frobnicate"]).0, 2);
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("far.toml");
    std::fs::write(&cfg, "sigma = 0.1\n[ellipse]\nfamily = \"explicit\"\nmu = [1.0, 0.5]\n").unwrap();
    // no point of the ellipse lies 5 away from the origin
    let (code, _, err) = run(&["mc", "--config", cfg.to_str().unwrap(), "--eps", "5", "--trials", "10"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn mc_is_reproducible_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sobolev.toml");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let (code, _, err) = run(&["mc", "--config", cfg.to_str().unwrap(), "--trials", "4000", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let v = json(&ta);
    assert!(v["c0"].as_f64().unwrap() >= v["c0_floor"].as_f64().unwrap());
    assert!(v["estimate"]["type1"].as_f64().unwrap() <= 0.125);
}

#[test]
fn mc_certificate_below_lower_radius() {
    let cfg = configs().join("sobolev.toml");
    let c = cfg.to_str().unwrap();
    let (_, out, _) = run(&["solve", "--config", c]);
    let r = json(&out)["theorem2_radius"].as_f64().unwrap();
    let eps = format!("{:e}", r / 2.0);
    let (code, out, err) = run(&["mc", "--config", c, "--certificate", "--eps", &eps, "--trials", "100"]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    assert!(v["certificate"]["bound"].as_f64().unwrap() >= 0.5);
}

#[test]
fn sweep_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = configs().join("sobolev.toml");
    let (code, _, err) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("sigma,sigma_sq,eps_u,eps_u_sq,eps_l,k_u,k_l,residual"));
    let summary = json(&std::fs::read_to_string(dir.path().join("sweep.csv.json")).unwrap());
    assert_eq!(summary["predicted_exponent"].as_f64().unwrap(), 0.8);

    let cfg = configs().join("boundary.toml");
    let (code, out, _) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["predicted_exponent"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-12);
    assert!((v["fitted_exponent"].as_f64().unwrap() - 8.0 / 9.0).abs() < 0.05);
}

#[test]
fn widths_table() {
    let cfg = configs().join("sobolev.toml");
    let (code, out, _) = run(&["widths", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut rows = out.lines();
    assert_eq!(rows.next().unwrap(), "k,eps,lower,upper,method");
    for line in rows {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], f[3], "origin widths are exact: {line}");
    }

    let cfg = configs().join("tiny.toml");
    let (code, out, _) = run(&["widths", "--config", cfg.to_str().unwrap(), "--brute"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k,eps,lower,upper,method,brute");
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[0], "6");
    assert_eq!(last[3].parse::<f64>().unwrap(), 0.0);
    for line in &lines[1..] {
        let f: Vec<f64> = line.split(',').filter_map(|x| x.parse().ok()).collect();
        let (lower, upper, brute) = (f[2], f[3], f[4]);
        assert!(lower <= brute + 1e-6 && brute <= upper + 1e-6, "{line}");
    }
}
