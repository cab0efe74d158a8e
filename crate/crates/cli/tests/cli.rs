use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hopf-verifier"));
    c.env_remove("HOPF_VERIFIER_JOBS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn simulate_oscillatory_tail_averages() {
    let d = TempDir::new().unwrap();
    let o = run(
        &["simulate", "--k", "3", "--k3", "1", "--k5", "1", "--x0", "1", "--y0", "1.5", "--z0", "2", "--t-end", "200"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&d.path().join("summary.json"));
    for a in s["tail_averages"].as_array().unwrap() {
        assert!((f(a) - 3.0).abs() < 0.1, "{s}");
    }
    let text = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,x,y,z\n"));
    assert!(!text.contains('\r'));
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, [0.0, 1.0, 1.5, 2.0]);
}

#[test]
fn simulate_decay_and_invariant_face() {
    let d = TempDir::new().unwrap();
    let o = run(&["simulate", "--k", "-1", "--k3", "1", "--k5", "1", "--x0", "2", "--y0", "1", "--z0", "3"], d.path());
    assert!(o.status.success());
    assert!(f(&json(&d.path().join("summary.json"))["final_norm"]) < 1e-6);

    let o = run(
        &["simulate", "--k", "3", "--k3", "1", "--k5", "1", "--x0", "0", "--y0", "2", "--z0", "4", "--t-end", "50"],
        d.path(),
    );
    assert!(o.status.success());
    let rows = csv_rows(&d.path().join("trajectory.csv"));
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
    let last = rows.last().unwrap();
    assert!(last[2].parse::<f64>().unwrap() < 1e-10 && last[3].parse::<f64>().unwrap() < 1e-10);
}

#[test]
fn original_rate_constants_are_scaled() {
    let d = TempDir::new().unwrap();
    let o = run(&["equilibria", "--k1", "1", "--k2", "2", "--k3", "1", "--k4", "1", "--k5", "1", "--a", "4"], d.path());
    assert!(o.status.success());
    let e = json(&d.path().join("equilibria.json"));
    assert_eq!(f(&e["params"]["k"]), 3.0);
    assert_eq!(e["regime"], "oscillatory");
    assert_eq!(f(&e["hopf_threshold"]), 2.0);
    assert_eq!(e["equilibria"].as_array().unwrap().len(), 2);
    assert_eq!(e["equilibria"][1]["stability"], "unstable");
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let code = |args: &[&str]| run(args, d.path()).status.code();
    assert_eq!(code(&["equilibria", "--k", "1", "--k3", "-1", "--k5", "1"]), Some(2));
    assert_eq!(code(&["equilibria", "--k", "1", "--k3", "1"]), Some(2));
    assert_eq!(code(&["equilibria", "--k", "1", "--k1", "1", "--k3", "1", "--k5", "1"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["manifold", "--k", "1.5", "--k3", "1", "--k5", "1"]), Some(2));
    assert_eq!(code(&["bendixson", "--k", "3", "--k3", "1", "--k5", "1"]), Some(2));
    assert_eq!(code(&["orbit", "--k", "1", "--k3", "1", "--k5", "1"]), Some(2));
    assert_eq!(code(&["simulate", "--k", "1", "--k3", "1", "--k5", "1", "--rtol", "0"]), Some(2));
    // too few steps to reach t_end
    assert_eq!(code(&["simulate", "--k", "3", "--k3", "1", "--k5", "1", "--t-end", "1e9"]), Some(3));
    // a horizon too short for convergence makes the certificate fail
    assert_eq!(
        code(&["bendixson", "--k", "1.9", "--k3", "1", "--k5", "1", "--horizon", "2", "--grid", "2", "--eta", "0.01"]),
        Some(1)
    );
}

#[test]
fn verify_decay_regime_runs_only_decay_checks() {
    let d = TempDir::new().unwrap();
    let o = run(&["verify", "--k", "-0.5", "--k3", "1", "--k5", "1"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&d.path().join("verify.json"));
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["check_name"].as_str().unwrap()).collect();
    assert_eq!(names, ["origin_spectrum", "decay_to_origin"]);
    assert_eq!(v["regime"], "global_decay");
}

#[test]
fn verify_stable_interior_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["verify", "--k", "1", "--k3", "1", "--k5", "1", "--seed", "7"];
    let oa = run(&args, a.path());
    let ob = bin().args(args).arg("--out-dir").arg(b.path()).env("HOPF_VERIFIER_JOBS", "1").output().unwrap();
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stdout));
    assert_eq!(ob.status.code(), Some(0));
    let ja = fs::read(a.path().join("verify.json")).unwrap();
    assert_eq!(ja, fs::read(b.path().join("verify.json")).unwrap());
    assert_eq!(oa.stdout, ja);
    let v: Value = serde_json::from_slice(&ja).unwrap();
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["check_name"].as_str().unwrap()).collect();
    assert!(names.contains(&"bendixson_certificate"));
    assert!(names.contains(&"convergence_to_e"));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["runtime_seconds"].is_null()));
}

#[test]
fn config_file_with_flag_override() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "# reference point\nk = 1\nk3 = 1\nk5 = 1\n").unwrap();
    let o = run(&["equilibria", "--config", cfg.to_str().unwrap(), "--k", "3"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(f(&json(&d.path().join("equilibria.json"))["params"]["k"]), 3.0);
    let o = run(&["equilibria", "--config", cfg.to_str().unwrap()], d.path());
    assert!(o.status.success());
    assert_eq!(f(&json(&d.path().join("equilibria.json"))["params"]["k"]), 1.0);
    assert_eq!(run(&["equilibria", "--config", "/nonexistent/file"], d.path()).status.code(), Some(2));
}

#[test]
fn manifold_branches() {
    for k in ["3", "2.5"] {
        let d = TempDir::new().unwrap();
        let o = run(&["manifold", "--k", k, "--k3", "1", "--k5", "1"], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let m = json(&d.path().join("manifold.json"));
        let kf: f64 = k.parse().unwrap();
        let pu = &m["branches"][0];
        assert_eq!(pu["label"], "p_u");
        let (x, y, z) = (f(&pu["endpoint"]["x"]), f(&pu["endpoint"]["y"]), f(&pu["endpoint"]["z"]));
        assert!(y == 0.0 && 0.0 < x && x < kf && kf < z);
        assert_eq!(pu["audit"]["pass"], true);
        assert_eq!(m["branches"][1]["audit"]["pass"], true);
        for name in ["p_u.csv", "p_l.csv"] {
            assert!(csv_rows(&d.path().join(name)).len() > 10);
        }
    }
}

#[test]
fn orbit_export() {
    let d = TempDir::new().unwrap();
    let o = run(&["orbit", "--k", "3", "--k3", "1", "--k5", "1", "--census", "10"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&d.path().join("orbit.json"));
    for key in ["params", "section_point", "period", "multipliers", "stability"] {
        assert!(j.get(key).is_some(), "{key}");
    }
    assert_eq!(j["stability"], "stable");
    assert_eq!(j["census_count"], 1);
    assert_eq!(j["multipliers"][0].as_array().unwrap().len(), 2);
    assert_eq!(csv_rows(&d.path().join("orbit.csv")).len(), 1000);
}

#[test]
fn bendixson_certificate_json() {
    let d = TempDir::new().unwrap();
    let o = run(&["bendixson", "--k", "1", "--k3", "1", "--k5", "1", "--epsilon", "0.125"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let c = json(&d.path().join("certificate.json"));
    assert!(f(&c["q2_bar"]) <= -0.1);
    assert_eq!(c["pass"], true);
    assert_eq!(c["n_starts"], 64);
}

#[test]
fn sweep_across_the_hopf_point() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["sweep", "--k3", "1", "--k5", "1", "--k-min", "1.5", "--k-max", "3.0", "--k-step", "0.05"];
    let o = run(&args, a.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("k,regime,max_re_eig_E,orbit_period,orbit_amplitude_x,census_count,error\n"));
    let rows = csv_rows(&a.path().join("sweep.csv"));
    assert_eq!(rows.len(), 31);
    let mut prev_sign = None;
    for r in &rows {
        let k: f64 = r[0].parse().unwrap();
        let re: f64 = r[2].parse().unwrap();
        assert!(r[6].is_empty(), "{r:?}");
        if (k - 2.0).abs() < 1e-9 {
            assert_eq!(r[1], "hopf_boundary");
            assert!(re.abs() < 1e-8);
            continue;
        }
        let osc = k > 2.0;
        assert_eq!(r[1], if osc { "oscillatory" } else { "stable_interior" });
        assert_eq!(re > 0.0, osc);
        if let Some(p) = prev_sign {
            assert!(p <= osc);
        }
        prev_sign = Some(osc);
        if osc {
            assert_eq!(r[5], "1", "{r:?}");
            assert!(r[4].parse::<f64>().unwrap() > 0.0);
        } else {
            assert!(r[3].is_empty() && r[5].is_empty());
        }
    }
    let onset: f64 = rows[11][3].parse().unwrap();
    assert!((onset - 2.0 * PI).abs() < 0.1 * 2.0 * PI, "{onset}");

    let o = bin().args(args).arg("--out-dir").arg(b.path()).arg("--jobs").arg("2").output().unwrap();
    assert!(o.status.success());
    assert_eq!(text, fs::read_to_string(b.path().join("sweep.csv")).unwrap());
}
