use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use hopf_core::bendixson::{q2_bar, CertificateConfig};
use hopf_core::global::{trace_stable_manifold_e, BranchLabel};
use hopf_core::integrate::{integrate, time_averages, write_csv_rows};
use hopf_core::model::{equilibria, jacobian, Params, Regime, State};
use hopf_core::orbits::{find_periodic_orbit, orbit_census, OrbitConfig, PoincareSection};
use hopf_core::spectral::{classify_equilibrium, eigenvalues, hopf_point, stable_eigenvector_at_e};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{BendixsonArgs, EquilibriaArgs, ManifoldArgs, OrbitArgs, SimulateArgs, SweepArgs, VerifyArgs};
use crate::failure::Failure;
use crate::verify::{run_suite, SuiteOptions};

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, &text)?;
    Ok(text)
}

fn write_csv(path: &Path, rows: impl IntoIterator<Item = (f64, State)>) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

fn complex_pairs(c: &[num_complex::Complex64]) -> Vec<[f64; 2]> {
    c.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize)]
struct SimulationSummary {
    params: Params,
    regime: Regime,
    initial_state: State,
    t_end: f64,
    final_state: State,
    final_norm: f64,
    tail_window: [f64; 2],
    tail_averages: [f64; 3],
    accepted_steps: usize,
    rejected_steps: usize,
    clamp_count: usize,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    let cfg = a.common.integrator()?;
    let s0 = State::new(a.x0, a.y0, a.z0)?;
    if !(a.t_end > 0.0) {
        return Err(Failure::Config("--t-end must be positive".into()));
    }
    let t0 = a.tail_start.unwrap_or(a.t_end / 2.0);
    if !(t0 >= 0.0 && t0 < a.t_end) {
        return Err(Failure::Config("--tail-start must lie in [0, t_end)".into()));
    }
    let tr = integrate(&p, s0, a.t_end, &cfg)?;
    let d = tr.diagnostics();
    let summary = SimulationSummary {
        params: p,
        regime: p.regime(),
        initial_state: s0,
        t_end: a.t_end,
        final_state: tr.last(),
        final_norm: tr.last().norm(),
        tail_window: [t0, a.t_end],
        tail_averages: time_averages(&tr, t0, a.t_end)?,
        accepted_steps: d.accepted_steps,
        rejected_steps: d.rejected_steps,
        clamp_count: d.clamp_count,
    };
    out_dir(&a.common.out_dir)?;
    write_csv(&a.common.out_dir.join("trajectory.csv"), tr.samples())?;
    print!("{}", write_json(&a.common.out_dir.join("summary.json"), &summary)?);
    Ok(())
}

pub fn equilibria_cmd(a: &EquilibriaArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    let mut list = Vec::new();
    for e in equilibria(&p) {
        let c = classify_equilibrium(&p, &e)?;
        list.push(json!({
            "state": e,
            "stability": c.stability,
            "eigenvalues": complex_pairs(&c.spectrum.roots),
            "char_poly": [c.char_poly.c2, c.char_poly.c1, c.char_poly.c0],
            "routh_hurwitz_stable": c.routh_hurwitz_stable,
        }));
    }
    let (k_h, omega) = hopf_point(p.k3(), p.k5())?;
    let doc = json!({
        "params": p,
        "regime": p.regime(),
        "hopf_threshold": k_h,
        "hopf_frequency": omega,
        "equilibria": list,
    });
    out_dir(&a.common.out_dir)?;
    print!("{}", write_json(&a.common.out_dir.join("equilibria.json"), &doc)?);
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    let opts = SuiteOptions {
        seed: a.common.seed,
        census_starts: a.census_starts,
        integrator: a.common.integrator()?,
        timing: a.timing,
    };
    let suite = run_suite(&p, &opts);
    out_dir(&a.common.out_dir)?;
    print!("{}", write_json(&a.common.out_dir.join("verify.json"), &suite)?);
    if suite.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.pass).map(|c| c.check_name.as_str()).collect();
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Default)]
struct SweepRow {
    k: f64,
    regime: String,
    max_re: Option<f64>,
    period: Option<f64>,
    amplitude: Option<f64>,
    census: Option<usize>,
    error: String,
}

fn sweep_point(k: f64, k3: f64, k5: f64, census_starts: usize) -> SweepRow {
    let mut row = SweepRow { k, ..Default::default() };
    let p = match Params::new(k, k3, k5) {
        Ok(p) => p,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    row.regime = p.regime().as_str().to_string();
    if k > 0.0 {
        row.max_re = Some(eigenvalues(&jacobian(&p, &p.interior_equilibrium())).max_real_part());
    }
    if p.regime() == Regime::Oscillatory {
        let cfg = OrbitConfig::default();
        match find_periodic_orbit(&p, None, &cfg) {
            Ok(o) => {
                row.period = Some(o.period);
                row.amplitude = Some(o.amplitude_x());
            }
            Err(e) => row.error = e.to_string(),
        }
        if census_starts > 0 {
            match orbit_census(&p, census_starts, 1e-3, &cfg) {
                Ok(c) => row.census = Some(c.orbits.len()),
                Err(e) if row.error.is_empty() => row.error = e.to_string(),
                Err(_) => {}
            }
        }
    }
    row
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    if !(a.k_step > 0.0) || !(a.k_max >= a.k_min) || !a.k_min.is_finite() || !a.k_max.is_finite() {
        return Err(Failure::Config("need k_min <= k_max and k_step > 0".into()));
    }
    Params::new(1.0, a.k3, a.k5)?;
    let n = ((a.k_max - a.k_min) / a.k_step + 1e-9).floor() as usize;
    let ks: Vec<f64> = (0..=n).map(|i| a.k_min + i as f64 * a.k_step).collect();
    let rows: Vec<SweepRow> = ks.par_iter().map(|&k| sweep_point(k, a.k3, a.k5, a.census_starts)).collect();
    let mut text = String::from("k,regime,max_re_eig_E,orbit_period,orbit_amplitude_x,census_count,error\n");
    for r in &rows {
        text.push_str(&format!(
            "{:.16e},{},{},{},{},{},{}\n",
            r.k,
            r.regime,
            opt(r.max_re),
            opt(r.period),
            opt(r.amplitude),
            r.census.map(|c| c.to_string()).unwrap_or_default(),
            r.error.replace([',', '\n'], ";"),
        ));
    }
    out_dir(&a.common.out_dir)?;
    fs::write(a.common.out_dir.join("sweep.csv"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn manifold(a: &ManifoldArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    if p.regime() != Regime::Oscillatory {
        return Err(Failure::Config(format!(
            "the one-dimensional stable manifold of E needs k > k3 + k5 = {}; got k = {} ({})",
            p.hopf_threshold(),
            p.k(),
            p.regime()
        )));
    }
    let cfg = hopf_core::integrate::IntegratorConfig::with_tolerances(1e-12, 1e-16);
    let pair = stable_eigenvector_at_e(&p)?;
    let (upper, lower) = trace_stable_manifold_e(&p, a.delta, &cfg)?;
    out_dir(&a.common.out_dir)?;
    let mut branches = Vec::new();
    for b in [&upper, &lower] {
        let name = match b.label {
            BranchLabel::Upper => "p_u",
            BranchLabel::Lower => "p_l",
        };
        write_csv(&a.common.out_dir.join(format!("{name}.csv")), b.trajectory.dense_samples(4))?;
        branches.push(json!({
            "label": name,
            "endpoint": b.endpoint,
            "time_to_e": b.trajectory.t_end(),
            "audit": b.audit,
        }));
    }
    let doc = json!({
        "params": p,
        "delta": a.delta,
        "stable_eigenvalue": pair.eigenvalue,
        "stable_eigenvector": pair.vector,
        "branches": branches,
    });
    print!("{}", write_json(&a.common.out_dir.join("manifold.json"), &doc)?);
    if upper.audit.pass && lower.audit.pass {
        Ok(())
    } else {
        Err(Failure::Verification("stable manifold audit failed".into()))
    }
}

pub fn orbit(a: &OrbitArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    let cfg = OrbitConfig::default();
    let guess = a.guess.as_ref().map(|g| PoincareSection::new(&p).lift(g[0], g[1]));
    let o = find_periodic_orbit(&p, guess, &cfg)?;
    let mut doc = o.to_json();
    let Value::Object(map) = &mut doc else { unreachable!("orbit json is an object") };
    map.insert("fixed_point_residual".into(), json!(o.fixed_point_residual));
    map.insert("time_averages".into(), json!(o.averages));
    map.insert("liouville".into(), json!(o.liouville));
    if a.census > 0 {
        let c = orbit_census(&p, a.census, 1e-3, &cfg)?;
        map.insert("census_count".into(), json!(c.orbits.len()));
        map.insert("census_converged".into(), json!(c.converged));
    }
    out_dir(&a.common.out_dir)?;
    write_csv(&a.common.out_dir.join("orbit.csv"), o.samples(a.samples, &cfg)?)?;
    print!("{}", write_json(&a.common.out_dir.join("orbit.json"), &doc)?);
    Ok(())
}

pub fn bendixson(a: &BendixsonArgs) -> Result<(), Failure> {
    let p = a.params.resolve()?;
    let cc = CertificateConfig {
        epsilon: a.epsilon,
        horizon: a.horizon,
        grid_per_axis: a.grid,
        eta: a.eta,
        ..Default::default()
    };
    let c = q2_bar(&p, &cc, &a.common.integrator()?)?;
    out_dir(&a.common.out_dir)?;
    print!("{}", write_json(&a.common.out_dir.join("certificate.json"), &c.to_json())?);
    if c.pass {
        Ok(())
    } else {
        Err(Failure::Verification(format!("q2_bar = {} is not below -{}", c.q2_bar, c.margin_floor)))
    }
}
