//! The regime-dependent check suite behind `verify`.

use std::time::Instant;

use hopf_core::bendixson::{q2_bar, CertificateConfig};
use hopf_core::global::{
    absorption_check, attractor_bound, interior_grid, invariant_box_default, persistence_floor,
    trace_stable_manifold_e, trace_unstable_manifold_origin, verify_forward_invariance, BranchLabel, ManifoldLimit,
};
use hopf_core::integrate::{integrate, IntegratorConfig};
use hopf_core::model::{jacobian, Params, Regime, State};
use hopf_core::orbits::{find_periodic_orbit, orbit_census, OrbitConfig, PeriodicOrbit};
use hopf_core::report::VerificationSuite;
use hopf_core::sampling::{seeded_rng, uniform_box};
use hopf_core::spectral::eigenvalues;
use hopf_core::{Result, VerificationReport};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    pub census_starts: usize,
    pub integrator: IntegratorConfig,
    pub timing: bool,
}

/// Tolerances for manifold tracing, where solutions pass close to `E` and to the faces.
fn manifold_integrator() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-16)
}

fn run_check(name: &str, p: &Params, f: impl FnOnce() -> Result<VerificationReport>) -> VerificationReport {
    let start = Instant::now();
    match f() {
        Ok(r) => r.with_runtime(start),
        Err(e) => VerificationReport::errored(name, *p, e).with_runtime(start),
    }
}

fn random_starts(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<State> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| uniform_box(&mut rng, lo, hi)).collect()
}

fn max_final<F: Fn(&State) -> f64 + Sync>(
    p: &Params,
    starts: &[State],
    t: f64,
    cfg: &IntegratorConfig,
    f: F,
) -> Result<f64> {
    let finals: Vec<Result<f64>> = starts.par_iter().map(|s| Ok(f(&integrate(p, *s, t, cfg)?.last()))).collect();
    finals.into_iter().try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}

pub fn run_suite(p: &Params, opts: &SuiteOptions) -> VerificationSuite {
    let regime = p.regime();
    let cfg = opts.integrator;
    let mut checks = Vec::new();
    match regime {
        Regime::GlobalDecay => {
            checks.push(run_check("origin_spectrum", p, || {
                // eigenvalues of Df(0) are k, -k3, -k5
                let s = eigenvalues(&jacobian(p, &State::ORIGIN));
                Ok(VerificationReport::at_most("origin_spectrum", *p, s.max_real_part(), 0.0, 0.0))
            }));
            checks.push(run_check("decay_to_origin", p, || {
                let starts = random_starts(opts.seed, 10, 1e-3, 10.0);
                // at k = 0 the decay is algebraic, like 1/t
                let (t, bound) = if p.k() < 0.0 { (200.0, 1e-6) } else { (1e6, 1e-5) };
                let worst = max_final(p, &starts, t, &cfg, State::norm)?;
                Ok(VerificationReport::at_most("decay_to_origin", *p, worst, bound, 0.0)
                    .with_detail(format!("max final norm over {} starts at t = {t}", starts.len())))
            }));
        }
        _ => {
            let m = attractor_bound(p).expect("k > 0");
            checks.push(run_check("equilibrium_spectrum", p, || {
                let s = eigenvalues(&jacobian(p, &p.interior_equilibrium()));
                let re = s.max_real_part();
                Ok(match regime {
                    Regime::StableInterior => {
                        VerificationReport::new("equilibrium_spectrum", *p, re, 0.0, 0.0, re < 0.0)
                    }
                    Regime::Oscillatory => VerificationReport::new("equilibrium_spectrum", *p, re, 0.0, 0.0, re > 0.0),
                    _ => VerificationReport::close_to("equilibrium_spectrum", *p, re, 0.0, 1e-8),
                }
                .with_detail("largest real part of the spectrum at E"))
            }));
            checks.push(run_check("attractor_absorption", p, || {
                let starts = random_starts(opts.seed, 20, 0.0, 10.0 * m);
                let a = absorption_check(p, &starts, 400.0, &cfg)?;
                Ok(VerificationReport::at_most("attractor_absorption", *p, a.worst_entry_time, a.horizon / 2.0, 0.0)
                    .with_detail(format!("latest exit from [0, M + 1e-6]^3 with M = {m}")))
            }));
            checks.push(run_check("box_forward_invariance", p, || {
                let b = invariant_box_default(p)?;
                verify_forward_invariance(p, &b, 1000, 50.0, &cfg, opts.seed)
            }));
            let start = Instant::now();
            let persistence = persistence_floor(p, &interior_grid(1e-3, m, 5), 1000.0, &cfg);
            checks.push(
                match &persistence {
                    Ok(est) => est.report(p),
                    Err(e) => VerificationReport::errored("uniform_persistence", *p, e),
                }
                .with_runtime(start),
            );
            match regime {
                Regime::StableInterior => stable_interior_checks(p, opts, persistence.ok().map(|e| e.eta), &mut checks),
                Regime::Oscillatory => oscillatory_checks(p, opts, &mut checks),
                _ => {}
            }
        }
    }
    let mut suite = VerificationSuite::new(*p, regime, opts.seed, checks);
    if !opts.timing {
        suite.strip_timings();
    }
    suite
}

fn stable_interior_checks(p: &Params, opts: &SuiteOptions, eta: Option<f64>, checks: &mut Vec<VerificationReport>) {
    let cfg = opts.integrator;
    let e = p.interior_equilibrium();
    checks.push(run_check("convergence_to_e", p, || {
        let m = attractor_bound(p)?;
        let starts = random_starts(opts.seed, 10, 1e-3, m);
        let worst = max_final(p, &starts, 1000.0, &cfg, |s| s.distance(&e))?;
        Ok(VerificationReport::at_most("convergence_to_e", *p, worst, 1e-6, 0.0)
            .with_detail("max distance to E at t = 1000 over 10 interior starts"))
    }));
    checks.push(run_check("bendixson_certificate", p, || {
        let start = Instant::now();
        let cc = CertificateConfig { eta, ..Default::default() };
        Ok(q2_bar(p, &cc, &cfg)?.report(start))
    }));
    checks.push(run_check("unstable_manifold_of_origin", p, || {
        let w = trace_unstable_manifold_origin(p, 1e-7, &manifold_integrator())?;
        let d = match w.limit {
            ManifoldLimit::Equilibrium { distance, .. } => distance,
            ManifoldLimit::Cycle { .. } => f64::INFINITY,
        };
        Ok(VerificationReport::at_most("unstable_manifold_of_origin", *p, d, 1e-6, 0.0)
            .with_detail("distance to E where the traced branch stops"))
    }));
}

fn orbit_reports(p: &Params, o: &PeriodicOrbit) -> Vec<VerificationReport> {
    let avg_err = o.averages.iter().map(|a| (a - p.k()).abs()).fold(0.0, f64::max);
    vec![
        VerificationReport::at_most("orbit_closure", *p, o.fixed_point_residual, 1e-9, 0.0)
            .with_detail(format!("period {}", o.period)),
        VerificationReport::close_to("trivial_multiplier", *p, (o.trivial_multiplier() - 1.0).norm(), 0.0, 1e-6),
        VerificationReport::new(
            "orbit_stability",
            *p,
            o.max_nontrivial_modulus(),
            1.0,
            0.0,
            o.max_nontrivial_modulus() < 1.0,
        )
        .with_detail("largest nontrivial Floquet multiplier modulus"),
        VerificationReport::at_most("floquet_liouville", *p, o.liouville.relative_error, 1e-6, 0.0),
        VerificationReport::at_most("orbit_time_averages", *p, avg_err, 1e-6, 0.0)
            .with_detail("max |average - k| over one period"),
        VerificationReport::new("orbit_interior", *p, o.min_component, 0.0, 0.0, o.min_component > 0.0),
    ]
}

fn oscillatory_checks(p: &Params, opts: &SuiteOptions, checks: &mut Vec<VerificationReport>) {
    let ocfg = OrbitConfig::default();
    let start = Instant::now();
    let orbit = find_periodic_orbit(p, None, &ocfg);
    match &orbit {
        Ok(o) => checks.extend(orbit_reports(p, o).into_iter().map(|r| r.with_runtime(start))),
        Err(e) => checks.push(VerificationReport::errored("periodic_orbit", *p, e).with_runtime(start)),
    }

    let start = Instant::now();
    match trace_stable_manifold_e(p, 1e-7, &manifold_integrator()) {
        Ok((upper, lower)) => {
            for b in [upper, lower] {
                let name = match b.label {
                    BranchLabel::Upper => "stable_manifold_p_u",
                    BranchLabel::Lower => "stable_manifold_p_l",
                };
                let a = b.audit;
                checks.push(
                    VerificationReport::new(name, *p, a.terminal_distance, 1e-8, 0.0, a.pass)
                        .with_detail(format!(
                            "endpoint ({}, {}, {}), monotonicity violation {:e}, box violation {:e}, endpoint ok {}",
                            b.endpoint.x,
                            b.endpoint.y,
                            b.endpoint.z,
                            a.monotonicity_violation,
                            a.box_violation,
                            a.endpoint_ok
                        ))
                        .with_runtime(start),
                );
            }
        }
        Err(e) => checks.push(VerificationReport::errored("stable_manifold", *p, e).with_runtime(start)),
    }

    checks.push(run_check("unstable_manifold_connection", p, || {
        let w = trace_unstable_manifold_origin(p, 1e-7, &manifold_integrator())?;
        let ManifoldLimit::Cycle { section_point, .. } = w.limit else {
            return Ok(VerificationReport::errored("unstable_manifold_connection", *p, "branch settled on E"));
        };
        let gap = match &orbit {
            Ok(o) => section_point.distance(&o.section_point),
            Err(_) => f64::NAN,
        };
        let pass = gap <= 1e-4 && w.tail_min_distance_to_e > 0.1;
        Ok(VerificationReport::new("unstable_manifold_connection", *p, gap, 1e-4, 0.0, pass)
            .with_detail(format!("limit section point vs orbit; tail distance to E {}", w.tail_min_distance_to_e)))
    }));

    if opts.census_starts > 0 {
        checks.push(run_check("orbit_census", p, || {
            let c = orbit_census(p, opts.census_starts, 1e-3, &ocfg)?;
            let n = c.orbits.len() as f64;
            Ok(VerificationReport::new("orbit_census", *p, n, 1.0, 0.0, n >= 1.0).with_detail(format!(
                "{} distinct orbits from {} seeds ({} converged); the count is evidence, not a proof of uniqueness",
                c.orbits.len(),
                c.n_starts,
                c.converged
            )))
        }));
    }
}
