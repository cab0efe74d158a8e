//! Periodic orbits above the Hopf threshold: the Poincaré section `y = k`
//! crossed with `y' > 0`, the return map with its derivative, Newton
//! refinement of fixed points, Floquet multipliers and a multi-start census.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, IntegrationError, Result};
use crate::global::{attractor_bound, trace_unstable_manifold_origin, ManifoldLimit};
use crate::integrate::{
    integrate_variational, integrate_variational_with_events, integrate_with_events, time_averages, Direction,
    EventSpec, IntegratorConfig, Trajectory,
};
use crate::model::{vector_field, Component, Mat3, Params, State};
use crate::sampling::halton_box;
use crate::spectral::{eigenvalues, Stability};

/// Minimum `|y'|` accepted at a section crossing.
pub const TRANSVERSALITY: f64 = 1e-10;
const MARGINAL_BAND: f64 = 1e-6;

/// The plane `y = k`, crossed in the direction of increasing `y` (`z > y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareSection {
    level: f64,
}

impl PoincareSection {
    pub fn new(p: &Params) -> Self {
        PoincareSection { level: p.k() }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn g(&self, s: &State) -> f64 {
        s.y - self.level
    }

    /// The section point with chart coordinates `(x, z)`.
    pub fn lift(&self, x: f64, z: f64) -> State {
        State::from([x, self.level, z])
    }

    pub fn chart(&self, s: &State) -> [f64; 2] {
        [s.x, s.z]
    }

    fn event(&self) -> EventSpec {
        let level = self.level;
        EventSpec::new(move |s: &State| s.y - level, Direction::Rising, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig {
    pub integrator: IntegratorConfig,
    /// Return-map iterations before Newton.
    pub warmup_iterations: usize,
    /// Warm-up stops early once successive section points agree to this.
    pub warmup_tol: f64,
    /// Newton stops once `‖P(u) - u‖` is below this.
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    /// Longest time allowed between two section crossings.
    pub return_horizon: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            integrator: IntegratorConfig::with_tolerances(1e-12, 1e-15),
            warmup_iterations: 200,
            warmup_tol: 1e-8,
            newton_tol: 1e-11,
            max_newton_iterations: 25,
            return_horizon: 1000.0,
        }
    }
}

/// One application of the return map.
#[derive(Debug, Clone)]
pub struct Return {
    pub point: State,
    pub time: f64,
    /// Fundamental matrix of the full system over the segment.
    pub fundamental: Mat3,
    /// `y'` at the crossing.
    pub rate: f64,
    pub trajectory: Trajectory,
}

impl Return {
    /// Derivative of the return map in the `(x, z)` chart:
    /// rows and columns `{x, z}` of `(I - f eᵧᵀ / fᵧ) Φ`.
    pub fn section_jacobian(&self, p: &Params) -> [[f64; 2]; 2] {
        let f = vector_field(p, &self.point).to_array();
        let fy = f[1];
        let phi = &self.fundamental;
        let mut proj = [[0.0; 3]; 3];
        for (i, row) in proj.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = phi[(i, j)] - f[i] * phi[(1, j)] / fy;
            }
        }
        [[proj[0][0], proj[0][2]], [proj[2][0], proj[2][2]]]
    }
}

fn require_oscillatory(p: &Params) -> Result<()> {
    let r = p.regime();
    if p.k() > p.hopf_threshold() {
        Ok(())
    } else {
        Err(Error::RegimeMismatch { expected: "k > k3 + k5", actual: r })
    }
}

fn on_section(section: &PoincareSection, s: &State) -> Result<State> {
    if !(s.min_component() > 0.0) || !s.is_finite() {
        return Err(Error::InvalidState(format!("section point {s:?} is not strictly interior")));
    }
    if section.g(s).abs() > 1e-9 * section.level().max(1.0) {
        return Err(Error::InvalidState(format!("{s:?} is not on y = {}", section.level())));
    }
    Ok(section.lift(s.x, s.z))
}

fn no_crossing(e: Error, horizon: f64) -> Error {
    match e {
        Error::Integration(IntegrationError::MaxSteps { .. }) => Error::NoCrossing { horizon },
        other => other,
    }
}

/// Next rising crossing of `y = k` after leaving `s`, with the fundamental
/// matrix of the segment.
pub fn return_map(p: &Params, section: &PoincareSection, s: &State, cfg: &OrbitConfig) -> Result<Return> {
    require_oscillatory(p)?;
    let s = on_section(section, s)?;
    let run = integrate_variational_with_events(p, s, cfg.return_horizon, &cfg.integrator, &[section.event()])
        .map_err(|e| no_crossing(e, cfg.return_horizon))?;
    let Some((hit, phi)) = run.events.first() else {
        return Err(Error::NoCrossing { horizon: cfg.return_horizon });
    };
    let rate = vector_field(p, &hit.state).y;
    if rate.abs() <= TRANSVERSALITY {
        return Err(Error::TangentialCrossing { rate });
    }
    Ok(Return {
        point: section.lift(hit.state.x, hit.state.z),
        time: hit.t,
        fundamental: *phi,
        rate,
        trajectory: run.trajectory,
    })
}

/// Return map without the variational equations.
fn return_point(p: &Params, section: &PoincareSection, s: &State, cfg: &OrbitConfig) -> Result<(State, f64)> {
    let (_, hits) = integrate_with_events(p, *s, cfg.return_horizon, &cfg.integrator, &[section.event()])
        .map_err(|e| no_crossing(e, cfg.return_horizon))?;
    let hit = hits.first().ok_or(Error::NoCrossing { horizon: cfg.return_horizon })?;
    if vector_field(p, &hit.state).y.abs() <= TRANSVERSALITY {
        return Err(Error::TangentialCrossing { rate: vector_field(p, &hit.state).y });
    }
    Ok((section.lift(hit.state.x, hit.state.z), hit.t))
}

/// Central differences of the return map in the `(x, z)` chart, relative step `1e-6`.
fn finite_difference_jacobian(
    p: &Params,
    section: &PoincareSection,
    u: &State,
    cfg: &OrbitConfig,
) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    let base = section.chart(u);
    for col in 0..2 {
        let h = 1e-6 * base[col].abs().max(1e-3);
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let (a, _) = return_point(p, section, &section.lift(plus[0], plus[1]), cfg)?;
        let (b, _) = return_point(p, section, &section.lift(minus[0], minus[1]), cfg)?;
        let (a, b) = (section.chart(&a), section.chart(&b));
        for row in 0..2 {
            jac[row][col] = (a[row] - b[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiouvilleCheck {
    /// Product of the Floquet multipliers.
    pub product: f64,
    /// `exp(∫₀ᵀ trace Df)`.
    pub expected: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub params: Params,
    /// Fixed point of the return map; `y = k`.
    pub section_point: State,
    pub period: f64,
    pub multipliers: [Complex64; 3],
    pub stability: Stability,
    #[serde(skip)]
    pub monodromy: Mat3,
    /// `‖P(u) - u‖` at the returned point.
    pub fixed_point_residual: f64,
    pub min_component: f64,
    pub max_state: State,
    pub min_state: State,
    pub averages: [f64; 3],
    pub liouville: LiouvilleCheck,
    pub warmup_iterations: usize,
    pub newton_iterations: usize,
}

impl PeriodicOrbit {
    /// Index of the multiplier nearest to 1.
    pub fn trivial_index(&self) -> usize {
        (0..3)
            .min_by(|&a, &b| (self.multipliers[a] - 1.0).norm().total_cmp(&(self.multipliers[b] - 1.0).norm()))
            .expect("three multipliers")
    }

    pub fn trivial_multiplier(&self) -> Complex64 {
        self.multipliers[self.trivial_index()]
    }

    pub fn nontrivial_multipliers(&self) -> [Complex64; 2] {
        let t = self.trivial_index();
        let rest: Vec<Complex64> = (0..3).filter(|&i| i != t).map(|i| self.multipliers[i]).collect();
        [rest[0], rest[1]]
    }

    pub fn max_nontrivial_modulus(&self) -> f64 {
        self.nontrivial_multipliers().iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Half of the peak-to-peak range of `x` along the orbit.
    pub fn amplitude_x(&self) -> f64 {
        (self.max_state.x - self.min_state.x) / 2.0
    }

    /// One period from the section point.
    pub fn trajectory(&self, cfg: &OrbitConfig) -> Result<Trajectory> {
        crate::integrate::integrate(&self.params, self.section_point, self.period, &cfg.integrator)
    }

    /// `n` samples at equally spaced phases `i T / n`, `i = 0..n`.
    pub fn samples(&self, n: usize, cfg: &OrbitConfig) -> Result<Vec<(f64, State)>> {
        let tr = self.trajectory(cfg)?;
        let mut out = tr.sample_uniform(0.0, self.period, n)?;
        out.pop();
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "section_point": self.section_point,
            "period": self.period,
            "multipliers": self.multipliers.iter().map(|m| [m.re, m.im]).collect::<Vec<_>>(),
            "stability": self.stability,
        })
    }
}

fn classify_multipliers(multipliers: &[Complex64; 3]) -> Stability {
    let t = (0..3)
        .min_by(|&a, &b| (multipliers[a] - 1.0).norm().total_cmp(&(multipliers[b] - 1.0).norm()))
        .expect("three multipliers");
    let max = (0..3).filter(|&i| i != t).map(|i| multipliers[i].norm()).fold(0.0, f64::max);
    if max < 1.0 - MARGINAL_BAND {
        Stability::Stable
    } else if max > 1.0 + MARGINAL_BAND {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// A point of the unstable manifold of the origin after its transient, on the section.
pub fn default_guess(p: &Params, cfg: &OrbitConfig) -> Result<State> {
    require_oscillatory(p)?;
    let w = trace_unstable_manifold_origin(p, 1e-7, &cfg.integrator)?;
    match w.limit {
        ManifoldLimit::Cycle { section_point, .. } => Ok(section_point),
        ManifoldLimit::Equilibrium { .. } => Err(Error::NoConvergence("unstable manifold of 0 reached E".into())),
    }
}

/// Warm-up iteration of the return map followed by Newton on `P(u) - u`.
pub fn find_periodic_orbit(p: &Params, initial_guess: Option<State>, cfg: &OrbitConfig) -> Result<PeriodicOrbit> {
    require_oscillatory(p)?;
    let section = PoincareSection::new(p);
    let guess = match initial_guess {
        Some(s) => s,
        None => default_guess(p, cfg)?,
    };
    let mut u = on_section(&section, &guess)?;

    let mut warmup = 0;
    while warmup < cfg.warmup_iterations {
        let (next, _) = return_point(p, &section, &u, cfg)?;
        warmup += 1;
        let step = next.distance(&u);
        u = next;
        if step < cfg.warmup_tol {
            break;
        }
    }

    let mut newton = 0;
    let ret = loop {
        let (ret, jac) = match return_map(p, &section, &u, cfg) {
            Ok(r) => {
                let jac = r.section_jacobian(p);
                (r, jac)
            }
            Err(Error::Integration(_)) => {
                let (point, _) = return_point(p, &section, &u, cfg)?;
                let jac = finite_difference_jacobian(p, &section, &u, cfg)?;
                let ret = Return {
                    point,
                    time: f64::NAN,
                    fundamental: Mat3::ZERO,
                    rate: f64::NAN,
                    trajectory: Trajectory::constant(u, 0.0, 1.0),
                };
                (ret, jac)
            }
            Err(e) => return Err(e),
        };
        let r = [ret.point.x - u.x, ret.point.z - u.z];
        let res = r[0].hypot(r[1]);
        if res < cfg.newton_tol && ret.time.is_finite() {
            break ret;
        }
        if newton >= cfg.max_newton_iterations {
            return Err(Error::NoConvergence(format!(
                "Newton on the return map stalled at residual {res:e} after {newton} iterations"
            )));
        }
        let a = [[jac[0][0] - 1.0, jac[0][1]], [jac[1][0], jac[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::SingularJacobian { det });
        }
        let dx = (-r[0] * a[1][1] + r[1] * a[0][1]) / det;
        let dz = (-r[1] * a[0][0] + r[0] * a[1][0]) / det;
        let next = section.lift(u.x + dx, u.z + dz);
        if !(next.x > 0.0 && next.z > 0.0) || !next.is_finite() {
            return Err(Error::NoConvergence(format!("Newton left the octant at {next:?}")));
        }
        u = next;
        newton += 1;
    };

    assemble(p, u, ret, warmup, newton)
}

fn assemble(p: &Params, u: State, ret: Return, warmup: usize, newton: usize) -> Result<PeriodicOrbit> {
    let period = ret.time;
    let tr = &ret.trajectory;
    let spectrum = eigenvalues(&ret.fundamental);
    let multipliers = spectrum.roots;
    let trace_integral = (p.k() - p.k3() - p.k5()) * period - tr.integral(Component::Y, 0.0, period)?;
    let expected = trace_integral.exp();
    let product = ret.fundamental.det();
    let pick = |f: fn(&State) -> f64| {
        tr.dense_samples(8).into_iter().map(|(_, s)| s).min_by(|a, b| f(a).total_cmp(&f(b))).expect("nonempty")
    };
    let min_state = State::from([pick(|s| s.x).x, pick(|s| s.y).y, pick(|s| s.z).z]);
    let max_state = State::from([pick(|s| -s.x).x, pick(|s| -s.y).y, pick(|s| -s.z).z]);
    Ok(PeriodicOrbit {
        params: *p,
        section_point: u,
        period,
        multipliers,
        stability: classify_multipliers(&multipliers),
        monodromy: ret.fundamental,
        fixed_point_residual: ret.point.distance(&u),
        min_component: min_state.min_component(),
        max_state,
        min_state,
        averages: time_averages(tr, 0.0, period)?,
        liouville: LiouvilleCheck { product, expected, relative_error: ((product - expected) / expected).abs() },
        warmup_iterations: warmup,
        newton_iterations: newton,
    })
}

/// Eigenvalues of the monodromy matrix over one period, recomputed from the
/// section point.
pub fn floquet_multipliers(p: &Params, orbit: &PeriodicOrbit, cfg: &OrbitConfig) -> Result<[Complex64; 3]> {
    if !(orbit.fixed_point_residual < 1e-9) {
        return Err(Error::InvalidArgument(format!("orbit closes only to {:e}", orbit.fixed_point_residual)));
    }
    let (_, phi) = integrate_variational(p, orbit.section_point, orbit.period, &cfg.integrator)?;
    Ok(eigenvalues(&phi).roots)
}

/// Geometric contraction rate of return-map iterates started `offset` away
/// from the fixed point along `x`: `(d_n / d_1)^(1/(n-1))` over the iterates
/// whose distance `d` to the fixed point is still above `1e-8`.
pub fn return_contraction_rate(p: &Params, orbit: &PeriodicOrbit, offset: f64, cfg: &OrbitConfig) -> Result<f64> {
    let section = PoincareSection::new(p);
    let star = orbit.section_point;
    let mut u = section.lift(star.x + offset, star.z);
    let mut dists = Vec::new();
    for _ in 0..400 {
        let (next, _) = return_point(p, &section, &u, cfg)?;
        u = next;
        let d = u.distance(&star);
        if d < 1e-8 {
            break;
        }
        dists.push(d);
    }
    if dists.len() < 3 {
        return Err(Error::NoConvergence("too few iterates above the noise floor".into()));
    }
    let n = dists.len();
    Ok((dists[n - 1] / dists[0]).powf(1.0 / (n - 1) as f64))
}

#[derive(Debug, Clone, Serialize)]
pub struct Census {
    pub orbits: Vec<PeriodicOrbit>,
    pub n_starts: usize,
    pub converged: usize,
    /// Seed index and error message of every failed start.
    pub failures: Vec<(usize, String)>,
}

/// Periodic-orbit search from `n_starts` Halton seeds in `[lower, M]³`, each
/// moved forward to its first section crossing. Results closer than `1e-6`
/// in section point and period are merged.
pub fn orbit_census(p: &Params, n_starts: usize, lower: f64, cfg: &OrbitConfig) -> Result<Census> {
    require_oscillatory(p)?;
    let m = attractor_bound(p)?;
    if !(lower > 0.0 && lower < m) {
        return Err(Error::InvalidArgument(format!("seed floor {lower} not in (0, {m})")));
    }
    let section = PoincareSection::new(p);
    let seeds = halton_box(n_starts, lower, m);
    let results: Vec<Result<PeriodicOrbit>> = seeds
        .par_iter()
        .map(|s0| {
            let (point, _) = return_point(p, &section, s0, cfg)?;
            find_periodic_orbit(p, Some(point), cfg)
        })
        .collect();

    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let mut failures = Vec::new();
    let mut converged = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => {
                converged += 1;
                let dup = orbits
                    .iter()
                    .any(|q| q.section_point.distance(&o.section_point) < 1e-6 && (q.period - o.period).abs() < 1e-6);
                if !dup {
                    orbits.push(o);
                }
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    Ok(Census { orbits, n_starts, converged, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_chart_round_trip() {
        let p = Params::new(3.0, 1.0, 1.0).unwrap();
        let s = PoincareSection::new(&p);
        let u = s.lift(2.0, 5.0);
        assert_eq!(u.y, 3.0);
        assert_eq!(s.chart(&u), [2.0, 5.0]);
        assert_eq!(s.g(&p.interior_equilibrium()), 0.0);
    }

    #[test]
    fn preconditions() {
        let p = Params::new(1.0, 1.0, 1.0).unwrap();
        let cfg = OrbitConfig::default();
        assert!(matches!(find_periodic_orbit(&p, None, &cfg), Err(Error::RegimeMismatch { .. })));
        assert!(orbit_census(&p, 4, 1e-3, &cfg).is_err());
        let p = Params::new(3.0, 1.0, 1.0).unwrap();
        let s = PoincareSection::new(&p);
        assert!(return_map(&p, &s, &State::from([1.0, 2.0, 4.0]), &cfg).is_err());
        assert!(return_map(&p, &s, &State::from([0.0, 3.0, 4.0]), &cfg).is_err());
    }

    #[test]
    fn multiplier_classification() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        assert_eq!(classify_multipliers(&[c(1.0, 0.0), c(0.3, 0.2), c(0.3, -0.2)]), Stability::Stable);
        assert_eq!(classify_multipliers(&[c(1.5, 0.0), c(1.0, 0.0), c(0.1, 0.0)]), Stability::Unstable);
        assert_eq!(classify_multipliers(&[c(1.0, 0.0), c(1.0, 0.0), c(0.1, 0.0)]), Stability::Marginal);
    }
}
