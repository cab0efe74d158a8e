//! Global structure for `k > 0`: the attractor bound `M`, the positively
//! invariant boxes `B(σ, ρ, K)`, the ratio floors for `z/x` and `y/x`,
//! uniform persistence, the unstable manifold of the origin and the
//! one-dimensional stable manifold of `E`.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    integrate, integrate_field, integrate_with_events, Direction, EventSpec, IntegratorConfig, Trajectory,
};
use crate::model::{classify_regime, vector_field, Params, Regime, State};
use crate::report::VerificationReport;
use crate::sampling::seeded_rng;
use crate::spectral::stable_eigenvector_at_e;

fn require_positive_k(p: &Params) -> Result<()> {
    if p.k() > 0.0 {
        Ok(())
    } else {
        Err(Error::RegimeMismatch { expected: "k > 0", actual: Regime::GlobalDecay })
    }
}

/// `M = k (k + k5)(k + k3) / (k3 k5)`; every solution is eventually in `[0, M]³`.
pub fn attractor_bound(p: &Params) -> Result<f64> {
    if p.k() <= 0.0 {
        return Err(Error::TrivialAttractor);
    }
    let (k, k3, k5) = (p.k(), p.k3(), p.k5());
    Ok(k * (k + k5) * (k + k3) / (k3 * k5))
}

/// Lower bounds on `liminf z/x` and `liminf y/x` for solutions with `x(0) > 0`:
/// `k5 / (k + k5)` and `k3 k5 / ((k + k3)(k + k5))`.
pub fn ratio_floors(p: &Params) -> (f64, f64) {
    let (k, k3, k5) = (p.k(), p.k3(), p.k5());
    (k5 / (k + k5), k3 * k5 / ((k + k3) * (k + k5)))
}

/// Exact time derivatives `((z/x)', (y/x)')` along the flow at `s`, `x > 0`.
pub fn ratio_derivatives(p: &Params, s: &State) -> (f64, f64) {
    let v = vector_field(p, s);
    let dzx = v.z / s.x - s.z * v.x / (s.x * s.x);
    let dyx = v.y / s.x - s.y * v.x / (s.x * s.x);
    (dzx, dyx)
}

/// Right-hand sides of the differential inequalities
/// `(y/x)' >= k3 (z/x) - (k + k3)(y/x)` and `(z/x)' >= k5 - (k + k5)(z/x)`,
/// returned as `(z/x bound, y/x bound)`.
pub fn ratio_derivative_bounds(p: &Params, s: &State) -> (f64, f64) {
    let (k, k3, k5) = (p.k(), p.k3(), p.k5());
    let (zx, yx) = (s.z / s.x, s.y / s.x);
    (k5 - (k + k5) * zx, k3 * zx - (k + k3) * yx)
}

/// `B(σ, ρ, K) = {p ∈ [0, K]³ : x = 0, or z/x >= σ and y/x >= ρ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantBox {
    pub sigma: f64,
    pub rho: f64,
    #[serde(rename = "cap")]
    pub cap: f64,
}

impl InvariantBox {
    /// Requires `0 < σ <= k5/(k+k5)`, `0 < ρ <= k3 σ/(k+k3)` and `K >= k/ρ`.
    pub fn new(p: &Params, sigma: f64, rho: f64, cap: f64) -> Result<Self> {
        require_positive_k(p)?;
        let (k, k3, k5) = (p.k(), p.k3(), p.k5());
        let sigma_max = k5 / (k + k5);
        if !(sigma > 0.0 && sigma <= sigma_max) {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} not in (0, {sigma_max}]")));
        }
        let rho_max = k3 * sigma / (k + k3);
        if !(rho > 0.0 && rho <= rho_max) {
            return Err(Error::InvalidArgument(format!("rho = {rho} not in (0, {rho_max}]")));
        }
        if !(cap >= k / rho) || !cap.is_finite() {
            return Err(Error::InvalidArgument(format!("K = {cap} below k/rho = {}", k / rho)));
        }
        Ok(InvariantBox { sigma, rho, cap })
    }

    /// The extremal box `σ = k5/(k+k5)`, `ρ = k3 σ/(k+k3)`, `K = k/ρ`; then `K = M`.
    pub fn extremal(p: &Params) -> Result<Self> {
        require_positive_k(p)?;
        let (k, k3, k5) = (p.k(), p.k3(), p.k5());
        let sigma = k5 / (k + k5);
        let rho = k3 * sigma / (k + k3);
        Ok(InvariantBox { sigma, rho, cap: k / rho })
    }

    pub fn contains(&self, s: &State) -> bool {
        self.margin(s) >= 0.0
    }

    /// Signed distance-like margin: nonnegative iff `s` is in the box. Cap
    /// constraints are measured relative to `K`, ratio constraints as
    /// `z/x - σ` and `y/x - ρ`.
    pub fn margin(&self, s: &State) -> f64 {
        let k = self.cap;
        let mut m = [s.x, s.y, s.z, k - s.x, k - s.y, k - s.z].into_iter().map(|v| v / k).fold(f64::INFINITY, f64::min);
        if s.x > 0.0 {
            m = m.min(s.z / s.x - self.sigma).min(s.y / s.x - self.rho);
        }
        m
    }

    /// Random point of the box; with `near_boundary`, within relative
    /// distance `1e-3` of one of the six boundary pieces.
    pub fn sample<R: Rng>(&self, rng: &mut R, near_boundary: bool) -> State {
        let k = self.cap;
        let w = 1e-3;
        let mut x = rng.random_range(0.0..=k);
        let face = if near_boundary { rng.random_range(0..6) } else { usize::MAX };
        match face {
            0 => x = rng.random_range(0.0..=w * k),
            3 => x = k * (1.0 - w * rng.random::<f64>()),
            _ => {}
        }
        let mut y = rng.random_range(self.rho * x..=k);
        let mut z = rng.random_range(self.sigma * x..=k);
        match face {
            1 => z = (self.sigma * x * (1.0 + w * rng.random::<f64>())).min(k),
            2 => y = (self.rho * x * (1.0 + w * rng.random::<f64>())).min(k),
            4 => y = (k * (1.0 - w * rng.random::<f64>())).max(self.rho * x),
            5 => z = (k * (1.0 - w * rng.random::<f64>())).max(self.sigma * x),
            _ => {}
        }
        State::from([x, y, z])
    }
}

pub fn invariant_box_default(p: &Params) -> Result<InvariantBox> {
    InvariantBox::extremal(p)
}

pub fn box_contains(b: &InvariantBox, s: &State) -> bool {
    b.contains(s)
}

/// Samples `n_samples` points of the box (half of them near its boundary),
/// integrates each for `t_check` and records the worst box margin along the
/// dense output. Passes iff the worst margin is at least `-1e-9`.
pub fn verify_forward_invariance(
    p: &Params,
    b: &InvariantBox,
    n_samples: usize,
    t_check: f64,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let b = InvariantBox::new(p, b.sigma, b.rho, b.cap)?;
    let mut rng = seeded_rng(seed);
    let starts: Vec<State> = (0..n_samples).map(|i| b.sample(&mut rng, i % 2 == 0)).collect();
    let margins: Vec<Result<(f64, f64)>> = starts
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, *s0, t_check, cfg)?;
            let worst = tr.dense_samples(4).iter().map(|(_, s)| b.margin(s)).fold(f64::INFINITY, f64::min);
            Ok((b.margin(s0), worst))
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut worst_start = f64::INFINITY;
    for m in margins {
        let (m0, m) = m?;
        worst = worst.min(m);
        worst_start = worst_start.min(m0);
    }
    Ok(VerificationReport::at_least("box_forward_invariance", *p, worst, 0.0, 1e-9)
        .with_detail(format!(
            "sigma = {}, rho = {}, K = {}, {n_samples} samples over t = {t_check}, worst initial margin {worst_start:e}",
            b.sigma, b.rho, b.cap
        ))
        .with_runtime(start))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioFloors {
    pub measured_zx: f64,
    pub measured_yx: f64,
    pub floor_zx: f64,
    pub floor_yx: f64,
}

impl RatioFloors {
    /// Both measured infima at least the floor minus `1e-6`.
    pub fn holds(&self) -> bool {
        self.measured_zx >= self.floor_zx - 1e-6 && self.measured_yx >= self.floor_yx - 1e-6
    }
}

/// Infima of `z/x` and `y/x` over `[horizon/2, horizon]` from `s0`.
pub fn ratio_liminf_check(p: &Params, s0: State, horizon: f64, cfg: &IntegratorConfig) -> Result<RatioFloors> {
    require_positive_k(p)?;
    if !(s0.x > 0.0) {
        return Err(Error::InvalidState("ratio floors need x(0) > 0".into()));
    }
    let tr = integrate(p, s0, horizon, cfg)?;
    let (floor_zx, floor_yx) = ratio_floors(p);
    let (t0, t1) = (horizon / 2.0, horizon);
    Ok(RatioFloors {
        measured_zx: tr.min_of(|s| s.z / s.x, t0, t1),
        measured_yx: tr.min_of(|s| s.y / s.x, t0, t1),
        floor_zx,
        floor_yx,
    })
}

/// Grid of interior starts in `[lo, hi]³`, with every coordinate at least `1e-3`.
pub fn interior_grid(lo: f64, hi: f64, n: usize) -> Vec<State> {
    crate::sampling::cube_grid(lo.max(1e-3), hi, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistenceEstimate {
    /// Minimum over starts of the tail infimum of `min(x, y, z)`.
    pub eta: f64,
    pub worst_start: State,
    pub horizon: f64,
    pub n_starts: usize,
}

impl PersistenceEstimate {
    pub fn report(&self, p: &Params) -> VerificationReport {
        VerificationReport::new("uniform_persistence", *p, self.eta, 0.0, 0.0, self.eta > 0.0).with_detail(format!(
            "{} interior starts, tail [{}, {}]",
            self.n_starts,
            self.horizon / 2.0,
            self.horizon
        ))
    }
}

/// Empirical persistence floor over interior starts.
pub fn persistence_floor(
    p: &Params,
    starts: &[State],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<PersistenceEstimate> {
    require_positive_k(p)?;
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no starts".into()));
    }
    if let Some(s) = starts.iter().find(|s| !(s.min_component() > 0.0)) {
        return Err(Error::InvalidState(format!("start {s:?} is not strictly interior")));
    }
    let tails: Vec<Result<f64>> = starts
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, *s0, horizon, cfg)?;
            Ok(tr.min_of(State::min_component, horizon / 2.0, horizon))
        })
        .collect();
    let mut eta = f64::INFINITY;
    let mut worst_start = starts[0];
    for (s0, tail) in starts.iter().zip(tails) {
        let tail = tail?;
        if tail < eta {
            eta = tail;
            worst_start = *s0;
        }
    }
    Ok(PersistenceEstimate { eta, worst_start, horizon, n_starts: starts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Absorption {
    /// Cap of the absorbing cube, `M + 1e-6`.
    pub bound: f64,
    /// Latest sampled time at which some start was outside `[0, M + 1e-6]³`.
    pub worst_entry_time: f64,
    pub horizon: f64,
}

impl Absorption {
    /// Every trajectory is inside for the whole second half of the horizon.
    pub fn holds(&self) -> bool {
        self.worst_entry_time <= self.horizon / 2.0
    }
}

/// Entry times into `[0, M + 1e-6]³` from the given starts.
pub fn absorption_check(p: &Params, starts: &[State], horizon: f64, cfg: &IntegratorConfig) -> Result<Absorption> {
    let m = attractor_bound(p)?;
    let cap = m + 1e-6;
    let entries: Vec<Result<f64>> = starts
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, *s0, horizon, cfg)?;
            Ok(tr.dense_samples(4).iter().filter(|(_, s)| s.max_component() > cap).map(|(t, _)| *t).fold(0.0, f64::max))
        })
        .collect();
    let mut worst = 0.0f64;
    for e in entries {
        worst = worst.max(e?);
    }
    Ok(Absorption { bound: cap, worst_entry_time: worst, horizon })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldLimit {
    Equilibrium {
        state: State,
        distance: f64,
    },
    /// Last rising crossing of `y = k`, with the change between the last two crossings.
    Cycle {
        section_point: State,
        crossing_change: f64,
    },
}

#[derive(Debug, Clone)]
pub struct UnstableManifold {
    pub trajectory: Trajectory,
    /// Positive unit eigenvector of `Df(0)` for the eigenvalue `k`.
    pub eigenvector: [f64; 3],
    pub limit: ManifoldLimit,
    /// Minimum distance to `E` over the second half of the trajectory.
    pub tail_min_distance_to_e: f64,
    /// Minimum of `min(x, y, z)` over the second half of the trajectory.
    pub tail_min_component: f64,
}

/// `v ∝ (1, k3 k5 / ((k3 + k)(k5 + k)), k5 / (k5 + k))`, normalized.
pub fn origin_unstable_eigenvector(p: &Params) -> [f64; 3] {
    let (k, k3, k5) = (p.k(), p.k3(), p.k5());
    let v = [1.0, k3 * k5 / ((k3 + k) * (k5 + k)), k5 / (k5 + k)];
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.map(|c| c / n)
}

/// Follows the branch of the unstable manifold of `0` entering the open
/// octant until it has settled on `E` (stable interior regime) or on a
/// periodic orbit (oscillatory regime).
pub fn trace_unstable_manifold_origin(p: &Params, delta: f64, cfg: &IntegratorConfig) -> Result<UnstableManifold> {
    if !(delta > 0.0 && delta <= 1e-6) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 1e-6]")));
    }
    let regime = classify_regime(p, crate::model::default_hopf_tolerance(p));
    let v = origin_unstable_eigenvector(p);
    let s0 = State::from(v.map(|c| delta * c));
    let e = p.interior_equilibrium();
    let k = p.k();
    let max_horizon = 64_000.0;
    let mut horizon = 1000.0;
    loop {
        let (tr, limit) = match regime {
            Regime::StableInterior => {
                let events = [EventSpec::new(move |s: &State| s.distance(&e) - 1e-7, Direction::Falling, true)];
                let (tr, hits) = integrate_with_events(p, s0, horizon, cfg, &events)?;
                let limit =
                    hits.first().map(|h| ManifoldLimit::Equilibrium { state: e, distance: h.state.distance(&e) });
                (tr, limit)
            }
            Regime::Oscillatory => {
                let events = [EventSpec::new(move |s: &State| s.y - k, Direction::Rising, false)];
                let (tr, hits) = integrate_with_events(p, s0, horizon, cfg, &events)?;
                let limit = match hits.as_slice() {
                    [.., a, b] => {
                        let change = a.state.distance(&b.state);
                        (change < 1e-8)
                            .then_some(ManifoldLimit::Cycle { section_point: b.state, crossing_change: change })
                    }
                    _ => None,
                };
                (tr, limit)
            }
            other => return Err(Error::RegimeMismatch { expected: "0 < k != k3 + k5", actual: other }),
        };
        if let Some(limit) = limit {
            let (t0, t1) = (tr.t_end() / 2.0, tr.t_end());
            return Ok(UnstableManifold {
                tail_min_distance_to_e: tr.min_of(|s| s.distance(&e), t0, t1),
                tail_min_component: tr.min_of(State::min_component, t0, t1),
                trajectory: tr,
                eigenvector: v,
                limit,
            });
        }
        horizon *= 2.0;
        if horizon > max_horizon {
            return Err(Error::NoConvergence(format!(
                "unstable manifold of 0 did not settle within t = {max_horizon}"
            )));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchLabel {
    /// Enters through the face `y = 0`; lies in `[0,k] x [0,k] x [k,∞)`.
    #[serde(rename = "p_u")]
    Upper,
    /// Enters through the face `z = 0`; lies in `[k,∞) x [k,∞) x [0,k]`.
    #[serde(rename = "p_l")]
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchAudit {
    /// Largest step against the required monotone direction (0 if monotone).
    pub monotonicity_violation: f64,
    /// Largest excursion outside the branch's box.
    pub box_violation: f64,
    pub endpoint_ok: bool,
    /// Distance to `E` after integrating forward from the boundary endpoint.
    pub terminal_distance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ManifoldBranch {
    pub label: BranchLabel,
    /// Forward-time samples from the boundary endpoint to the neighbourhood of `E`.
    pub trajectory: Trajectory,
    pub endpoint: State,
    pub audit: BranchAudit,
}

const MONOTONE_SLACK: f64 = 1e-9;

/// Traces both branches of the stable manifold of `E` for `k > k3 + k5` by
/// integrating the reversed flow from `E ∓ δ v` until the trajectory leaves
/// the octant through `y = 0` (upper branch) or `z = 0` (lower branch).
pub fn trace_stable_manifold_e(
    p: &Params,
    delta: f64,
    cfg: &IntegratorConfig,
) -> Result<(ManifoldBranch, ManifoldBranch)> {
    if !(delta > 0.0 && delta <= 1e-6) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 1e-6]")));
    }
    let pair = stable_eigenvector_at_e(p)?;
    let e = p.interior_equilibrium();
    let v = State::from(pair.vector);
    let upper = trace_branch(p, BranchLabel::Upper, e - delta * v, pair.eigenvalue, delta, cfg)?;
    let lower = trace_branch(p, BranchLabel::Lower, e + delta * v, pair.eigenvalue, delta, cfg)?;
    Ok((upper, lower))
}

fn trace_branch(
    p: &Params,
    label: BranchLabel,
    start: State,
    lambda: f64,
    delta: f64,
    cfg: &IntegratorConfig,
) -> Result<ManifoldBranch> {
    let reversed = |s: &State| -vector_field(p, s);
    let face: fn(&State) -> f64 = match label {
        BranchLabel::Upper => |s| s.y,
        BranchLabel::Lower => |s| s.z,
    };
    let events = [EventSpec::new(face, Direction::Falling, true)];
    let horizon = 500.0;
    let (back, hits) = integrate_field(reversed, start, horizon, cfg, &events)?;
    if hits.is_empty() {
        return Err(Error::NoConvergence(format!("{label:?} branch did not reach its boundary face by t = {horizon}")));
    }
    let trajectory = back.reversed(0.0);
    let mut endpoint = trajectory.first();
    match label {
        BranchLabel::Upper => endpoint.y = 0.0,
        BranchLabel::Lower => endpoint.z = 0.0,
    }

    let k = p.k();
    let samples = trajectory.dense_samples(4);
    // forward-time signs: upper has x, y increasing and z decreasing; lower the opposite
    let sign = match label {
        BranchLabel::Upper => [1.0, 1.0, -1.0],
        BranchLabel::Lower => [-1.0, -1.0, 1.0],
    };
    let mut mono = 0.0f64;
    for w in samples.windows(2) {
        let d = (w[1].1 - w[0].1).to_array();
        for i in 0..3 {
            mono = mono.max(-sign[i] * d[i]);
        }
    }
    let mut boxv = 0.0f64;
    for (_, s) in &samples {
        let excess = match label {
            BranchLabel::Upper => [s.x - k, s.y - k, k - s.z, -s.x, -s.y],
            BranchLabel::Lower => [k - s.x, k - s.y, s.z - k, -s.z, f64::NEG_INFINITY],
        };
        boxv = excess.into_iter().fold(boxv, f64::max);
    }
    let endpoint_ok = match label {
        BranchLabel::Upper => endpoint.x > 0.0 && endpoint.x < k && endpoint.z > k,
        BranchLabel::Lower => endpoint.x > k && endpoint.y > k,
    };

    // forward convergence: run from the face endpoint through the manifold
    // and on until the linear offset has contracted below 1e-10
    let extra = (delta / 1e-10).ln().max(0.0) / lambda.abs();
    let forward = integrate(p, endpoint, trajectory.t_end() + extra, cfg)?;
    let terminal_distance = forward.last().distance(&p.interior_equilibrium());

    let pass = mono <= MONOTONE_SLACK && boxv <= MONOTONE_SLACK && endpoint_ok && terminal_distance < 1e-8;
    Ok(ManifoldBranch {
        label,
        trajectory,
        endpoint,
        audit: BranchAudit { monotonicity_violation: mono, box_violation: boxv, endpoint_ok, terminal_distance, pass },
    })
}
