//! Bendixson-type criterion for excluding periodic orbits when
//! `0 < k < k3 + k5`: the weighted second compound `B = A_f A⁻¹ + A Df^[2] A⁻¹`
//! with `A = diag((1 - 2ε)/x, (1 - ε)/x, -1/k5)`, its Lozinskiĭ measure for
//! the max norm, and the long-time average `q̄₂` of that measure.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::global::{attractor_bound, interior_grid, persistence_floor};
use crate::integrate::{integrate, IntegratorConfig};
use crate::model::{Mat3, Params, Regime, State};
use crate::report::VerificationReport;

/// Default threshold below zero that `q̄₂` must clear.
pub const MARGIN_FLOOR: f64 = 1e-3;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon = {epsilon} not in (0, 1/2)")))
    }
}

/// `[[-k3, k3 (1-2ε)/(1-ε), 0], [0, -k5, k5 (1-ε)], [x/(1-2ε), 0, -(k3+k5)]]`.
pub fn b_matrix(p: &Params, s: &State, epsilon: f64) -> Result<Mat3> {
    check_epsilon(epsilon)?;
    if !(s.x > 0.0) {
        return Err(Error::Domain(format!("B needs x > 0, got x = {}", s.x)));
    }
    let (k3, k5) = (p.k3(), p.k5());
    let e = epsilon;
    Ok(Mat3::from_rows([
        [-k3, k3 * (1.0 - 2.0 * e) / (1.0 - e), 0.0],
        [0.0, -k5, k5 * (1.0 - e)],
        [s.x / (1.0 - 2.0 * e), 0.0, -(k3 + k5)],
    ]))
}

/// Lozinskiĭ measure induced by the max norm: `max_i (m_ii + Σ_{j≠i} |m_ij|)`.
pub fn lozinskii_max_norm(m: &Mat3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| if i == j { m[(i, j)] } else { m[(i, j)].abs() }).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max{-ε k3/(1-ε), -ε k5, x/(1-2ε) - (k3+k5)}`.
pub fn mu_closed_form(p: &Params, x: f64, epsilon: f64) -> f64 {
    let (k3, k5, e) = (p.k3(), p.k5(), epsilon);
    (-e * k3 / (1.0 - e)).max(-e * k5).max(x / (1.0 - 2.0 * e) - (k3 + k5))
}

fn require_stable_interior(p: &Params) -> Result<()> {
    if p.k() > 0.0 && p.k() < p.hopf_threshold() {
        Ok(())
    } else {
        Err(Error::NotApplicable(format!(
            "the certificate needs 0 < k < k3 + k5 = {}, got k = {} ({})",
            p.hopf_threshold(),
            p.k(),
            p.regime()
        )))
    }
}

/// Midpoint heuristic `ε = min(1/4, (1 - k/(k3+k5))/4)`, clipped into
/// `(1e-6, 1/2 - 1e-6)`; always satisfies `k/(1-2ε) < k3 + k5`.
pub fn auto_epsilon(p: &Params) -> Result<f64> {
    if !(p.k() > 0.0 && p.k() < p.hopf_threshold()) {
        let actual = if p.k() <= 0.0 { Regime::GlobalDecay } else { p.regime() };
        return Err(Error::RegimeMismatch { expected: "0 < k < k3 + k5", actual });
    }
    let eps = (0.25f64).min((1.0 - p.k() / p.hopf_threshold()) / 4.0).clamp(1e-6, 0.5 - 1e-6);
    debug_assert!(p.k() / (1.0 - 2.0 * eps) < p.hopf_threshold());
    Ok(eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateConfig {
    /// `None` selects [`auto_epsilon`].
    pub epsilon: Option<f64>,
    pub horizon: f64,
    /// Starts per axis of the grid over `[eta, M]³`.
    pub grid_per_axis: usize,
    /// Lower corner of the start grid; `None` estimates it with
    /// [`persistence_floor`].
    pub eta: Option<f64>,
    pub margin_floor: f64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig { epsilon: None, horizon: 2000.0, grid_per_axis: 4, eta: None, margin_floor: MARGIN_FLOOR }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartAverage {
    pub start: State,
    pub tail_average: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub params: Params,
    pub epsilon: f64,
    pub horizon: f64,
    pub n_starts: usize,
    pub eta: f64,
    /// Supremum over starts of the tail average of `μ(B)`.
    pub q2_bar: f64,
    /// `-q2_bar`: how far the estimate sits below zero.
    pub margin: f64,
    pub margin_floor: f64,
    pub pass: bool,
    #[serde(skip)]
    pub per_start: Vec<StartAverage>,
}

impl Certificate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "epsilon": self.epsilon,
            "horizon": self.horizon,
            "n_starts": self.n_starts,
            "q2_bar": self.q2_bar,
            "margin": self.margin,
            "pass": self.pass,
        })
    }

    pub fn report(&self, start: Instant) -> VerificationReport {
        VerificationReport::at_most("bendixson_certificate", self.params, self.q2_bar, -self.margin_floor, 0.0)
            .with_detail(format!(
                "epsilon = {}, {} starts in [{:e}, M]^3, tail [{}, {}]",
                self.epsilon,
                self.n_starts,
                self.eta,
                self.horizon / 2.0,
                self.horizon
            ))
            .with_runtime(start)
    }
}

/// Estimates `q̄₂` as the largest average of `μ(B(φ(t)))` over `[T/2, T]`
/// among starts on a grid over `[eta, M]³`.
pub fn q2_bar(p: &Params, cc: &CertificateConfig, cfg: &IntegratorConfig) -> Result<Certificate> {
    require_stable_interior(p)?;
    let epsilon = match cc.epsilon {
        Some(e) => {
            check_epsilon(e)?;
            if !(p.k() / (1.0 - 2.0 * e) < p.hopf_threshold()) {
                return Err(Error::NotApplicable(format!("k/(1-2ε) >= k3 + k5 for ε = {e}")));
            }
            e
        }
        None => auto_epsilon(p)?,
    };
    if !(cc.horizon > 0.0) || cc.grid_per_axis == 0 {
        return Err(Error::InvalidArgument("horizon and grid size must be positive".into()));
    }
    let m = attractor_bound(p)?;
    let eta = match cc.eta {
        Some(eta) => eta,
        None => persistence_floor(p, &interior_grid(1e-3, m, 3), cc.horizon / 2.0, cfg)?.eta,
    };
    if !(eta > 0.0 && eta < m) {
        return Err(Error::InvalidArgument(format!("eta = {eta} not in (0, M = {m})")));
    }
    let starts = interior_grid(eta, m, cc.grid_per_axis);
    let (t0, t1) = (cc.horizon / 2.0, cc.horizon);
    let averages: Vec<Result<f64>> = starts
        .par_iter()
        .map(|s0| {
            let tr = integrate(p, *s0, cc.horizon, cfg)?;
            let worst_x = tr.min_of(|s| s.x, t0, t1);
            if !(worst_x > 0.0) {
                return Err(Error::Domain(format!("trajectory from {s0:?} reached x = {worst_x}")));
            }
            Ok(tr.integral_of(|s| mu_closed_form(p, s.x, epsilon), t0, t1)? / (t1 - t0))
        })
        .collect();
    let mut per_start = Vec::with_capacity(starts.len());
    for (s, a) in starts.iter().zip(averages) {
        per_start.push(StartAverage { start: *s, tail_average: a? });
    }
    let q2 = per_start.iter().map(|a| a.tail_average).fold(f64::NEG_INFINITY, f64::max);
    Ok(Certificate {
        params: *p,
        epsilon,
        horizon: cc.horizon,
        n_starts: starts.len(),
        eta,
        q2_bar: q2,
        margin: -q2,
        margin_floor: cc.margin_floor,
        pass: q2 < -cc.margin_floor,
        per_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: f64, k3: f64, k5: f64) -> Params {
        Params::new(k, k3, k5).unwrap()
    }

    #[test]
    fn b_at_reference_point() {
        let b = b_matrix(&p(1.0, 1.0, 1.0), &State::from([1.0, 7.0, 9.0]), 0.125).unwrap();
        let expected = Mat3::from_rows([[-1.0, 6.0 / 7.0, 0.0], [0.0, -1.0, 7.0 / 8.0], [4.0 / 3.0, 0.0, -2.0]]);
        assert!(b.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn b_depends_only_on_x() {
        let q = p(1.0, 2.0, 0.5);
        let a = b_matrix(&q, &State::from([0.7, 0.1, 3.0]), 0.2).unwrap();
        let b = b_matrix(&q, &State::from([0.7, 9.0, 0.0]), 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn b_needs_positive_x() {
        let r = b_matrix(&p(1.0, 1.0, 1.0), &State::from([0.0, 1.0, 1.0]), 0.1);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(b_matrix(&p(1.0, 1.0, 1.0), &State::from([1.0, 1.0, 1.0]), 0.5).is_err());
    }

    #[test]
    fn measure_of_identity() {
        assert_eq!(lozinskii_max_norm(&Mat3::IDENTITY), 1.0);
        assert_eq!(lozinskii_max_norm(&Mat3::from_rows([[-3.0, -1.0, 0.5], [0.0, 0.0, 0.0], [1.0, 1.0, -5.0]])), 0.0);
    }

    #[test]
    fn epsilon_rule() {
        assert_eq!(auto_epsilon(&p(1.0, 1.0, 1.0)).unwrap(), 0.125);
        let q = p(1.99, 1.0, 1.0);
        let e = auto_epsilon(&q).unwrap();
        assert!(e > 0.0 && q.k() / (1.0 - 2.0 * e) < 2.0);
        assert!(auto_epsilon(&p(2.0, 1.0, 1.0)).is_err());
        assert!(auto_epsilon(&p(3.0, 1.0, 1.0)).is_err());
        assert!(auto_epsilon(&p(-1.0, 1.0, 1.0)).is_err());
        // tiny k approaches the 1/4 cap from below
        let e = auto_epsilon(&p(1e-3, 1.0, 1.0)).unwrap();
        assert!(e < 0.25 && e > 0.2498);
    }

    #[test]
    fn certificate_not_applicable_above_threshold() {
        let r = q2_bar(&p(3.0, 1.0, 1.0), &CertificateConfig::default(), &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::NotApplicable(_))));
        let cc = CertificateConfig { epsilon: Some(0.3), ..Default::default() };
        let r = q2_bar(&p(1.0, 1.0, 1.0), &cc, &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::NotApplicable(_))));
    }
}
