//! Adaptive integration of the flow, event location on the dense output,
//! the variational equations and time averages.

mod dopri;
mod trajectory;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{jacobian, vector_field, Component, Mat3, Params, State};

pub use trajectory::{write_csv_rows, Diagnostics, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// First trial step; estimated from the initial derivative when `None`.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 1.0, max_steps: 5_000_000, initial_step: None }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig { rel_tol, abs_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 && self.max_steps > 0) {
            return Err(Error::InvalidArgument(format!("invalid integrator config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Both,
}

impl Direction {
    fn accepts(self, crossing: Direction) -> bool {
        self == Direction::Both || self == crossing
    }
}

/// A scalar event function `g(state)`; an event is a sign change of `g`.
pub struct EventSpec {
    pub g: Box<dyn Fn(&State) -> f64 + Send + Sync>,
    pub direction: Direction,
    pub terminal: bool,
}

impl EventSpec {
    pub fn new(g: impl Fn(&State) -> f64 + Send + Sync + 'static, direction: Direction, terminal: bool) -> Self {
        EventSpec { g: Box::new(g), direction, terminal }
    }
}

impl fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventHit {
    pub t: f64,
    pub state: State,
    /// Position of the triggering spec in the event list.
    pub index: usize,
    /// Direction of this particular crossing.
    pub direction: Direction,
}

fn check_start(s0: &State, t_end: f64) -> Result<()> {
    State::new(s0.x, s0.y, s0.z)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be a nonnegative time, got {t_end}")));
    }
    Ok(())
}

fn flow(p: &Params) -> impl Fn(&[f64; 3]) -> [f64; 3] + '_ {
    move |y| vector_field(p, &State::from(*y)).to_array()
}

/// Solution of the scaled system from `s0` on `[0, t_end]`.
pub fn integrate(p: &Params, s0: State, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    Ok(integrate_with_events(p, s0, t_end, cfg, &[])?.0)
}

/// Like [`integrate`], additionally locating the sign changes of the given
/// event functions. A terminal event ends the trajectory at the event.
pub fn integrate_with_events(
    p: &Params,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<(Trajectory, Vec<EventHit>)> {
    check_start(&s0, t_end)?;
    cfg.validate()?;
    let raw = dopri::solve(&flow(p), s0.to_array(), t_end, cfg, events, true)?;
    let hits = raw
        .events
        .iter()
        .map(|e| EventHit { t: e.t, state: State::from(e.y), index: e.index, direction: e.direction })
        .collect();
    Ok((Trajectory::from_raw(&raw), hits))
}

/// Integrates an arbitrary autonomous field without the octant projection,
/// e.g. the time-reversed flow. `s0` only needs to be finite.
pub fn integrate_field<F>(
    field: F,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<(Trajectory, Vec<EventHit>)>
where
    F: Fn(&State) -> State,
{
    if !s0.is_finite() {
        return Err(Error::InvalidState(format!("non-finite start {s0:?}")));
    }
    cfg.validate()?;
    let f = |y: &[f64; 3]| field(&State::from(*y)).to_array();
    let raw = dopri::solve(&f, s0.to_array(), t_end, cfg, events, false)?;
    let hits = raw
        .events
        .iter()
        .map(|e| EventHit { t: e.t, state: State::from(e.y), index: e.index, direction: e.direction })
        .collect();
    Ok((Trajectory::from_raw(&raw), hits))
}

/// Result of integrating the flow together with its fundamental matrix.
#[derive(Debug, Clone)]
pub struct VariationalRun {
    pub trajectory: Trajectory,
    /// `Φ(t)` at the final time, `Φ' = Df(φ(t)) Φ`, `Φ(0) = I`.
    pub fundamental: Mat3,
    pub events: Vec<(EventHit, Mat3)>,
}

fn variational_field(p: &Params) -> impl Fn(&[f64; 12]) -> [f64; 12] + '_ {
    move |y| {
        let s = State::from([y[0], y[1], y[2]]);
        let v = vector_field(p, &s);
        let j = jacobian(p, &s);
        let phi = Mat3::from_row_major(&y[3..]);
        let d = (j * phi).to_row_major();
        let mut out = [0.0; 12];
        out[..3].copy_from_slice(&v.to_array());
        out[3..].copy_from_slice(&d);
        out
    }
}

/// The 12-dimensional system of state plus fundamental matrix, with the same
/// step control applied to all components.
pub fn integrate_variational(p: &Params, s0: State, t_end: f64, cfg: &IntegratorConfig) -> Result<(Trajectory, Mat3)> {
    let run = integrate_variational_with_events(p, s0, t_end, cfg, &[])?;
    Ok((run.trajectory, run.fundamental))
}

pub fn integrate_variational_with_events(
    p: &Params,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<VariationalRun> {
    check_start(&s0, t_end)?;
    cfg.validate()?;
    let mut y0 = [0.0; 12];
    y0[..3].copy_from_slice(&s0.to_array());
    y0[3..].copy_from_slice(&Mat3::IDENTITY.to_row_major());
    let raw = dopri::solve(&variational_field(p), y0, t_end, cfg, events, true)?;
    let last = raw.nodes.last().expect("at least the initial node");
    let fundamental = Mat3::from_row_major(&last[3..]);
    let events = raw
        .events
        .iter()
        .map(|e| {
            (
                EventHit {
                    t: e.t,
                    state: State::from([e.y[0], e.y[1], e.y[2]]),
                    index: e.index,
                    direction: e.direction,
                },
                Mat3::from_row_major(&e.y[3..]),
            )
        })
        .collect();
    Ok(VariationalRun { trajectory: Trajectory::from_raw(&raw), fundamental, events })
}

/// Mean of one component over the window `[t0, t1]` of the trajectory.
pub fn time_average(traj: &Trajectory, c: Component, t0: f64, t1: f64) -> Result<f64> {
    traj.average(c, t0, t1)
}

/// Means of all three components over `[t0, t1]`.
pub fn time_averages(traj: &Trajectory, t0: f64, t1: f64) -> Result<[f64; 3]> {
    Ok([traj.average(Component::X, t0, t1)?, traj.average(Component::Y, t0, t1)?, traj.average(Component::Z, t0, t1)?])
}
