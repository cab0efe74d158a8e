//! Dormand-Prince 5(4) with the continuous extension of Hairer, Nørsett and
//! Wanner, generic over the state dimension.

use crate::error::IntegrationError;
use crate::model::State;

use super::{Direction, EventSpec, IntegratorConfig};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Dense-output polynomial of one step in monomial form:
/// `y(t0 + θ h) = Σ_i coeffs[i] θ^i`, `θ ∈ [0, 1]`.
pub(crate) type Dense<const N: usize> = [[f64; N]; 5];

pub(crate) fn eval_dense<const N: usize>(d: &Dense<N>, theta: f64) -> [f64; N] {
    std::array::from_fn(|i| (((d[4][i] * theta + d[3][i]) * theta + d[2][i]) * theta + d[1][i]) * theta + d[0][i])
}

pub(crate) struct Step<const N: usize> {
    pub y1: [f64; N],
    pub f1: [f64; N],
    pub err: f64,
    pub dense: Dense<N>,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

pub(crate) fn step<const N: usize, F>(f: &F, y0: &[f64; N], k1: &[f64; N], h: f64, cfg: &IntegratorConfig) -> Step<N>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k2 = f(&axpy(y0, h, &[(A21, k1)]));
    let k3 = f(&axpy(y0, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&axpy(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y0, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(&y1);

    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        sum += (e / sk).powi(2);
    }
    let err = (sum / N as f64).sqrt();

    let mut dense = [[0.0; N]; 5];
    for i in 0..N {
        let r1 = y0[i];
        let r2 = y1[i] - y0[i];
        let r3 = h * k1[i] - r2;
        let r4 = r2 - h * k7[i] - r3;
        let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        dense[0][i] = r1;
        dense[1][i] = r2 + r3;
        dense[2][i] = -r3 + r4 + r5;
        dense[3][i] = -r4 - 2.0 * r5;
        dense[4][i] = r5;
    }
    Step { y1, f1: k7, err, dense }
}

fn initial_step<const N: usize, F>(f: &F, y0: &[f64; N], f0: &[f64; N], cfg: &IntegratorConfig) -> f64
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let sk: [f64; N] = std::array::from_fn(|i| cfg.abs_tol + cfg.rel_tol * y0[i].abs());
    let dnf: f64 = (0..N).map(|i| (f0[i] / sk[i]).powi(2)).sum();
    let dny: f64 = (0..N).map(|i| (y0[i] / sk[i]).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(cfg.max_step);
    let y1: [f64; N] = std::array::from_fn(|i| y0[i] + h * f0[i]);
    let f1 = f(&y1);
    let der2 = (0..N).map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2)).sum::<f64>().sqrt() / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(cfg.max_step)
}

#[derive(Debug, Clone)]
pub(crate) struct RawEvent<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub index: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub(crate) struct RawRun<const N: usize> {
    pub times: Vec<f64>,
    pub nodes: Vec<[f64; N]>,
    pub dense: Vec<Dense<N>>,
    pub events: Vec<RawEvent<N>>,
    pub terminated: bool,
    pub clamp_count: usize,
    pub min_pre_clamp: f64,
    pub rejected: usize,
}

fn head<const N: usize>(y: &[f64; N]) -> State {
    State::from([y[0], y[1], y[2]])
}

/// Integrates `y' = f(y)` on `[0, t_end]`. When `clamp` is set, the first
/// three components are projected onto the nonnegative half-line after each
/// accepted step; `min_pre_clamp` records how far below zero they were.
pub(crate) fn solve<const N: usize, F>(
    f: &F,
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    events: &[EventSpec],
    clamp: bool,
) -> Result<RawRun<N>, IntegrationError>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    assert!(N >= 3, "the first three components carry the concentrations");
    let mut run = RawRun {
        times: vec![0.0],
        nodes: vec![y0],
        dense: Vec::new(),
        events: Vec::new(),
        terminated: false,
        clamp_count: 0,
        min_pre_clamp: f64::INFINITY,
        rejected: 0,
    };
    if t_end <= 0.0 {
        return Ok(run);
    }
    let mut t = 0.0;
    let mut y = y0;
    let mut fy = f(&y);
    let mut h = cfg.initial_step.unwrap_or_else(|| initial_step(f, &y, &fy, cfg)).min(t_end);
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(&head(&y))).collect();
    let mut fac_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(IntegrationError::MaxSteps { max_steps: cfg.max_steps, t });
        }
        steps += 1;
        if t_end - t <= 1e-14 * t.abs().max(1.0) {
            // remaining interval is below time resolution
            *run.times.last_mut().expect("nonempty") = t_end;
            break;
        }
        let last = t + h * 1.000_000_1 >= t_end;
        if last {
            h = t_end - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegrationError::StepUnderflow { h, t });
        }
        let st = step(f, &y, &fy, h, cfg);
        let err = if st.y1.iter().all(|v| v.is_finite()) { st.err } else { f64::INFINITY };

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let mut fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            if last_rejected {
                fac = fac.max(1.0);
            }
            fac_old = err.max(1e-4);
            let t_new = if last { t_end } else { t + h };
            let mut y1 = st.y1;
            let mut f1 = st.f1;
            if clamp {
                let mut touched = false;
                for v in y1.iter_mut().take(3) {
                    if *v < 0.0 {
                        run.min_pre_clamp = run.min_pre_clamp.min(*v);
                        *v = 0.0;
                        touched = true;
                    }
                }
                if touched {
                    run.clamp_count += 1;
                    f1 = f(&y1);
                }
            }

            // events within (t, t_new]
            let mut hits: Vec<(f64, usize, Direction)> = Vec::new();
            let g_new: Vec<f64> = events.iter().map(|e| (e.g)(&head(&y1))).collect();
            for (i, ev) in events.iter().enumerate() {
                let (a, b) = (g_prev[i], g_new[i]);
                let dir = if a < 0.0 && b >= 0.0 {
                    Direction::Rising
                } else if a > 0.0 && b <= 0.0 {
                    Direction::Falling
                } else {
                    continue;
                };
                if !ev.direction.accepts(dir) {
                    continue;
                }
                let theta = locate(&|th| (ev.g)(&head(&eval_dense(&st.dense, th))), a, b);
                hits.push((theta, i, dir));
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut truncated = None;
            for (theta, i, dir) in hits {
                let (tau, y_ev) = polish_event(f, &y, &fy, h, theta, &st.dense, &events[i], cfg);
                run.events.push(RawEvent { t: t + tau, y: y_ev, index: i, direction: dir });
                if events[i].terminal {
                    truncated = Some(tau);
                    break;
                }
            }

            if let Some(tau) = truncated {
                let ev = run.events.last().expect("terminal event recorded");
                let tail = step(f, &y, &fy, tau, cfg);
                run.times.push(ev.t);
                run.nodes.push(ev.y);
                run.dense.push(tail.dense);
                run.terminated = true;
                return Ok(run);
            }

            run.times.push(t_new);
            run.nodes.push(y1);
            run.dense.push(st.dense);
            t = t_new;
            y = y1;
            fy = f1;
            g_prev = events.iter().map(|e| (e.g)(&head(&y))).collect();
            h = (h / fac).min(cfg.max_step);
            last_rejected = false;
        } else {
            run.rejected += 1;
            let shrink = if err.is_finite() { (fac11 / SAFETY).min(1.0 / FAC_MIN) } else { 10.0 };
            h /= shrink;
            last_rejected = true;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(IntegrationError::NonFinite { t });
        }
    }
    Ok(run)
}

/// Illinois iteration for a sign change of `phi` on `[0, 1]`.
fn locate(phi: &dyn Fn(f64) -> f64, g0: f64, g1: f64) -> f64 {
    if g1 == 0.0 {
        return 1.0;
    }
    let (mut a, mut fa, mut b, mut fb) = (0.0, g0, 1.0, g1);
    let mut best = (1.0, g1.abs());
    for _ in 0..200 {
        let c = ((a * fb - b * fa) / (fb - fa)).clamp(0.0, 1.0);
        let fc = phi(c);
        if fc.abs() < best.1 {
            best = (c, fc.abs());
        }
        if fc == 0.0 || fc.abs() < 1e-14 || (b - a).abs() < 1e-16 {
            break;
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    best.0
}

/// Refines an event located on the interpolant by Newton iteration on the
/// length of a direct step from the start of the current step.
#[allow(clippy::too_many_arguments)]
fn polish_event<const N: usize, F>(
    f: &F,
    y0: &[f64; N],
    f0: &[f64; N],
    h: f64,
    theta: f64,
    dense: &Dense<N>,
    ev: &EventSpec,
    cfg: &IntegratorConfig,
) -> (f64, [f64; N])
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let interp = eval_dense(dense, theta);
    let g_interp = (ev.g)(&head(&interp)).abs();
    let mut best: Option<(f64, [f64; N], f64)> = None;
    let mut tau = theta * h;
    for _ in 0..4 {
        let st = step(f, y0, f0, tau, cfg);
        let s = head(&st.y1);
        let g = (ev.g)(&s);
        match best {
            Some((_, _, bg)) if g.abs() >= bg => break,
            _ => best = Some((tau, st.y1, g.abs())),
        }
        if g == 0.0 {
            break;
        }
        // dg/dt along the flow by a central difference in state space
        let v = head(&st.f1);
        let vn = v.norm();
        if vn == 0.0 {
            break;
        }
        let eps = 1e-7 * (1.0 + s.norm()) / vn;
        let dg = ((ev.g)(&(s + eps * v)) - (ev.g)(&(s - eps * v))) / (2.0 * eps);
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = tau - g / dg;
        if !(next > 0.0 && next <= h * (1.0 + 1e-9)) || next == tau {
            break;
        }
        tau = next;
    }
    match best {
        Some((tau, y, g)) if g <= g_interp.max(1e-13) => (tau, y),
        _ => (theta * h, interp),
    }
}
