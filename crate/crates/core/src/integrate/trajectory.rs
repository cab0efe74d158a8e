use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Component, State};

use super::dopri::{eval_dense, Dense, RawRun};

// 5-point Gauss-Legendre on [0, 1]
const GL_NODES: [f64; 5] =
    [0.046_910_077_030_668_0, 0.230_765_344_947_158_5, 0.5, 0.769_234_655_052_841_5, 0.953_089_922_969_332];
const GL_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

/// Integration diagnostics carried with a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Accepted steps after which a concentration was clamped to zero.
    pub clamp_count: usize,
    /// Most negative concentration seen before clamping (`+inf` if none).
    pub min_pre_clamp: f64,
}

/// Accepted-step samples of a solution with the dense-output polynomial of
/// every step, so the solution can be evaluated at any time in range.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State>,
    dense: Vec<Dense<3>>,
    diagnostics: Diagnostics,
}

impl Trajectory {
    pub(crate) fn from_raw<const N: usize>(raw: &RawRun<N>) -> Self {
        let states = raw.nodes.iter().map(|y| State::from([y[0], y[1], y[2]])).collect();
        let dense = raw.dense.iter().map(|d| std::array::from_fn(|i| [d[i][0], d[i][1], d[i][2]])).collect();
        Trajectory {
            times: raw.times.clone(),
            states,
            dense,
            diagnostics: Diagnostics {
                accepted_steps: raw.dense.len(),
                rejected_steps: raw.rejected,
                clamp_count: raw.clamp_count,
                min_pre_clamp: raw.min_pre_clamp,
            },
        }
    }

    /// A trajectory that sits at `s` for all of `[t0, t1]`.
    pub fn constant(s: State, t0: f64, t1: f64) -> Self {
        let a = s.to_array();
        Trajectory {
            times: vec![t0, t1],
            states: vec![s, s],
            dense: vec![[a, [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]]],
            diagnostics: Diagnostics {
                accepted_steps: 1,
                rejected_steps: 0,
                clamp_count: 0,
                min_pre_clamp: f64::INFINITY,
            },
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn first(&self) -> State {
        self.states[0]
    }

    pub fn last(&self) -> State {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, State)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }

    /// Index of the step containing `t` and the local parameter `θ ∈ [0, 1]`.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(t >= self.t_start() && t <= self.t_end()) || self.dense.is_empty() {
            return None;
        }
        let idx = self.times.partition_point(|&ti| ti <= t);
        let seg = idx.saturating_sub(1).min(self.dense.len() - 1);
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        Some((seg, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)))
    }

    /// State at time `t`; exact at the stored samples.
    pub fn at(&self, t: f64) -> Option<State> {
        if self.dense.is_empty() {
            return (t == self.t_start()).then(|| self.states[0]);
        }
        let (seg, theta) = self.locate(t)?;
        if t == self.times[seg] {
            return Some(self.states[seg]);
        }
        if t == self.times[seg + 1] {
            return Some(self.states[seg + 1]);
        }
        Some(State::from(eval_dense(&self.dense[seg], theta)))
    }

    /// Samples at the accepted steps and at `per_step - 1` interior points of
    /// every step.
    pub fn dense_samples(&self, per_step: usize) -> Vec<(f64, State)> {
        let per_step = per_step.max(1);
        let mut out = Vec::with_capacity(self.dense.len() * per_step + 1);
        for (i, d) in self.dense.iter().enumerate() {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            out.push((t0, self.states[i]));
            for j in 1..per_step {
                let th = j as f64 / per_step as f64;
                out.push((t0 + th * (t1 - t0), State::from(eval_dense(d, th))));
            }
        }
        out.push((self.t_end(), self.last()));
        out
    }

    /// `n + 1` equally spaced samples over `[t0, t1]`.
    pub fn sample_uniform(&self, t0: f64, t1: f64, n: usize) -> Result<Vec<(f64, State)>> {
        self.check_window(t0, t1)?;
        Ok((0..=n)
            .map(|i| {
                let t = if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 };
                (t, self.at(t).expect("inside window"))
            })
            .collect())
    }

    fn check_window(&self, t0: f64, t1: f64) -> Result<()> {
        if !(t1 > t0) {
            return Err(Error::InvalidArgument(format!("empty window [{t0}, {t1}]")));
        }
        if t0 < self.t_start() || t1 > self.t_end() {
            return Err(Error::InvalidArgument(format!(
                "window [{t0}, {t1}] outside trajectory range [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok(())
    }

    /// Exact integral of the dense-output polynomial of one component over `[t0, t1]`.
    pub fn integral(&self, c: Component, t0: f64, t1: f64) -> Result<f64> {
        self.check_window(t0, t1)?;
        let ci = c.index();
        let antider = |d: &Dense<3>, th: f64| -> f64 {
            (0..5).rev().fold(0.0, |acc, p| acc * th + d[p][ci] / (p as f64 + 1.0)) * th
        };
        Ok(self.fold_segments(t0, t1, |d, a, b, h| h * (antider(d, b) - antider(d, a))))
    }

    /// Integral of `f` along the trajectory over `[t0, t1]` by 5-point
    /// Gauss-Legendre on every step.
    pub fn integral_of<F: Fn(&State) -> f64>(&self, f: F, t0: f64, t1: f64) -> Result<f64> {
        self.check_window(t0, t1)?;
        Ok(self.fold_segments(t0, t1, |d, a, b, h| {
            let w = b - a;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, wt)| wt * f(&State::from(eval_dense(d, a + w * x)))).sum::<f64>()
                * w
                * h
        }))
    }

    fn fold_segments(&self, t0: f64, t1: f64, mut piece: impl FnMut(&Dense<3>, f64, f64, f64) -> f64) -> f64 {
        let (s0, th0) = self.locate(t0).expect("checked window");
        let (s1, th1) = self.locate(t1).expect("checked window");
        // θ = 1 at the end of a step is stored as the start of the next one
        let (s1, th1) = if th1 == 0.0 && s1 > s0 { (s1 - 1, 1.0) } else { (s1, th1) };
        let mut total = 0.0;
        for seg in s0..=s1 {
            let a = if seg == s0 { th0 } else { 0.0 };
            let b = if seg == s1 { th1 } else { 1.0 };
            if b > a {
                let h = self.times[seg + 1] - self.times[seg];
                total += piece(&self.dense[seg], a, b, h);
            }
        }
        total
    }

    /// Mean of one component over `[t0, t1]`.
    pub fn average(&self, c: Component, t0: f64, t1: f64) -> Result<f64> {
        Ok(self.integral(c, t0, t1)? / (t1 - t0))
    }

    /// Minimum of `f` over the dense sample grid (4 points per step).
    pub fn min_of<F: Fn(&State) -> f64>(&self, f: F, t0: f64, t1: f64) -> f64 {
        self.dense_samples(4)
            .into_iter()
            .filter(|(t, _)| *t >= t0 && *t <= t1)
            .map(|(_, s)| f(&s))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_of<F: Fn(&State) -> f64>(&self, f: F, t0: f64, t1: f64) -> f64 {
        -self.min_of(|s| -f(s), t0, t1)
    }

    /// The same curve traversed backwards, re-timed to start at `t_start`.
    pub fn reversed(&self, t_start: f64) -> Trajectory {
        let t_end = self.t_end();
        let times = self.times.iter().rev().map(|t| t_start + (t_end - t)).collect();
        let states = self.states.iter().rev().copied().collect();
        let dense = self.dense.iter().rev().map(reflect_dense).collect();
        Trajectory { times, states, dense, diagnostics: self.diagnostics }
    }

    /// CSV with header `t,x,y,z`, 17 significant digits, LF line endings.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_csv_rows(w, self.samples())
    }
}

pub fn write_csv_rows<W: Write>(w: &mut W, rows: impl IntoIterator<Item = (f64, State)>) -> io::Result<()> {
    w.write_all(b"t,x,y,z\n")?;
    for (t, s) in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", t, s.x, s.y, s.z)?;
    }
    Ok(())
}

/// Coefficients of `θ ↦ P(1 - θ)`.
fn reflect_dense(d: &Dense<3>) -> Dense<3> {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut out = [[0.0; 3]; 5];
    for (p, coeff) in d.iter().enumerate() {
        // (1 - θ)^p = Σ_j C(p, j) (-θ)^j
        for j in 0..=p {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..3 {
                out[j][i] += coeff[i] * BINOM[p][j] * sign;
            }
        }
    }
    out
}
