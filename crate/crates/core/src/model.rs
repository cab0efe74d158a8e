//! The scaled reaction system
//!
//! ```text
//! x' = k x - x y
//! y' = k3 (z - y)
//! z' = k5 (x - z)
//! ```
//!
//! together with its Jacobian, the second additive compound of the Jacobian,
//! the equilibria and the regime classification in `k`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate constants of the unscaled mass-action system
///
/// ```text
/// x' = k x - k2 x y,   y' = k5 z - k3 y,   z' = k4 x - k5 z,   k = k1 A - k4
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    /// Concentration of the outer reactant of the autocatalytic step.
    pub a: f64,
}

/// Concentration scale factors `x = a * x_bar`, `y = b * y_bar`, `z = c * z_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleFactors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl OriginalParams {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, k5: f64, a: f64) -> Result<Self> {
        let op = Self { k1, k2, k3, k4, k5, a };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.k1, self.k2, self.k3, self.k4, self.k5];
        if rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidParams(format!("rate constants must be finite and positive, got {rates:?}")));
        }
        if !self.a.is_finite() || self.a < 0.0 {
            return Err(Error::InvalidParams(format!(
                "outer reactant concentration must be nonnegative, got {}",
                self.a
            )));
        }
        Ok(())
    }

    /// Net autocatalytic rate `k1 A - k4`; may be negative.
    pub fn net_rate(&self) -> f64 {
        self.k1 * self.a - self.k4
    }

    /// Right-hand side of the unscaled system.
    pub fn vector_field(&self, s: &State) -> State {
        let k = self.net_rate();
        State { x: k * s.x - self.k2 * s.x * s.y, y: self.k5 * s.z - self.k3 * s.y, z: self.k4 * s.x - self.k5 * s.z }
    }
}

/// Scaled parameters and the scale factors solving
/// `k2 b = 1`, `k5 c = k3 b`, `k4 a = k5 c`.
pub fn scale_from_original(op: &OriginalParams) -> Result<(Params, ScaleFactors)> {
    op.validate()?;
    let b = 1.0 / op.k2;
    let c = op.k3 * b / op.k5;
    let a = op.k5 * c / op.k4;
    let p = Params::new(op.net_rate(), op.k3, op.k5)?;
    Ok((p, ScaleFactors { a, b, c }))
}

/// Parameters `(k, k3, k5)` of the scaled system. `k` is unrestricted in sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    k: f64,
    k3: f64,
    k5: f64,
}

impl Params {
    pub fn new(k: f64, k3: f64, k5: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidParams(format!("k must be finite, got {k}")));
        }
        if !(k3.is_finite() && k3 > 0.0 && k5.is_finite() && k5 > 0.0) {
            return Err(Error::InvalidParams(format!("k3 and k5 must be positive, got k3 = {k3}, k5 = {k5}")));
        }
        Ok(Self { k, k3, k5 })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k3(&self) -> f64 {
        self.k3
    }

    pub fn k5(&self) -> f64 {
        self.k5
    }

    /// Hopf threshold `k3 + k5`.
    pub fn hopf_threshold(&self) -> f64 {
        self.k3 + self.k5
    }

    /// Same `k3`, `k5` with a different `k`.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(k, self.k3, self.k5)
    }

    /// Interior equilibrium `E = k (1, 1, 1)`; only meaningful for `k > 0`.
    pub fn interior_equilibrium(&self) -> State {
        State::from([self.k; 3])
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self, default_hopf_tolerance(self))
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k = {}, k3 = {}, k5 = {})", self.k, self.k3, self.k5)
    }
}

/// A point `(x, y, z)` of concentrations.
///
/// [`State::new`] rejects points outside the closed nonnegative octant; the
/// `From<[f64; 3]>` conversion is unchecked because the linearised machinery
/// is also evaluated at arbitrary finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::X, Component::Y, Component::Z];

    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
            Component::Z => 2,
        }
    }
}

impl State {
    pub const ORIGIN: State = State { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        if !s.is_finite() {
            return Err(Error::InvalidState(format!("non-finite coordinates {s:?}")));
        }
        if x < 0.0 || y < 0.0 || z < 0.0 {
            return Err(Error::InvalidState(format!("concentrations must be nonnegative, got {s:?}")));
        }
        Ok(s)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::X => self.x,
            Component::Y => self.y,
            Component::Z => self.z,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min_component(&self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn max_component(&self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn dot(&self, other: &State) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn distance(&self, other: &State) -> f64 {
        (*self - *other).norm()
    }
}

impl From<[f64; 3]> for State {
    fn from(v: [f64; 3]) -> Self {
        State { x: v[0], y: v[1], z: v[2] }
    }
}

impl From<State> for [f64; 3] {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::from([self.x + o.x, self.y + o.y, self.z + o.z])
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::from([self.x - o.x, self.y - o.y, self.z - o.z])
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        State::from([self * s.x, self * s.y, self * s.z])
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        -1.0 * self
    }
}

/// Dense 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Mat3(rows)
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Mat3::ZERO;
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    /// Reads nine entries in row-major order.
    pub fn from_row_major(v: &[f64]) -> Self {
        assert_eq!(v.len(), 9, "Mat3 needs 9 entries");
        let mut m = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = v[3 * i + j];
            }
        }
        m
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.0[i][j];
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Sum of the three principal 2x2 minors.
    pub fn principal_minor_sum(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[1][1] - m[0][1] * m[1][0])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[1][1] * m[2][2] - m[1][2] * m[2][1])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn scale(&self, c: f64) -> Mat3 {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|e| *e *= c);
        out
    }

    /// Induced max-norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|row| row.iter().map(|e| e.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat3) -> f64 {
        self.0.iter().flatten().zip(other.0.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|l| self.0[i][l] * o.0[l][j]).sum();
            }
        }
        out
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

/// Qualitative regime in `k` for fixed `k3`, `k5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `k <= 0`: everything decays to the origin.
    GlobalDecay,
    /// `0 < k < k3 + k5`: interior equilibrium attracts everything off the face `x = 0`.
    StableInterior,
    /// `k > k3 + k5`: generic solutions approach a periodic orbit.
    Oscillatory,
    /// `k = k3 + k5` up to the classification tolerance.
    HopfBoundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::GlobalDecay => "global_decay",
            Regime::StableInterior => "stable_interior",
            Regime::Oscillatory => "oscillatory",
            Regime::HopfBoundary => "hopf_boundary",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `1e-9 * (k3 + k5)`.
pub fn default_hopf_tolerance(p: &Params) -> f64 {
    1e-9 * p.hopf_threshold()
}

pub fn classify_regime(p: &Params, tol: f64) -> Regime {
    let threshold = p.hopf_threshold();
    if p.k <= 0.0 {
        Regime::GlobalDecay
    } else if (p.k - threshold).abs() <= tol {
        Regime::HopfBoundary
    } else if p.k < threshold {
        Regime::StableInterior
    } else {
        Regime::Oscillatory
    }
}

pub fn vector_field(p: &Params, s: &State) -> State {
    State { x: p.k * s.x - s.x * s.y, y: p.k3 * (s.z - s.y), z: p.k5 * (s.x - s.z) }
}

pub fn jacobian(p: &Params, s: &State) -> Mat3 {
    Mat3([[p.k - s.y, -s.x, 0.0], [0.0, -p.k3, p.k3], [p.k5, 0.0, -p.k5]])
}

/// Second additive compound of the Jacobian, in the basis
/// `(e1^e2, e1^e3, e2^e3)`.
pub fn second_additive_compound(p: &Params, s: &State) -> Mat3 {
    Mat3([[p.k - s.y - p.k3, p.k3, 0.0], [0.0, p.k - s.y - p.k5, -s.x], [-p.k5, 0.0, -(p.k3 + p.k5)]])
}

/// The origin, plus `E = k (1, 1, 1)` when `k > 0`.
pub fn equilibria(p: &Params) -> Vec<State> {
    if p.k > 0.0 {
        vec![State::ORIGIN, p.interior_equilibrium()]
    } else {
        vec![State::ORIGIN]
    }
}

/// Whether the Jacobian at `s` is competitive after the reflection `z -> -z`,
/// i.e. `D J D` has nonpositive off-diagonal entries with `D = diag(1, 1, -1)`.
///
/// The sign pattern is the feedback loop `x -(+)-> z -(+)-> y -(-)-> x`.
pub fn is_competitive(p: &Params, s: &State) -> bool {
    let reflect = Mat3::diag([1.0, 1.0, -1.0]);
    let m = reflect * jacobian(p, s) * reflect;
    (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)] <= 0.0))
}
