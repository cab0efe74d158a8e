//! Closed-form eigenanalysis of 3x3 matrices and linear stability of the equilibria.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_regime, jacobian, vector_field, Mat3, Params, Regime, State};

/// Monic cubic `λ³ + c2 λ² + c1 λ + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicCoeffs {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CubicCoeffs {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        ((z + self.c2) * z + self.c1) * z + self.c0
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        (3.0 * z + 2.0 * self.c2) * z + self.c1
    }

    /// Coefficients of `(λ - r1)(λ - r2)(λ - r3)`, real parts only.
    pub fn from_roots(r: &[Complex64; 3]) -> Self {
        let c2 = -(r[0] + r[1] + r[2]);
        let c1 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let c0 = -(r[0] * r[1] * r[2]);
        CubicCoeffs { c2: c2.re, c1: c1.re, c0: c0.re }
    }
}

pub fn char_poly(m: &Mat3) -> CubicCoeffs {
    CubicCoeffs { c2: -m.trace(), c1: m.principal_minor_sum(), c0: -m.det() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumClass {
    AllNegativeRealParts,
    HasPositiveRealPart,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spectrum {
    /// Sorted by decreasing real part; a conjugate pair is stored with the
    /// positive imaginary part first.
    pub roots: [Complex64; 3],
    pub class: SpectrumClass,
}

impl Spectrum {
    fn new(mut roots: [Complex64; 3]) -> Self {
        roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let radius = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let max_re = roots[0].re;
        let class = if max_re.abs() <= 1e-9 * radius.max(1.0) {
            SpectrumClass::Marginal
        } else if max_re < 0.0 {
            SpectrumClass::AllNegativeRealParts
        } else {
            SpectrumClass::HasPositiveRealPart
        };
        Spectrum { roots, class }
    }

    pub fn max_real_part(&self) -> f64 {
        self.roots[0].re
    }

    pub fn spectral_radius(&self) -> f64 {
        self.roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    pub fn real_roots(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots.iter().filter(|r| r.im == 0.0).map(|r| r.re)
    }

    pub fn has_complex_pair(&self) -> bool {
        self.roots.iter().any(|r| r.im != 0.0)
    }
}

/// All three roots of the cubic, by the discriminant method followed by at
/// most five Newton steps per root. Complex roots are returned as an exact
/// conjugate pair.
pub fn cubic_roots(c: &CubicCoeffs) -> Spectrum {
    let shift = c.c2 / 3.0;
    // depressed cubic t³ + p t + q with λ = t - c2/3
    let p = c.c1 - c.c2 * c.c2 / 3.0;
    let q = 2.0 * c.c2.powi(3) / 27.0 - c.c2 * c.c1 / 3.0 + c.c0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots = if p == 0.0 && q == 0.0 {
        [Complex64::new(0.0, 0.0); 3]
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        // pick the sign that avoids cancellation
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let re = -(u + v) / 2.0;
        let im = 3f64.sqrt() / 2.0 * (u - v).abs();
        [Complex64::new(u + v, 0.0), Complex64::new(re, im), Complex64::new(re, -im)]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|j| Complex64::new(r * (phi - 2.0 * PI * j / 3.0).cos(), 0.0))
    };
    for r in roots.iter_mut() {
        *r -= shift;
        *r = polish(c, *r);
    }
    // restore exact structure after polishing
    if roots[1].im != 0.0 {
        roots[0].im = 0.0;
        let pair = if roots[1].im > 0.0 { roots[1] } else { roots[2].conj() };
        roots[1] = pair;
        roots[2] = pair.conj();
    } else {
        roots.iter_mut().for_each(|r| r.im = 0.0);
    }
    Spectrum::new(roots)
}

fn polish(c: &CubicCoeffs, mut z: Complex64) -> Complex64 {
    let mut res = c.eval(z).norm();
    for _ in 0..5 {
        if res == 0.0 {
            break;
        }
        let d = c.derivative(z);
        if d.norm() < 1e-300 {
            break;
        }
        let candidate = z - c.eval(z) / d;
        let cres = c.eval(candidate).norm();
        if cres < res {
            z = candidate;
            res = cres;
        } else {
            break;
        }
    }
    z
}

pub fn eigenvalues(m: &Mat3) -> Spectrum {
    cubic_roots(&char_poly(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumStability {
    pub equilibrium: State,
    pub stability: Stability,
    pub spectrum: Spectrum,
    pub char_poly: CubicCoeffs,
    /// Routh-Hurwitz: `c2 > 0`, `c0 > 0` and `c2 c1 > c0`.
    pub routh_hurwitz_stable: bool,
    /// Whether the Routh-Hurwitz verdict matches the eigenvalue-based tag.
    pub routh_hurwitz_agrees: bool,
}

/// Linear stability of an equilibrium from its Jacobian spectrum.
pub fn classify_equilibrium(p: &Params, e: &State) -> Result<EquilibriumStability> {
    let residual = vector_field(p, e).norm();
    if !(residual < 1e-10) {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let cp = char_poly(&jacobian(p, e));
    let spectrum = cubic_roots(&cp);
    let stability = match spectrum.class {
        SpectrumClass::AllNegativeRealParts => Stability::Stable,
        SpectrumClass::HasPositiveRealPart => Stability::Unstable,
        SpectrumClass::Marginal => Stability::Marginal,
    };
    let rh = cp.c2 > 0.0 && cp.c0 > 0.0 && cp.c2 * cp.c1 > cp.c0;
    Ok(EquilibriumStability {
        equilibrium: *e,
        stability,
        spectrum,
        char_poly: cp,
        routh_hurwitz_stable: rh,
        routh_hurwitz_agrees: rh == (stability == Stability::Stable),
    })
}

/// Hopf point `(k_H, ω) = (k3 + k5, sqrt(k3 k5))`: at `k = k_H` the
/// characteristic polynomial of `E` has the roots `±iω`.
pub fn hopf_point(k3: f64, k5: f64) -> Result<(f64, f64)> {
    if !(k3 > 0.0 && k5 > 0.0 && k3.is_finite() && k5.is_finite()) {
        return Err(Error::InvalidParams(format!("k3 and k5 must be positive, got {k3}, {k5}")));
    }
    Ok((k3 + k5, (k3 * k5).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableEigenpair {
    pub eigenvalue: f64,
    /// Unit vector with positive x-component.
    pub vector: [f64; 3],
}

/// Eigenvector of the single negative real eigenvalue of the Jacobian at `E`
/// when `k > k3 + k5`. Its sign pattern is `(+, +, -)`.
pub fn stable_eigenvector_at_e(p: &Params) -> Result<StableEigenpair> {
    let regime = classify_regime(p, 0.0);
    if regime != Regime::Oscillatory {
        return Err(Error::RegimeMismatch { expected: "k > k3 + k5", actual: regime });
    }
    let j = jacobian(p, &p.interior_equilibrium());
    let spectrum = eigenvalues(&j);
    let lambda = spectrum.real_roots().filter(|r| *r < 0.0).fold(f64::NAN, f64::min);
    if !lambda.is_finite() {
        return Err(Error::NoConvergence("no negative real eigenvalue at E".to_string()));
    }
    let v = null_vector(&(j - Mat3::IDENTITY.scale(lambda)));
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
    Ok(StableEigenpair { eigenvalue: lambda, vector: v.map(|c| sign * c / n) })
}

/// Null vector of a rank-2 matrix from the best-conditioned cross product of two rows.
fn null_vector(m: &Mat3) -> [f64; 3] {
    let cross =
        |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let rows = m.0;
    [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .map(|(i, j)| cross(rows[i], rows[j]))
        .max_by(|a, b| {
            let na: f64 = a.iter().map(|c| c * c).sum();
            let nb: f64 = b.iter().map(|c| c * c).sum();
            na.total_cmp(&nb)
        })
        .expect("three candidate pairs")
}
