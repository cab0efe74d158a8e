use hopf_core::bendixson::{auto_epsilon, b_matrix, lozinskii_max_norm, mu_closed_form, q2_bar, CertificateConfig};
use hopf_core::integrate::{integrate, IntegratorConfig};
use hopf_core::model::{second_additive_compound, vector_field, Mat3, Params, State};
use hopf_core::orbits::{orbit_census, OrbitConfig};
use hopf_core::sampling::{seeded_rng, uniform_box};
use proptest::prelude::*;

fn p(k: f64, k3: f64, k5: f64) -> Params {
    Params::new(k, k3, k5).unwrap()
}

/// `A_f A⁻¹ + A Df^[2] A⁻¹` with `A = diag((1-2ε)/x, (1-ε)/x, -1/k5)`, where
/// `A_f` is the derivative of `A` along the flow.
fn b_from_definition(q: &Params, s: &State, eps: f64) -> Mat3 {
    let a = [(1.0 - 2.0 * eps) / s.x, (1.0 - eps) / s.x, -1.0 / q.k5()];
    let xdot = vector_field(q, s).x;
    // d/dt (c / x) = -c x' / x²
    let af = [-a[0] * xdot / s.x, -a[1] * xdot / s.x, 0.0];
    let c = second_additive_compound(q, s);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i] * c[(i, j)] / a[j];
        }
        out[i][i] += af[i] / a[i];
    }
    Mat3::from_rows(out)
}

/// `(‖I + hM‖ - 1) / h` with the max-row-sum operator norm.
fn measure_by_difference(m: &Mat3, h: f64) -> f64 {
    let step = Mat3::IDENTITY + m.scale(h);
    (step.norm_inf() - 1.0) / h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn closed_form_measure_matches_row_definition(
        k in 0.01f64..5.0, k3 in 0.1f64..5.0, k5 in 0.1f64..5.0,
        x in 1e-3f64..50.0, y in 0.0f64..50.0, z in 0.0f64..50.0, eps in 1e-4f64..0.4999,
    ) {
        let q = p(k, k3, k5);
        let b = b_matrix(&q, &State::from([x, y, z]), eps).unwrap();
        let closed = mu_closed_form(&q, x, eps);
        prop_assert!((lozinskii_max_norm(&b) - closed).abs() <= 1e-12 * (1.0 + closed.abs()));
    }

    #[test]
    fn closed_form_b_matches_its_definition(
        k in -2.0f64..5.0, k3 in 0.1f64..5.0, k5 in 0.1f64..5.0,
        x in 1e-2f64..50.0, y in 0.0f64..50.0, z in 0.0f64..50.0, eps in 1e-3f64..0.49,
    ) {
        let q = p(k, k3, k5);
        let s = State::from([x, y, z]);
        let b = b_matrix(&q, &s, eps).unwrap();
        let d = b_from_definition(&q, &s, eps);
        prop_assert!(b.max_abs_diff(&d) <= 1e-10 * (1.0 + b.norm_inf()), "{b:?} {d:?}");
    }

    #[test]
    fn auto_epsilon_is_feasible(k in 1e-3f64..10.0, k3 in 0.1f64..5.0, k5 in 0.1f64..5.0) {
        let q = p(k, k3, k5);
        if k < k3 + k5 {
            let e = auto_epsilon(&q).unwrap();
            prop_assert!(e > 0.0 && e < 0.5);
            prop_assert!(k / (1.0 - 2.0 * e) < k3 + k5);
        } else {
            prop_assert!(auto_epsilon(&q).is_err());
        }
    }
}

#[test]
fn measure_agrees_with_difference_quotient() {
    let q = p(1.0, 1.0, 1.0);
    let mut rng = seeded_rng(4);
    for _ in 0..100 {
        let s = uniform_box(&mut rng, 0.01, 5.0);
        let b = b_matrix(&q, &s, 0.125).unwrap();
        let fd = measure_by_difference(&b, 1e-7);
        assert!((fd - lozinskii_max_norm(&b)).abs() < 1e-5, "{fd} vs {}", lozinskii_max_norm(&b));
    }
}

#[test]
fn certificate_at_reference_point() {
    let q = p(1.0, 1.0, 1.0);
    let c = q2_bar(&q, &CertificateConfig::default(), &IntegratorConfig::default()).unwrap();
    assert_eq!(c.epsilon, 0.125);
    assert_eq!(c.n_starts, 64);
    assert!(c.pass);
    // solutions settle at E where μ(B) = max(-1/7, -1/8, 4/3 - 2) = -1/8
    assert!(c.q2_bar <= -0.125 + 1e-6, "{}", c.q2_bar);
    assert!(c.q2_bar >= -0.125 - 1e-6, "{}", c.q2_bar);
    let json = c.to_json();
    for key in ["params", "epsilon", "horizon", "n_starts", "q2_bar", "margin", "pass"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn certificate_passes_close_to_threshold() {
    let q = p(1.9, 1.0, 1.0);
    let c = q2_bar(&q, &CertificateConfig::default(), &IntegratorConfig::default()).unwrap();
    assert!(c.pass, "{c:?}");
}

#[test]
fn margin_shrinks_toward_threshold() {
    let cfg = IntegratorConfig::default();
    let cc = CertificateConfig { eta: Some(1e-3), ..Default::default() };
    let margins: Vec<f64> =
        [0.5, 0.8, 1.1, 1.4, 1.7, 1.9].iter().map(|&k| q2_bar(&p(k, 1.0, 1.0), &cc, &cfg).unwrap().margin).collect();
    for w in margins.windows(2) {
        assert!(w[1] <= w[0] + 1e-4, "{margins:?}");
    }
    assert!(margins.iter().all(|m| *m > 0.0));
}

#[test]
fn passing_certificate_agrees_with_dynamics() {
    let cfg = IntegratorConfig::default();
    for q in [p(1.0, 1.0, 1.0), p(0.6, 0.5, 2.0)] {
        let c = q2_bar(&q, &CertificateConfig { grid_per_axis: 3, ..Default::default() }, &cfg).unwrap();
        assert!(c.pass);
        assert!(orbit_census(&q, 4, 1e-3, &OrbitConfig::default()).is_err());
        let e = q.interior_equilibrium();
        let mut rng = seeded_rng(9);
        for _ in 0..20 {
            let s0 = uniform_box(&mut rng, 0.01, 10.0);
            let end = integrate(&q, s0, 2000.0, &cfg).unwrap().last();
            assert!(end.distance(&e) < 1e-6, "{q}: {s0:?} -> {end:?}");
        }
    }
}
