use hopf_core::integrate::{
    integrate, integrate_variational, integrate_with_events, time_averages, Direction, EventSpec, IntegratorConfig,
};
use hopf_core::model::{jacobian, Component, Mat3, Params, State};
use hopf_core::sampling::{seeded_rng, uniform_box};

fn p(k: f64, k3: f64, k5: f64) -> Params {
    Params::new(k, k3, k5).unwrap()
}

/// Fixed step `h`: tolerances loose enough that no step is rejected and the
/// step can never grow past `max_step`.
fn fixed_step(h: f64) -> IntegratorConfig {
    IntegratorConfig { rel_tol: 1e3, abs_tol: 1e3, max_step: h, max_steps: 10_000_000, initial_step: Some(h) }
}

#[test]
fn fifth_order_convergence_under_step_halving() {
    let q = p(3.0, 1.0, 1.0);
    let s0 = State::from([1.0, 1.5, 2.0]);
    let reference = integrate(&q, s0, 20.0, &IntegratorConfig::with_tolerances(1e-13, 1e-15)).unwrap().last();
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| integrate(&q, s0, 20.0, &fixed_step(h)).unwrap().last().distance(&reference))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        // 2^5 = 32
        assert!((20.0..50.0).contains(&ratio), "errors {errs:?}");
    }
}

#[test]
fn adaptive_error_tracks_tolerance() {
    let q = p(3.0, 1.0, 1.0);
    let s0 = State::from([1.0, 1.5, 2.0]);
    let reference = integrate(&q, s0, 20.0, &IntegratorConfig::with_tolerances(1e-13, 1e-15)).unwrap().last();
    let loose = integrate(&q, s0, 20.0, &IntegratorConfig::with_tolerances(1e-7, 1e-9)).unwrap();
    let tight = integrate(&q, s0, 20.0, &IntegratorConfig::with_tolerances(1e-10, 1e-12)).unwrap();
    let e_loose = loose.last().distance(&reference);
    let e_tight = tight.last().distance(&reference);
    assert!(e_tight < 1e-7, "{e_tight}");
    assert!(e_loose / e_tight > 30.0, "{e_loose} {e_tight}");
    assert!(tight.len() > loose.len());
}

#[test]
fn octant_is_forward_invariant() {
    let mut rng = seeded_rng(11);
    let cfg = IntegratorConfig::default();
    let params = [p(-1.0, 1.0, 1.0), p(1.0, 1.0, 1.0), p(3.0, 1.0, 1.0)];
    let mut worst = f64::INFINITY;
    for i in 0..1000 {
        let s0 = uniform_box(&mut rng, 0.0, 10.0);
        let tr = integrate(&params[i % 3], s0, 40.0, &cfg).unwrap();
        worst = worst.min(tr.diagnostics().min_pre_clamp);
        assert!(tr.states().iter().all(|s| s.min_component() >= 0.0));
    }
    assert!(worst >= -1e-12, "{worst}");
}

#[test]
fn section_crossings_alternate_on_the_cycle() {
    let q = p(3.0, 1.0, 1.0);
    let events = [EventSpec::new(|s: &State| s.y - 3.0, Direction::Both, false)];
    let (tr, hits) =
        integrate_with_events(&q, State::from([1.0, 1.5, 2.0]), 200.0, &IntegratorConfig::default(), &events).unwrap();
    assert!(hits.len() > 20);
    for w in hits.windows(2) {
        assert_ne!(w[0].direction, w[1].direction);
        assert!(w[1].t > w[0].t);
    }
    for h in &hits {
        assert!((h.state.y - 3.0).abs() < 1e-12);
        let interp = tr.at(h.t).unwrap();
        assert!((interp.y - 3.0).abs() < 1e-10, "{}", interp.y - 3.0);
    }
}

#[test]
fn terminal_event_stops_integration() {
    let q = p(3.0, 1.0, 1.0);
    let events = [EventSpec::new(|s: &State| s.y - 2.0, Direction::Falling, true)];
    let (tr, hits) =
        integrate_with_events(&q, State::from([1.0, 3.0, 1.0]), 100.0, &IntegratorConfig::default(), &events).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(tr.t_end(), hits[0].t);
    assert_eq!(tr.last(), hits[0].state);
    assert!((tr.last().y - 2.0).abs() < 1e-12);
}

/// exp(A) by scaling and squaring of a long Taylor series.
fn expm(a: &Mat3) -> Mat3 {
    let squarings = 10;
    let a = a.scale(1.0 / f64::from(1 << squarings));
    let mut term = Mat3::IDENTITY;
    let mut sum = Mat3::IDENTITY;
    for n in 1..30 {
        term = (term * a).scale(1.0 / n as f64);
        sum = sum + term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

#[test]
fn fundamental_matrix_near_origin_matches_exponential() {
    let q = p(-1.0, 1.0, 1.0);
    let s0 = State::from([1e-6; 3]);
    for t in [0.1, 0.5, 1.0] {
        let (_, phi) = integrate_variational(&q, s0, t, &IntegratorConfig::default()).unwrap();
        let oracle = expm(&jacobian(&q, &State::ORIGIN).scale(t));
        assert!(phi.max_abs_diff(&oracle) < 1e-5 * t, "t = {t}");
    }
}

#[test]
fn liouville_identity() {
    for (q, s0) in [
        (p(3.0, 1.0, 1.0), State::from([1.0, 1.5, 2.0])),
        (p(1.0, 2.0, 0.5), State::from([4.0, 0.2, 1.0])),
        (p(-0.5, 1.0, 1.0), State::from([2.0, 2.0, 2.0])),
    ] {
        let t = 5.0;
        let (tr, phi) = integrate_variational(&q, s0, t, &IntegratorConfig::default()).unwrap();
        // trace Df = k - y - k3 - k5
        let trace_integral = (q.k() - q.k3() - q.k5()) * t - tr.integral(Component::Y, 0.0, t).unwrap();
        let expected = trace_integral.exp();
        assert!((phi.det() - expected).abs() <= 1e-6 * expected, "{} vs {}", phi.det(), expected);
    }
}

#[test]
fn averages_are_stable_under_refinement() {
    let q = p(3.0, 1.0, 1.0);
    let s0 = State::from([1.0, 1.5, 2.0]);
    let coarse = integrate(&q, s0, 400.0, &IntegratorConfig::default()).unwrap();
    let fine = integrate(&q, s0, 400.0, &IntegratorConfig::with_tolerances(1e-12, 1e-14)).unwrap();
    let a = time_averages(&coarse, 200.0, 400.0).unwrap();
    let b = time_averages(&fine, 200.0, 400.0).unwrap();
    for i in 0..3 {
        assert!(((a[i] - b[i]) / b[i]).abs() < 1e-8, "{a:?} {b:?}");
    }
}

#[test]
fn gauss_quadrature_agrees_with_exact_polynomial_integral() {
    let q = p(3.0, 1.0, 1.0);
    let tr = integrate(&q, State::from([1.0, 1.5, 2.0]), 30.0, &IntegratorConfig::default()).unwrap();
    let exact = tr.integral(Component::Z, 3.3, 27.1).unwrap();
    let gl = tr.integral_of(|s| s.z, 3.3, 27.1).unwrap();
    assert!((exact - gl).abs() < 1e-10 * exact.abs());
}
