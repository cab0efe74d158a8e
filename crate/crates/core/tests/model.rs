use hopf_core::model::{
    equilibria, jacobian, scale_from_original, second_additive_compound, vector_field, Mat3, OriginalParams, Params,
    State,
};
use nalgebra::Matrix3;
use num_complex::Complex64;
use proptest::prelude::*;

fn eig_oracle(m: &Mat3) -> Vec<Complex64> {
    let a = Matrix3::from_fn(|i, j| m[(i, j)]);
    a.complex_eigenvalues().iter().map(|c| Complex64::new(c.re, c.im)).collect()
}

/// Greedy matching of two multisets of complex numbers; largest mismatch.
fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut rest: Vec<Complex64> = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (idx, d) =
            rest.iter().enumerate().map(|(i, y)| (i, (x - y).norm())).min_by(|u, v| u.1.total_cmp(&v.1)).unwrap();
        worst = worst.max(d);
        rest.remove(idx);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compound_spectrum_is_pairwise_sums(
        k in -3.0f64..5.0, k3 in 0.1f64..4.0, k5 in 0.1f64..4.0,
        x in 0.0f64..10.0, y in 0.0f64..10.0, z in 0.0f64..10.0,
    ) {
        let q = Params::new(k, k3, k5).unwrap();
        let s = State::from([x, y, z]);
        let l = eig_oracle(&jacobian(&q, &s));
        let sums = [l[0] + l[1], l[0] + l[2], l[1] + l[2]];
        let c = eig_oracle(&second_additive_compound(&q, &s));
        let scale = 1.0 + l.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(multiset_distance(&c, &sums) < 1e-8 * scale, "{c:?} vs {sums:?}");
    }

    #[test]
    fn scaling_round_trip(
        k1 in 0.1f64..5.0, k2 in 0.1f64..5.0, k3 in 0.1f64..5.0, k4 in 0.1f64..5.0, k5 in 0.1f64..5.0,
        a_conc in 0.0f64..5.0, x in 0.0f64..10.0, y in 0.0f64..10.0, z in 0.0f64..10.0,
    ) {
        let op = OriginalParams::new(k1, k2, k3, k4, k5, a_conc).unwrap();
        let (q, f) = scale_from_original(&op).unwrap();
        let scaled = vector_field(&q, &State::from([x, y, z]));
        let raw = op.vector_field(&State::from([f.a * x, f.b * y, f.c * z]));
        let back = [raw.x / f.a, raw.y / f.b, raw.z / f.c];
        let size = 1.0 + scaled.norm_inf() + back.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in back.iter().zip(scaled.to_array()) {
            prop_assert!((u - v).abs() < 1e-12 * size, "{back:?} vs {scaled:?}");
        }
    }

    #[test]
    fn face_x_zero_is_invariant(k in -3.0f64..5.0, k3 in 0.1f64..4.0, k5 in 0.1f64..4.0,
                                y in 0.0f64..100.0, z in 0.0f64..100.0) {
        let q = Params::new(k, k3, k5).unwrap();
        prop_assert_eq!(vector_field(&q, &State::from([0.0, y, z])).x, 0.0);
    }
}

#[test]
fn field_vanishes_on_equilibria() {
    for k in [-2.0, -0.5, 0.0, 0.3, 1.0, 2.0, 3.0, 7.5] {
        for k3 in [0.2, 1.0, 3.0] {
            for k5 in [0.2, 1.0, 3.0] {
                let q = Params::new(k, k3, k5).unwrap();
                for e in equilibria(&q) {
                    assert!(vector_field(&q, &e).norm() < 1e-12, "{q}: {e:?}");
                }
                let expected = if k > 0.0 { 2 } else { 1 };
                assert_eq!(equilibria(&q).len(), expected, "{q}");
            }
        }
    }
}
