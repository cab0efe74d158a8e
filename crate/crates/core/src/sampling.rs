//! Deterministic point sets: seeded pseudo-random boxes, Halton sequences and grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::State;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Halton points (bases 2, 3, 5) in `[lo, hi]³`, skipping the origin of the sequence.
pub fn halton_box(n: usize, lo: f64, hi: f64) -> Vec<State> {
    (1..=n as u64)
        .map(|i| {
            let u = [radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)];
            State::from(u.map(|c| lo + (hi - lo) * c))
        })
        .collect()
}

/// `n` points spaced evenly over `[lo, hi]` including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Tensor grid of `n³` points in `[lo, hi]³`, x slowest.
pub fn cube_grid(lo: f64, hi: f64, n: usize) -> Vec<State> {
    let axis = linspace(lo, hi, n);
    let mut out = Vec::with_capacity(n * n * n);
    for &x in &axis {
        for &y in &axis {
            for &z in &axis {
                out.push(State::from([x, y, z]));
            }
        }
    }
    out
}

pub fn uniform_box<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> State {
    State::from([0; 3].map(|_| rng.random_range(lo..=hi)))
}
