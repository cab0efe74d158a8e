//! Shared fixtures for the criterion benches.

use hopf_core::{Params, State};

/// The oscillatory reference point `(k, k3, k5) = (3, 1, 1)`.
pub fn oscillatory() -> Params {
    Params::new(3.0, 1.0, 1.0).expect("valid parameters")
}

/// The stable-interior reference point `(1, 1, 1)`.
pub fn stable_interior() -> Params {
    Params::new(1.0, 1.0, 1.0).expect("valid parameters")
}

pub fn interior_start() -> State {
    State::from([1.0, 1.5, 2.0])
}
