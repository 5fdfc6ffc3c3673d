//! Delay-coupled oscillator networks and their higher-order phase reductions.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: Stuart-Landau pair parameters, states, right-hand sides and
//!   the generic delay network form.
//! - [`dde`]: method-of-steps RK4 integrator with a Hermite history buffer.
//! - [`reduction`]: closed-form first- and second-order phase reduction data
//!   for the SL pair and integrators for the reduced phase equations.
//! - [`stability`]: exponents of in-phase / anti-phase locking and their
//!   zero-level boundaries in the `(τ, ρ)` plane.
//! - [`verify`]: residual checks of the conjugacy hierarchy and an exact
//!   locked-solution oracle.
//! - [`sweep`]: parallel `(τ, ρ)` grid experiments with outcome
//!   classification.

pub mod contour;
pub mod dde;
pub mod model;
pub mod reduction;
pub mod stability;
pub mod sweep;
pub mod verify;

use std::f64::consts::{PI, TAU};

pub use model::{as_network_spec, sl_rhs, ComplexState, ModelError, NetworkSpec, SLParams};

/// Wraps an angle into `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    wrap_pi(x - y).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_boundaries() {
        assert_eq!(wrap_pi(PI), PI);
        assert_eq!(wrap_pi(-PI), PI);
        assert_eq!(wrap_pi(0.0), 0.0);
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-15);
        assert_eq!(wrap_2pi(-1e-300), 0.0);
        assert!((circular_distance(PI - 0.1, -PI + 0.1) - 0.2).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(x in -100.0..100.0f64) {
            let w = wrap_pi(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_pi(w), w);
            let v = wrap_2pi(x);
            prop_assert!((0.0..TAU).contains(&v));
            prop_assert_eq!(wrap_2pi(v), v);
        }
    }
}
