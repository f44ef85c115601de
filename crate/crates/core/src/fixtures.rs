//! Reference configurations and random states shared by tests, the `check`
//! command and the FFI layer.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::dynamics::{StateSlice, STATE_LEN};
use crate::units::{compute_cooperation_scale, dimensionless_params, DimensionlessParams, GridSpec, PhysicalConfig};

/// 101 × 42 grid spanning 140 ns, with the pump starting at t = 0.
pub fn reference_grid() -> GridSpec {
    GridSpec::new(101, 42, 140.0)
}

/// Dimensionless parameters at ρ = 10¹⁰ cm⁻³ on [`reference_grid`].
pub fn operating_params() -> DimensionlessParams {
    let cfg = PhysicalConfig::rubidium_cascade(1e10);
    let scale = compute_cooperation_scale(&cfg).expect("reference config is valid");
    dimensionless_params(&cfg, &reference_grid(), &scale).expect("reference grid is valid")
}

/// Every slot drawn uniformly from the square `[-amp, amp]²`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, amp: f64) -> StateSlice {
    let mut s = [C64::new(0.0, 0.0); STATE_LEN];
    for v in s.iter_mut() {
        *v = C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
    }
    StateSlice(s)
}
