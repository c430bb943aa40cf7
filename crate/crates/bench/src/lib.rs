//! Shared fixtures for the kernel benchmarks.

use std::f64::consts::PI;

use chemduff::ResonatorParams;

/// Reference device with a softening cubic term raised for switching.
pub fn device() -> ResonatorParams {
    ResonatorParams::new(2.0e-13, 1.0e-13, 2.0 * PI * 1.58e6, 3100.0, -2.5e19, 1.0).expect("valid parameters")
}
