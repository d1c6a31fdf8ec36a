//! Gamma and beta functions used by the q-Gaussian partition functions
//! and the escort-normalizer equation.
//!
//! The beta function is evaluated in log-space since the partition
//! functions use gamma ratios with arguments like `1/(q-1)` that overflow
//! in linear space.

use crate::error::{Error, Result};

// Lanczos approximation, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64 - 1.0);
    }
    a
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain("ln_gamma requires x > 0"));
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let pi = core::f64::consts::PI;
        return Ok(libm::log(pi / libm::sin(pi * x)) - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let half_ln_2pi = 0.918_938_533_204_672_7;
    Ok(half_ln_2pi + (z + 0.5) * libm::log(t) - t + libm::log(lanczos_sum(z + 1.0)))
}

/// Gamma function for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain("gamma_fn requires x > 0"));
    }
    if x < 0.5 {
        let pi = core::f64::consts::PI;
        return Ok(pi / (libm::sin(pi * x) * gamma_fn(1.0 - x)?));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    let sqrt_2pi = 2.506_628_274_631_000_5;
    Ok(sqrt_2pi * libm::pow(t, z + 0.5) * libm::exp(-t) * lanczos_sum(z + 1.0))
}

/// Natural log of the beta function, `ln B(a, b) = lnΓ(a) + lnΓ(b) − lnΓ(a+b)`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("ln_beta requires a, b > 0"));
    }
    Ok(ln_gamma(a)? + ln_gamma(b)? - ln_gamma(a + b)?)
}

/// Beta function for `a, b > 0`, computed via the gamma relation in log-space.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    Ok(libm::exp(ln_beta(a, b)?))
}
