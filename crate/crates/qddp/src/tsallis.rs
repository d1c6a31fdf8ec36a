//! Scalar q-deformed algebra: q-logarithm, q-exponential and q-product.
//!
//! All three reduce to their classical counterparts at `q = 1`; the branch
//! is selected with a tolerance on `|q - 1|` to avoid the catastrophic
//! cancellation in `(x^{1-q} - 1)/(1-q)` near `q = 1`.

use crate::error::{Error, Result};

/// `|q - 1|` below this is treated as the `q = 1` branch.
pub const Q_BRANCH_TOL: f64 = 1e-8;

/// Entropic index of the Tsallis family. `q = 1` recovers Shannon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropicIndex(f64);

impl EntropicIndex {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::Domain("entropic index must be finite"));
        }
        Ok(Self(q))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// True when this index falls in the `q = 1` branch.
    pub fn is_shannon(self) -> bool {
        (self.0 - 1.0).abs() < Q_BRANCH_TOL
    }

    /// Requires `lo < q < hi` (both strict), used by policy and
    /// distribution constructors.
    pub fn require_in(self, lo: f64, hi: f64) -> Result<Self> {
        if self.0 > lo && self.0 < hi {
            Ok(self)
        } else {
            Err(Error::EntropicIndexRange { q: self.0, lo, hi })
        }
    }
}

impl From<EntropicIndex> for f64 {
    fn from(q: EntropicIndex) -> f64 {
        q.0
    }
}

/// q-logarithm: `ln(x)` at `q = 1`, otherwise `(x^{1-q} - 1)/(1-q)`.
pub fn q_log(x: f64, q: EntropicIndex) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("q_log requires x > 0"));
    }
    if q.is_shannon() {
        Ok(libm::log(x))
    } else {
        let one_minus_q = 1.0 - q.get();
        Ok((libm::pow(x, one_minus_q) - 1.0) / one_minus_q)
    }
}

/// q-exponential: `exp(x)` at `q = 1`, otherwise `[1 - (q-1)x]₊^{-1/(q-1)}`.
///
/// For `q < 1` the clamp region returns exactly 0. For `q > 1` the base
/// reaching 0 is a pole; an error is signalled instead of returning
/// infinity so downstream covariance formulas never see one.
pub fn q_exp(x: f64, q: EntropicIndex) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain("q_exp requires finite x"));
    }
    if q.is_shannon() {
        return Ok(libm::exp(x));
    }
    let qm1 = q.get() - 1.0;
    let base = 1.0 - qm1 * x;
    if base <= 0.0 {
        if qm1 > 0.0 {
            return Err(Error::QExpPole { q: q.get(), x });
        }
        return Ok(0.0);
    }
    Ok(libm::pow(base, -1.0 / qm1))
}

/// q-product: `[a^{1-q} + b^{1-q} - 1]₊^{1/(1-q)}`, the deformed product
/// with `exp_q(x) ⊗_q exp_q(y) = exp_q(x + y)`. Not distributive over
/// addition, which is what rules out a multimodal Tsallis policy.
pub fn q_product(a: f64, b: f64, q: EntropicIndex) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Domain("q_product requires a, b >= 0"));
    }
    if q.is_shannon() {
        return Ok(a * b);
    }
    let one_minus_q = 1.0 - q.get();
    let s = libm::pow(a, one_minus_q) + libm::pow(b, one_minus_q) - 1.0;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(libm::pow(s, 1.0 / one_minus_q))
}
