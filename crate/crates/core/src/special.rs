//! Digamma and trigamma on the positive reals.
//!
//! Both shift the argument up with the recurrences
//! `ψ(s) = ψ(s + 1) - 1/s` and `ψ'(s) = ψ'(s + 1) + 1/s²` until `s ≥ 10`, then
//! use the Bernoulli-number asymptotic series. Absolute error is below 1e-13
//! for arguments of order one.

use crate::error::{Error, Result};

const SHIFT_THRESHOLD: f64 = 10.0;

/// B_{2k} / (2k), k = 1..7.
const DIGAMMA_ASYMP: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k}, k = 1..7.
const TRIGAMMA_ASYMP: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn check_positive(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "argument must be positive and finite, got {s}"
        )))
    }
}

/// `ψ(s) = d/ds ln Γ(s)` for `s > 0`.
pub fn digamma(s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(psi(s))
}

/// `ψ'(s)` for `s > 0`.
pub fn trigamma(s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(psi1(s))
}

/// `ln Γ(s)` for `s > 0`.
pub fn ln_gamma(s: f64) -> Result<f64> {
    check_positive(s)?;
    Ok(statrs::function::gamma::ln_gamma(s))
}

pub(crate) fn psi(mut s: f64) -> f64 {
    let mut shift = 0.0;
    while s < SHIFT_THRESHOLD {
        shift -= 1.0 / s;
        s += 1.0;
    }
    let inv2 = 1.0 / (s * s);
    let mut series = 0.0;
    let mut power = inv2;
    for c in DIGAMMA_ASYMP {
        series += c * power;
        power *= inv2;
    }
    shift + s.ln() - 0.5 / s - series
}

pub(crate) fn psi1(mut s: f64) -> f64 {
    let mut shift = 0.0;
    while s < SHIFT_THRESHOLD {
        shift += 1.0 / (s * s);
        s += 1.0;
    }
    let inv = 1.0 / s;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv2 * inv;
    for b in TRIGAMMA_ASYMP {
        series += b * power;
        power *= inv2;
    }
    shift + inv + 0.5 * inv2 + series
}

pub(crate) fn lgamma(s: f64) -> f64 {
    statrs::function::gamma::ln_gamma(s)
}
