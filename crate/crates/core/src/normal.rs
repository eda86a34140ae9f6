//! Standard normal distribution function and quantile.

use libm::erfc;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `P(Z <= x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `P(|Z| >= |x|)`, evaluated without cancellation.
pub fn two_sided_p(x: f64) -> f64 {
    erfc(x.abs() / SQRT_2).min(1.0)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`] on `(0,1)`, accurate to 1e-10.
///
/// Starts from the Abramowitz-Stegun rational approximation and polishes
/// with safeguarded Newton steps inside a shrinking bracket.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("quantile level {p} outside (0,1)")));
    }
    let mut x = initial_guess(p);
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..100 {
        let f = normal_cdf(x) - p;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let step = f / normal_pdf(x).max(f64::MIN_POSITIVE);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * (1.0 + x.abs()) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

// Abramowitz & Stegun 26.2.23, absolute error below 4.5e-4.
fn initial_guess(p: f64) -> f64 {
    let q = p.min(1.0 - p);
    let t = (-2.0 * q.ln()).sqrt();
    let z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    if p < 0.5 {
        -z
    } else {
        z
    }
}

/// `z_{1 - alpha/2}`.
pub fn two_sided_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!("significance level {alpha} outside (0,1)")));
    }
    normal_quantile(1.0 - alpha / 2.0)
}
