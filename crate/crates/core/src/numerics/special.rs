//! Polygamma functions and standard normal helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// 1/sqrt(2*pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Below this argument the inverse Mills ratio is taken from its continued fraction.
const MILLS_SWITCH: f64 = -5.0;
/// Arguments are shifted upward past this point before the asymptotic series is used.
const ASYMPTOTIC_FROM: f64 = 10.0;

/// Polygamma function of order `k` (0 = digamma, 1 = trigamma, 2 = tetragamma).
///
/// Upward recurrence moves the argument past 10, then the Bernoulli-number
/// asymptotic series is summed.
pub fn polygamma(k: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::SpecialDomain {
            name: "polygamma",
            arg: x,
        });
    }
    let mut shift = 0.0;
    let mut z = x;
    match k {
        0 => {
            while z < ASYMPTOTIC_FROM {
                shift -= 1.0 / z;
                z += 1.0;
            }
            Ok(shift + digamma_asymptotic(z))
        }
        1 => {
            while z < ASYMPTOTIC_FROM {
                shift += 1.0 / (z * z);
                z += 1.0;
            }
            Ok(shift + trigamma_asymptotic(z))
        }
        2 => {
            while z < ASYMPTOTIC_FROM {
                shift -= 2.0 / (z * z * z);
                z += 1.0;
            }
            Ok(shift + tetragamma_asymptotic(z))
        }
        _ => Err(Error::SpecialDomain {
            name: "polygamma order",
            arg: k as f64,
        }),
    }
}

fn digamma_asymptotic(x: f64) -> f64 {
    let w = 1.0 / (x * x);
    // -sum B_{2k} / (2k x^{2k})
    let series = w
        * (1.0 / 12.0
            - w * (1.0 / 120.0
                - w * (1.0 / 252.0
                    - w * (1.0 / 240.0 - w * (1.0 / 132.0 - w * (691.0 / 32760.0 - w / 12.0))))));
    x.ln() - 0.5 / x - series
}

fn trigamma_asymptotic(x: f64) -> f64 {
    let w = 1.0 / (x * x);
    // sum B_{2k} / x^{2k+1}
    let series = w
        * (1.0 / 6.0
            - w * (1.0 / 30.0
                - w * (1.0 / 42.0
                    - w * (1.0 / 30.0 - w * (5.0 / 66.0 - w * (691.0 / 2730.0 - w * 7.0 / 6.0))))));
    1.0 / x + 0.5 * w + series / x
}

fn tetragamma_asymptotic(x: f64) -> f64 {
    let w = 1.0 / (x * x);
    // -sum (2k+1) B_{2k} / x^{2k+2}
    let series = w
        * (0.5
            - w * (1.0 / 6.0
                - w * (1.0 / 6.0
                    - w * (3.0 / 10.0 - w * (5.0 / 6.0 - w * (691.0 / 210.0 - w * 35.0 / 2.0))))));
    -w - w / x - series * w
}

pub fn digamma(x: f64) -> Result<f64> {
    polygamma(0, x)
}

pub fn trigamma(x: f64) -> Result<f64> {
    polygamma(1, x)
}

pub fn tetragamma(x: f64) -> Result<f64> {
    polygamma(2, x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Standard normal density and distribution function at `x`.
pub fn std_normal(x: f64) -> (f64, f64) {
    (norm_pdf(x), norm_cdf(x))
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Continued fraction for the Mills ratio (1 - Phi(z)) / phi(z), z > 0 large.
fn mills_cf(z: f64) -> f64 {
    let mut acc = z;
    for k in (1..=120).rev() {
        acc = z + k as f64 / acc;
    }
    1.0 / acc
}

/// `phi(x) / Phi(x)`, the derivative of `log Phi(x)`, stable for very negative `x`.
pub fn inv_mills(x: f64) -> f64 {
    if x < MILLS_SWITCH {
        1.0 / mills_cf(-x)
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

/// `log Phi(x)` without underflow in the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < MILLS_SWITCH {
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_cf(-x).ln()
    } else if x > 0.0 {
        (-norm_cdf(-x)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // one Newton polish on the library inverse
    let x = Normal::standard().inverse_cdf(p);
    let d = norm_pdf(x);
    if d > 0.0 {
        x - (norm_cdf(x) - p) / d
    } else {
        x
    }
}
