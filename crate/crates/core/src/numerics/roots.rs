//! Bracketed scalar root finding (Brent's bisection/secant/inverse-quadratic hybrid).

use crate::error::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
/// Number of interval doublings tried by [`expand_bracket`].
pub const MAX_EXPANSIONS: usize = 60;
const MAX_ROOT_ITERATIONS: usize = 500;

/// Finds a root of `f` on `[lo, hi]` given `f(lo) * f(hi) <= 0`.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_find_root(|x| Ok(f(x)), lo, hi, tol)
}

/// Fallible variant of [`find_root`]; errors raised by `f` are propagated.
pub fn try_find_root<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ROOT_ITERATIONS {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Ok(b)
}

/// Doubles `[lo, hi]` about its midpoint until `f` changes sign, at most
/// [`MAX_EXPANSIONS`] times.
pub fn expand_bracket<F>(mut f: F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    try_expand_bracket(|x| Ok(f(x)), lo, hi)
}

pub fn try_expand_bracket<F>(mut f: F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::invalid("bracket requires lo < hi"));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..=MAX_EXPANSIONS {
        let fa = f(a)?;
        let fb = f(b)?;
        if fa.signum() != fb.signum() || fa == 0.0 || fb == 0.0 {
            return Ok((a, b));
        }
        let mid = 0.5 * (a + b);
        let half = b - a;
        a = mid - half;
        b = mid + half;
    }
    Err(Error::Bracket { lo: a, hi: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::norm_cdf;

    #[test]
    fn reference_roots() {
        let r = find_root(|x| x - 2.0, 0.0, 5.0, DEFAULT_ROOT_TOL).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r = find_root(|x| norm_cdf(x) - 0.5, -3.0, 3.0, DEFAULT_ROOT_TOL).unwrap();
        assert!(r.abs() < 1e-10);
        let r = find_root(|x| x * x * x - 2.0, 1.0, 2.0, DEFAULT_ROOT_TOL).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-10);
        assert!((r - 1.259_921).abs() < 1e-6);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn expansion_finds_far_root() {
        let (a, b) = expand_bracket(|x| x - 1000.0, 0.0, 1.0).unwrap();
        assert!(a <= 1000.0 && b >= 1000.0);
        let r = find_root(|x| x - 1000.0, a, b, 1e-10).unwrap();
        assert!((r - 1000.0).abs() < 1e-9);
        assert!(expand_bracket(|_| 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn errors_propagate() {
        let e = try_find_root(|_| Err(Error::EmptySupport), 0.0, 1.0, 1e-8).unwrap_err();
        assert_eq!(e, Error::EmptySupport);
    }
}
