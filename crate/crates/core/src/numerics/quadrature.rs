//! Adaptive Gauss-Kronrod integration over the whole real line.
//!
//! The line is compactified with `x = t / (1 - t^2)`, `t in (-1, 1)`, and the
//! transformed integrand is integrated with a globally adaptive 7/15-point
//! Gauss-Kronrod rule. Nodes never touch `t = +-1`, so integrands only need to
//! be finite (they may underflow to zero) far out in the tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::invalid(
                "quadrature tolerances must be positive and max_subdivisions >= 1",
            ));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Initial uniform split of (-1, 1); keeps the centre region well resolved.
const INITIAL_PIECES: usize = 8;

#[derive(Clone, Copy)]
struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn transformed<const N: usize, F>(f: &mut F, t: f64) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    let d = 1.0 - t * t;
    let x = t / d;
    let jac = (1.0 + t * t) / (d * d);
    let raw = f(x);
    let mut v = raw;
    for (k, vk) in v.iter_mut().enumerate() {
        *vk *= jac;
        if !vk.is_finite() {
            // tails may overflow the Jacobian while the integrand underflows
            if raw[k] == 0.0 {
                *vk = 0.0;
            } else {
                return Err(Error::Quadrature {
                    integrand: format!("component {k} non-finite at x = {x}"),
                    error: f64::INFINITY,
                    subdivisions: 0,
                });
            }
        }
    }
    Ok(v)
}

fn kronrod<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<Piece<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = transformed(f, c)?;
    let mut resk = [0.0; N];
    let mut resg = [0.0; N];
    let mut resabs = [0.0; N];
    let mut fv = [[0.0; N]; 15];
    for k in 0..N {
        resk[k] = WGK[7] * fc[k];
        resg[k] = WG[3] * fc[k];
        resabs[k] = (WGK[7] * fc[k]).abs();
    }
    fv[7] = fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = transformed(f, c - dx)?;
        let f2 = transformed(f, c + dx)?;
        fv[j] = f1;
        fv[14 - j] = f2;
        for k in 0..N {
            resk[k] += WGK[j] * (f1[k] + f2[k]);
            resabs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            if j % 2 == 1 {
                resg[k] += WG[j / 2] * (f1[k] + f2[k]);
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        let mean = 0.5 * resk[k];
        let mut resasc = WGK[7] * (fc[k] - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv[j][k] - mean).abs() + (fv[14 - j][k] - mean).abs());
        }
        resasc *= h;
        value[k] = resk[k] * h;
        let mut err = ((resk[k] - resg[k]) * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        let round = 50.0 * f64::EPSILON * resabs[k] * h;
        if round > f64::MIN_POSITIVE {
            err = err.max(round);
        }
        error[k] = err;
    }
    Ok(Piece { a, b, value, error })
}

/// Integrate a vector-valued integrand over the real line on a shared subdivision.
///
/// Each component must meet `max(abs_tol, rel_tol * |I_k|)`. `label` names the
/// integrand in failure reports.
pub fn integrate_real_line_many<const N: usize, F>(
    mut f: F,
    settings: &QuadratureSettings,
    label: &str,
) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    settings.validate()?;
    let mut pieces: Vec<Piece<N>> = Vec::with_capacity(INITIAL_PIECES + settings.max_subdivisions);
    let width = 2.0 / INITIAL_PIECES as f64;
    for j in 0..INITIAL_PIECES {
        let a = -1.0 + j as f64 * width;
        pieces.push(kronrod(&mut f, a, a + width)?);
    }
    let mut subdivisions = 0;
    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for p in &pieces {
            for k in 0..N {
                total[k] += p.value[k];
                err[k] += p.error[k];
            }
        }
        let done =
            (0..N).all(|k| err[k] <= settings.abs_tol.max(settings.rel_tol * total[k].abs()));
        if done {
            return Ok(total);
        }
        if subdivisions >= settings.max_subdivisions {
            let worst = err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::Quadrature {
                integrand: label.to_string(),
                error: worst,
                subdivisions,
            });
        }
        // bisect the piece with the largest error relative to its component's target
        let scale: Vec<f64> = (0..N)
            .map(|k| settings.abs_tol.max(settings.rel_tol * total[k].abs()))
            .collect();
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = (0..N).map(|k| p.error[k] / scale[k]).fold(0.0, f64::max);
                (i, s)
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        let p = pieces.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        pieces.push(kronrod(&mut f, p.a, mid)?);
        pieces.push(kronrod(&mut f, mid, p.b)?);
        subdivisions += 1;
    }
}

/// Integrate a scalar function over the real line.
pub fn integrate_real_line<F>(mut f: F, settings: &QuadratureSettings) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_real_line_many(|x| [f(x)], settings, "scalar integrand").map(|v| v[0])
}
