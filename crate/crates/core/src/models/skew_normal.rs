//! Skew-normal shape parameter with density `2 phi(y) Phi(theta y)`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{check_finite, CumulantBundle, Model, Simulate, TensorBuilder};
use crate::numerics::{
    integrate_real_line_many, inv_mills, log_norm_cdf, norm_pdf, QuadratureSettings,
};

/// The expectations `a_kh(theta) = E{Y^k zeta1(theta Y)^h}` used by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewExpectations {
    pub a22: f64,
    pub a33: f64,
    pub a42: f64,
}

/// Computes `a22`, `a33` and `a42` in one adaptive pass.
///
/// The skew-normal density times `zeta1(theta y)^h` is rewritten as
/// `2 phi(y) phi(theta y) zeta1(theta y)^(h-1)`, which stays bounded in the
/// tail where `Phi(theta y)` underflows. For `|theta| > 1` the integrals are
/// taken in `u = |theta| y`, where the mass sits at unit scale, and the powers
/// of `|theta|` are restored afterwards.
pub fn skew_expectations(theta: f64, settings: &QuadratureSettings) -> Result<SkewExpectations> {
    let s = theta.abs().max(1.0);
    let [b22, b33, b42] = integrate_real_line_many(
        |u| {
            let y = u / s;
            let base = 2.0 * norm_pdf(y) * norm_pdf(theta * y);
            if base == 0.0 {
                return [0.0; 3];
            }
            let z = inv_mills(theta * y);
            let u2 = u * u;
            [base * u2 * z, base * u2 * u * z * z, base * u2 * u2 * z]
        },
        settings,
        "skew-normal a_kh",
    )?;
    let s3 = s * s * s;
    Ok(SkewExpectations {
        a22: b22 / s3,
        a33: b33 / (s3 * s),
        a42: b42 / (s3 * s * s),
    })
}

#[derive(Debug, Clone)]
pub struct SkewNormalModel {
    y: Vec<f64>,
    quadrature: QuadratureSettings,
}

impl SkewNormalModel {
    pub fn new(y: Vec<f64>, quadrature: QuadratureSettings) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid(
                "skew-normal model needs at least one observation",
            ));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                line: i + 1,
                message: "non-finite observation".into(),
            });
        }
        quadrature.validate()?;
        Ok(Self { y, quadrature })
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    pub fn quadrature(&self) -> &QuadratureSettings {
        &self.quadrature
    }

    pub fn expectations(&self, theta: f64) -> Result<SkewExpectations> {
        skew_expectations(theta, &self.quadrature)
    }
}

impl Model for SkewNormalModel {
    fn dim(&self) -> usize {
        1
    }

    fn labels(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        check_finite(&self.labels(), theta)?;
        let t = theta[0];
        Ok(self
            .y
            .iter()
            .map(|&v| LN_2 + norm_pdf(v).ln() + log_norm_cdf(t * v))
            .sum())
    }

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>> {
        check_finite(&self.labels(), theta)?;
        let t = theta[0];
        Ok(DVector::from_element(
            1,
            self.y.iter().map(|&v| v * inv_mills(t * v)).sum(),
        ))
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        let score = self.score(theta)?;
        let t = theta[0];
        let a = self.expectations(t)?;
        let n = self.y.len() as f64;
        let mut nu3 = TensorBuilder::new(1);
        nu3.add(0, 0, 0, n * a.a33);
        // zeta1' = -zeta1 (x + zeta1) gives E(U U_tt) = -n (theta a42 + a33)
        let mut numix = TensorBuilder::new(1);
        numix.add(0, 0, 0, -n * (t * a.a42 + a.a33));
        Ok(CumulantBundle {
            score,
            info: DMatrix::from_element(1, 1, n * a.a22),
            nu3: nu3.finish(),
            numix: numix.finish(),
        })
    }

    fn default_start(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn mle_at_infinity(&self) -> Option<Vec<f64>> {
        if self.y.iter().all(|&v| v > 0.0) {
            Some(vec![f64::INFINITY])
        } else if self.y.iter().all(|&v| v < 0.0) {
            Some(vec![f64::NEG_INFINITY])
        } else {
            None
        }
    }
}

impl Simulate for SkewNormalModel {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        check_finite(&self.labels(), theta)?;
        let delta = theta[0] / (1.0 + theta[0] * theta[0]).sqrt();
        let tail = (1.0 - delta * delta).sqrt();
        let y = (0..self.y.len())
            .map(|_| {
                let z0: f64 = StandardNormal.sample(rng);
                let z1: f64 = StandardNormal.sample(rng);
                delta * z0.abs() + tail * z1
            })
            .collect();
        Ok(Box::new(Self {
            y,
            quadrature: self.quadrature,
        }))
    }
}
