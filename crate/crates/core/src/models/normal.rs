//! Normal samples with the variance as parameter of interest.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{
    check_finite, require_positive, CumulantBundle, Model, Simulate, TensorBuilder,
};

/// `N(mu, psi)` with `psi` the variance. With a known mean the parameter is
/// `(psi)`, otherwise `(mu, psi)`.
#[derive(Debug, Clone)]
pub struct NormalModel {
    y: Vec<f64>,
    known_mean: Option<f64>,
}

impl NormalModel {
    pub fn new(y: Vec<f64>, known_mean: Option<f64>) -> Result<Self> {
        let min_n = if known_mean.is_some() { 2 } else { 3 };
        if y.len() < min_n {
            return Err(Error::invalid(format!(
                "normal model needs at least {min_n} observations, got {}",
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                line: i + 1,
                message: "non-finite observation".into(),
            });
        }
        if matches!(known_mean, Some(m) if !m.is_finite()) {
            return Err(Error::invalid("known mean must be finite"));
        }
        Ok(Self { y, known_mean })
    }

    pub fn known_mean(y: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(y, Some(mu))
    }

    pub fn unknown_mean(y: Vec<f64>) -> Result<Self> {
        Self::new(y, None)
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    /// `(mu, psi)` from a parameter vector.
    fn split(&self, theta: &[f64]) -> (f64, f64) {
        match self.known_mean {
            Some(mu) => (mu, theta[0]),
            None => (theta[0], theta[1]),
        }
    }

    /// Sum of squared deviations about `mu`.
    pub fn sum_squares(&self, mu: f64) -> f64 {
        self.y.iter().map(|v| (v - mu) * (v - mu)).sum()
    }

    fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n()
    }
}

impl Model for NormalModel {
    fn dim(&self) -> usize {
        if self.known_mean.is_some() {
            1
        } else {
            2
        }
    }

    fn labels(&self) -> Vec<String> {
        match self.known_mean {
            Some(_) => vec!["psi".into()],
            None => vec!["mu".into(), "psi".into()],
        }
    }

    fn check_domain(&self, theta: &[f64]) -> Result<()> {
        check_finite(&self.labels(), theta)?;
        require_positive("psi", self.split(theta).1)
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        self.check_domain(theta)?;
        let (mu, psi) = self.split(theta);
        let n = self.n();
        Ok(-0.5 * n * (2.0 * std::f64::consts::PI * psi).ln() - self.sum_squares(mu) / (2.0 * psi))
    }

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_domain(theta)?;
        let (mu, psi) = self.split(theta);
        let n = self.n();
        let u_psi = -n / (2.0 * psi) + self.sum_squares(mu) / (2.0 * psi * psi);
        Ok(match self.known_mean {
            Some(_) => DVector::from_vec(vec![u_psi]),
            None => {
                let u_mu = self.y.iter().map(|v| v - mu).sum::<f64>() / psi;
                DVector::from_vec(vec![u_mu, u_psi])
            }
        })
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        let score = self.score(theta)?;
        let (_, psi) = self.split(theta);
        let n = self.n();
        let (p, k) = if self.known_mean.is_some() {
            (1, 0)
        } else {
            (2, 1)
        };
        let mut info = DMatrix::zeros(p, p);
        let mut nu3 = TensorBuilder::new(p);
        let mut numix = TensorBuilder::new(p);
        info[(k, k)] = n / (2.0 * psi * psi);
        nu3.add(k, k, k, n / psi.powi(3));
        numix.add(k, k, k, -n / psi.powi(3));
        if k == 1 {
            info[(0, 0)] = n / psi;
            nu3.add_symmetric(0, 0, 1, n / (psi * psi));
            numix.add_symmetric_last2(0, 0, 1, -n / (psi * psi));
        }
        Ok(CumulantBundle {
            score,
            info,
            nu3: nu3.finish(),
            numix: numix.finish(),
        })
    }

    fn default_start(&self) -> Vec<f64> {
        let n = self.n();
        match self.known_mean {
            Some(mu) => vec![(self.sum_squares(mu) / n).max(f64::MIN_POSITIVE.sqrt())],
            None => {
                let m = self.mean();
                vec![m, (self.sum_squares(m) / n).max(f64::MIN_POSITIVE.sqrt())]
            }
        }
    }
}

impl Simulate for NormalModel {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        self.check_domain(theta)?;
        let (mu, psi) = self.split(theta);
        let dist = Normal::new(mu, psi.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
        let y = (0..self.y.len()).map(|_| dist.sample(rng)).collect();
        Ok(Box::new(Self {
            y,
            known_mean: self.known_mean,
        }))
    }
}
