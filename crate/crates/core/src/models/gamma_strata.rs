//! Gamma strata with a common shape `psi` and stratum rates `lambda_a`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::model::{check_finite, CumulantBundle, Model, Simulate, TensorBuilder};
use crate::numerics::{digamma, ln_gamma, tetragamma, trigamma};

/// `y[a][j] ~ Gamma(shape psi, rate lambda_a)`; parameter order
/// `(psi, lambda_1, ..., lambda_q)`.
#[derive(Debug, Clone)]
pub struct GammaStrataModel {
    y: Vec<Vec<f64>>,
    /// per stratum: count, sum of logs, sum
    stats: Vec<(f64, f64, f64)>,
}

impl GammaStrataModel {
    pub fn new(y: Vec<Vec<f64>>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid(
                "gamma strata model needs at least one stratum",
            ));
        }
        for (a, s) in y.iter().enumerate() {
            if s.len() < 2 {
                return Err(Error::Data {
                    line: a + 1,
                    message: "each stratum needs at least two observations".into(),
                });
            }
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Data {
                    line: a + 1,
                    message: "observations must be positive and finite".into(),
                });
            }
        }
        let stats = y
            .iter()
            .map(|s| {
                (
                    s.len() as f64,
                    s.iter().map(|v| v.ln()).sum(),
                    s.iter().sum(),
                )
            })
            .collect();
        Ok(Self { y, stats })
    }

    pub fn strata(&self) -> usize {
        self.y.len()
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.y
    }

    /// Within-stratum moment estimate of the shape, clamped to a sane range.
    fn moment_shape(&self) -> f64 {
        let mut acc = 0.0;
        let mut k = 0.0;
        for s in &self.y {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                acc += mean * mean / var;
                k += 1.0;
            }
        }
        if k > 0.0 {
            (acc / k).clamp(0.05, 1e4)
        } else {
            1.0
        }
    }
}

impl Model for GammaStrataModel {
    fn dim(&self) -> usize {
        self.y.len() + 1
    }

    fn labels(&self) -> Vec<String> {
        std::iter::once("psi".to_string())
            .chain((1..=self.y.len()).map(|a| format!("lambda{a}")))
            .collect()
    }

    fn check_domain(&self, theta: &[f64]) -> Result<()> {
        let labels = self.labels();
        check_finite(&labels, theta)?;
        for (l, &v) in labels.iter().zip(theta) {
            if !(v > 0.0) {
                return Err(Error::Domain {
                    component: l.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        self.check_domain(theta)?;
        let psi = theta[0];
        let lg = ln_gamma(psi);
        Ok(self
            .stats
            .iter()
            .zip(&theta[1..])
            .map(|(&(m, t, s), &lam)| m * psi * lam.ln() - m * lg + (psi - 1.0) * t - lam * s)
            .sum())
    }

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_domain(theta)?;
        let psi = theta[0];
        let dg = digamma(psi)?;
        let mut u = DVector::zeros(self.dim());
        for (a, (&(m, t, s), &lam)) in self.stats.iter().zip(&theta[1..]).enumerate() {
            u[0] += m * lam.ln() - m * dg + t;
            u[a + 1] = m * psi / lam - s;
        }
        Ok(u)
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        let score = self.score(theta)?;
        let p = self.dim();
        let psi = theta[0];
        let (t1, t2) = (trigamma(psi)?, tetragamma(psi)?);
        let mut info = DMatrix::zeros(p, p);
        let mut nu3 = TensorBuilder::new(p);
        let mut mtot = 0.0;
        for (a, (&(m, _, _), &lam)) in self.stats.iter().zip(&theta[1..]).enumerate() {
            let k = a + 1;
            mtot += m;
            info[(0, k)] = -m / lam;
            info[(k, 0)] = -m / lam;
            info[(k, k)] = m * psi / (lam * lam);
            nu3.add_symmetric(k, k, 0, m / (lam * lam));
            nu3.add(k, k, k, -2.0 * m * psi / lam.powi(3));
        }
        info[(0, 0)] = mtot * t1;
        nu3.add(0, 0, 0, mtot * t2);
        // all second derivatives are nonrandom, so E(U_r U_st) = 0
        Ok(CumulantBundle {
            score,
            info,
            nu3: nu3.finish(),
            numix: TensorBuilder::new(p).finish(),
        })
    }

    fn default_start(&self) -> Vec<f64> {
        let psi = self.moment_shape();
        std::iter::once(psi)
            .chain(self.stats.iter().map(|&(m, _, s)| psi * m / s))
            .collect()
    }

    fn profile_nuisance(&self, r: usize, theta: &[f64]) -> Option<Result<Vec<f64>>> {
        if r != 0 {
            return None;
        }
        let psi = theta[0];
        if !(psi > 0.0) || !psi.is_finite() {
            return Some(Err(Error::Domain {
                component: "psi".into(),
                value: psi,
            }));
        }
        Some(Ok(std::iter::once(psi)
            .chain(self.stats.iter().map(|&(m, _, s)| psi * m / s))
            .collect()))
    }
}

impl Simulate for GammaStrataModel {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        self.check_domain(theta)?;
        let mut y = Vec::with_capacity(self.y.len());
        for (s, &lam) in self.y.iter().zip(&theta[1..]) {
            let g = Gamma::new(theta[0], 1.0 / lam).map_err(|e| Error::invalid(e.to_string()))?;
            let draws: Vec<f64> = (0..s.len())
                .map(|_| g.sample(rng).max(f64::MIN_POSITIVE))
                .collect();
            y.push(draws);
        }
        Ok(Box::new(Self::new(y)?))
    }
}
