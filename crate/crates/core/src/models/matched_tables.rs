//! Matched 2x2 tables: one case and `m` controls per stratum, common log odds ratio.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CumulantBundle, Model, Simulate};
use crate::models::binary::{BinaryDesign, BinaryLink, BinaryModel};
use crate::numerics::{find_root, try_expand_bracket, DEFAULT_ROOT_TOL};

/// `cases[a] ~ Bi(1, expit(lambda_a + psi))`, `controls[a] ~ Bi(m, expit(lambda_a))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedTablesDesign {
    pub cases: Vec<f64>,
    pub controls: Vec<f64>,
    pub m: u32,
}

/// Logistic model with parameter order `(psi, lambda_1, ..., lambda_q)`.
#[derive(Debug, Clone)]
pub struct MatchedTablesModel {
    inner: BinaryModel,
    q: usize,
    m: u32,
}

impl MatchedTablesModel {
    pub fn new(design: MatchedTablesDesign) -> Result<Self> {
        let q = design.cases.len();
        if q == 0 || design.controls.len() != q {
            return Err(Error::invalid(
                "matched tables need equal, nonzero numbers of cases and controls",
            ));
        }
        if design.m < 1 {
            return Err(Error::invalid("at least one control per table is required"));
        }
        let p = q + 1;
        let mut x = Vec::with_capacity(2 * q);
        let mut successes = Vec::with_capacity(2 * q);
        let mut trials = Vec::with_capacity(2 * q);
        for a in 0..q {
            let mut case = vec![0.0; p];
            case[0] = 1.0;
            case[a + 1] = 1.0;
            let mut control = vec![0.0; p];
            control[a + 1] = 1.0;
            x.push(case);
            successes.push(design.cases[a]);
            trials.push(1.0);
            x.push(control);
            successes.push(design.controls[a]);
            trials.push(design.m as f64);
        }
        let labels = std::iter::once("psi".to_string())
            .chain((1..=q).map(|a| format!("lambda{a}")))
            .collect();
        let inner = BinaryModel::new(BinaryDesign {
            x,
            successes,
            trials,
            link: BinaryLink::Logit,
            labels,
        })?;
        Ok(Self {
            inner,
            q,
            m: design.m,
        })
    }

    pub fn tables(&self) -> usize {
        self.q
    }

    pub fn controls_per_table(&self) -> u32 {
        self.m
    }

    pub fn binary(&self) -> &BinaryModel {
        &self.inner
    }

    /// Number of exposed cases, `t = sum_a cases[a]`.
    pub fn t(&self) -> f64 {
        self.inner.successes().iter().step_by(2).sum()
    }

    /// Stratum totals `s_a = cases[a] + controls[a]`.
    pub fn stratum_totals(&self) -> Vec<f64> {
        self.inner
            .successes()
            .chunks(2)
            .map(|c| c[0] + c[1])
            .collect()
    }

    /// Conditional maximum likelihood estimate of `psi` given the stratum
    /// totals; `+-inf` when `t` sits at an end of its conditional support.
    pub fn conditional_mle(&self) -> Result<f64> {
        let n = self.m as f64 + 1.0;
        let informative: Vec<f64> = self
            .stratum_totals()
            .into_iter()
            .filter(|&s| s > 0.0 && s < n)
            .collect();
        if informative.is_empty() {
            return Err(Error::EmptySupport);
        }
        let t_inf: f64 = self
            .inner
            .successes()
            .chunks(2)
            .filter(|c| c[0] + c[1] > 0.0 && c[0] + c[1] < n)
            .map(|c| c[0])
            .sum();
        if t_inf == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if t_inf == informative.len() as f64 {
            return Ok(f64::INFINITY);
        }
        // P(case exposed | s) = s rho / (s rho + n - s)
        let score = |psi: f64| {
            let rho = psi.exp();
            t_inf
                - informative
                    .iter()
                    .map(|&s| s * rho / (s * rho + n - s))
                    .sum::<f64>()
        };
        let (lo, hi) = try_expand_bracket(|x| Ok(score(x)), -1.0, 1.0)?;
        find_root(score, lo, hi, DEFAULT_ROOT_TOL)
    }
}

impl Model for MatchedTablesModel {
    fn dim(&self) -> usize {
        self.q + 1
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels()
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        self.inner.log_likelihood(theta)
    }

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.inner.score(theta)
    }

    fn score_info(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.inner.score_info(theta)
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        self.inner.cumulants(theta)
    }

    fn default_start(&self) -> Vec<f64> {
        vec![0.0; self.q + 1]
    }
}

impl Simulate for MatchedTablesModel {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        Ok(Box::new(Self {
            inner: self.inner.simulate_binary(theta, rng)?,
            q: self.q,
            m: self.m,
        }))
    }
}
