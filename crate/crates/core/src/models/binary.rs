//! Binomial regression with logit or probit link, including grouped data.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_finite, CumulantBundle, Model, Simulate, TensorBuilder};
use crate::numerics::{inv_mills, ln_gamma, log_norm_cdf, norm_cdf, norm_pdf, SpdFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLink {
    Logit,
    Probit,
}

impl std::str::FromStr for BinaryLink {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(BinaryLink::Logit),
            "probit" => Ok(BinaryLink::Probit),
            _ => Err(Error::invalid(format!(
                "unknown binary link '{s}' (expected logit or probit)"
            ))),
        }
    }
}

/// Link quantities at one linear predictor value.
#[derive(Debug, Clone, Copy)]
struct LinkEval {
    /// `F(eta)`
    f_: f64,
    /// `1 - F(eta)`, computed without cancellation
    fc: f64,
    /// `F'(eta)`
    d1: f64,
    /// `F''(eta)`
    d2: f64,
    /// `F' / {F (1 - F)}`
    a: f64,
    /// `log F` and `log(1 - F)`
    log_f: f64,
    log_fc: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl BinaryLink {
    fn eval(self, eta: f64) -> LinkEval {
        match self {
            BinaryLink::Logit => {
                let f_ = 1.0 / (1.0 + (-eta).exp());
                let fc = 1.0 / (1.0 + eta.exp());
                let d1 = f_ * fc;
                LinkEval {
                    f_,
                    fc,
                    d1,
                    d2: d1 * (fc - f_),
                    a: 1.0,
                    log_f: -softplus(-eta),
                    log_fc: -softplus(eta),
                }
            }
            BinaryLink::Probit => {
                let d1 = norm_pdf(eta);
                LinkEval {
                    f_: norm_cdf(eta),
                    fc: norm_cdf(-eta),
                    d1,
                    d2: -eta * d1,
                    // phi/Phi(eta) + phi/Phi(-eta) = phi / {Phi (1 - Phi)}
                    a: inv_mills(eta) + inv_mills(-eta),
                    log_f: log_norm_cdf(eta),
                    log_fc: log_norm_cdf(-eta),
                }
            }
        }
    }

    /// Score weight `(y - m F) F' / {F (1 - F)}`, written as
    /// `y A (1 - F) - (m - y) A F` so that it stays finite in the tails.
    fn score_weight(self, eta: f64, y: f64, m: f64) -> f64 {
        match self {
            BinaryLink::Logit => {
                let e = self.eval(eta);
                y * e.fc - (m - y) * e.f_
            }
            BinaryLink::Probit => y * inv_mills(eta) - (m - y) * inv_mills(-eta),
        }
    }
}

/// Grouped binomial data: `successes[i]` out of `trials[i]` at covariate row `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDesign {
    pub x: Vec<Vec<f64>>,
    pub successes: Vec<f64>,
    pub trials: Vec<f64>,
    pub link: BinaryLink,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BinaryModel {
    rows: Vec<Vec<(usize, f64)>>,
    y: Vec<f64>,
    m: Vec<f64>,
    p: usize,
    link: BinaryLink,
    labels: Vec<String>,
    log_choose: f64,
}

impl BinaryModel {
    pub fn new(design: BinaryDesign) -> Result<Self> {
        let n = design.x.len();
        if n == 0 {
            return Err(Error::invalid("binary model needs at least one row"));
        }
        if design.successes.len() != n || design.trials.len() != n {
            return Err(Error::invalid("response and design lengths differ"));
        }
        let p = design.labels.len();
        if p == 0 {
            return Err(Error::invalid("binary model needs at least one covariate"));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in design.x.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("expected {p} covariates, got {}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data {
                    line: i + 1,
                    message: "non-finite covariate".into(),
                });
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect(),
            );
        }
        for i in 0..n {
            let (y, m) = (design.successes[i], design.trials[i]);
            if !(m >= 1.0) || m.fract() != 0.0 || !(0.0..=m).contains(&y) || y.fract() != 0.0 {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("invalid response {y} out of {m} trials"),
                });
            }
        }
        let log_choose = design
            .successes
            .iter()
            .zip(&design.trials)
            .map(|(&y, &m)| ln_gamma(m + 1.0) - ln_gamma(y + 1.0) - ln_gamma(m - y + 1.0))
            .sum();
        let model = Self {
            rows,
            y: design.successes,
            m: design.trials,
            p,
            link: design.link,
            labels: design.labels,
            log_choose,
        };
        if let Err(e) = SpdFactor::new(&model.gram()) {
            log::warn!("design matrix may not have full column rank: {e}");
        }
        Ok(model)
    }

    /// Ungrouped 0/1 responses.
    pub fn from_binary(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        link: BinaryLink,
        labels: Vec<String>,
    ) -> Result<Self> {
        let trials = vec![1.0; y.len()];
        Self::new(BinaryDesign {
            x,
            successes: y,
            trials,
            link,
            labels,
        })
    }

    pub fn link(&self) -> BinaryLink {
        self.link
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn successes(&self) -> &[f64] {
        &self.y
    }

    pub fn trials(&self) -> &[f64] {
        &self.m
    }

    /// Dense copy of the design matrix.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.rows.len(), self.p);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                x[(i, j)] = v;
            }
        }
        x
    }

    /// Copy of this model with the responses replaced.
    pub fn with_successes(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::invalid("response length differs from design"));
        }
        Self::new(BinaryDesign {
            x: {
                let x = self.design_matrix();
                (0..x.nrows())
                    .map(|i| x.row(i).iter().copied().collect())
                    .collect()
            },
            successes: y,
            trials: self.m.clone(),
            link: self.link,
            labels: self.labels.clone(),
        })
    }

    fn with_successes_fast(&self, y: Vec<f64>) -> Self {
        let log_choose = y
            .iter()
            .zip(&self.m)
            .map(|(&y, &m)| ln_gamma(m + 1.0) - ln_gamma(y + 1.0) - ln_gamma(m - y + 1.0))
            .sum();
        Self {
            rows: self.rows.clone(),
            y,
            m: self.m.clone(),
            p: self.p,
            link: self.link,
            labels: self.labels.clone(),
            log_choose,
        }
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.p, self.p);
        for row in &self.rows {
            for &(j, a) in row {
                for &(k, b) in row {
                    g[(j, k)] += a * b;
                }
            }
        }
        g
    }

    fn eta(&self, row: &[(usize, f64)], beta: &[f64]) -> f64 {
        row.iter().map(|&(j, v)| v * beta[j]).sum()
    }

    /// Expected information `X^T W X` with `W = m F'^2 / {F (1 - F)}`.
    pub fn information(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut info = DMatrix::zeros(self.p, self.p);
        for (i, row) in self.rows.iter().enumerate() {
            let e = self.link.eval(self.eta(row, beta));
            let w = self.m[i] * e.a * e.d1;
            for &(j, a) in row {
                for &(k, b) in row {
                    info[(j, k)] += w * a * b;
                }
            }
        }
        info
    }

    /// One modified iteratively reweighted least squares step,
    /// `(X^T W X)^{-1} X^T W {X (beta + m1) + v}` with working residuals
    /// `v_i = (y_i / m_i - F) / F'`.
    pub fn irls_step(&self, beta: &[f64], m1: &DVector<f64>) -> Result<DVector<f64>> {
        check_finite(&self.labels, beta)?;
        let shifted: Vec<f64> = beta.iter().zip(m1.iter()).map(|(b, m)| b + m).collect();
        let mut xtwx = DMatrix::zeros(self.p, self.p);
        let mut xtwz = DVector::zeros(self.p);
        for (i, row) in self.rows.iter().enumerate() {
            let eta = self.eta(row, beta);
            let e = self.link.eval(eta);
            let w = self.m[i] * e.a * e.d1;
            let v = (self.y[i] / self.m[i] - e.f_) / e.d1;
            let z = self.eta(row, &shifted) + v;
            for &(j, a) in row {
                xtwz[j] += w * a * z;
                for &(k, b) in row {
                    xtwx[(j, k)] += w * a * b;
                }
            }
        }
        Ok(SpdFactor::new(&xtwx)?.solve(&xtwz))
    }
}

impl Model for BinaryModel {
    fn dim(&self) -> usize {
        self.p
    }

    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn log_likelihood(&self, beta: &[f64]) -> Result<f64> {
        check_finite(&self.labels, beta)?;
        let mut ll = self.log_choose;
        for (i, row) in self.rows.iter().enumerate() {
            let e = self.link.eval(self.eta(row, beta));
            let (y, m) = (self.y[i], self.m[i]);
            if y > 0.0 {
                ll += y * e.log_f;
            }
            if m - y > 0.0 {
                ll += (m - y) * e.log_fc;
            }
        }
        Ok(ll)
    }

    fn score(&self, beta: &[f64]) -> Result<DVector<f64>> {
        check_finite(&self.labels, beta)?;
        let mut u = DVector::zeros(self.p);
        for (i, row) in self.rows.iter().enumerate() {
            let w = self
                .link
                .score_weight(self.eta(row, beta), self.y[i], self.m[i]);
            for &(j, v) in row {
                u[j] += w * v;
            }
        }
        Ok(u)
    }

    fn score_info(&self, beta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.score(beta)?, self.information(beta)))
    }

    fn cumulants(&self, beta: &[f64]) -> Result<CumulantBundle> {
        let score = self.score(beta)?;
        let info = self.information(beta);
        let mut nu3 = TensorBuilder::new(self.p);
        let mut numix = TensorBuilder::new(self.p);
        for (i, row) in self.rows.iter().enumerate() {
            let e = self.link.eval(self.eta(row, beta));
            let m = self.m[i];
            // third cumulant of (y - mF) A is m F(1-F)(1-2F) A^3 = m A^2 F' (1 - 2F)
            let w3 = m * e.a * e.a * e.d1 * (e.fc - e.f_);
            // E(u_r u_st) = m F(1-F) A A' x_r x_s x_t = m A {F'' - A F' (1 - 2F)} x_r x_s x_t
            let wm = m * e.a * (e.d2 - e.a * e.d1 * (e.fc - e.f_));
            for &(r, xr) in row {
                for &(s, xs) in row {
                    for &(t, xt) in row {
                        let x3 = xr * xs * xt;
                        if w3 != 0.0 {
                            nu3.add(r, s, t, w3 * x3);
                        }
                        if wm != 0.0 {
                            numix.add(r, s, t, wm * x3);
                        }
                    }
                }
            }
        }
        Ok(CumulantBundle {
            score,
            info,
            nu3: nu3.finish(),
            numix: numix.finish(),
        })
    }

    fn default_start(&self) -> Vec<f64> {
        vec![0.0; self.p]
    }
}

impl Simulate for BinaryModel {
    fn simulate(&self, beta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        Ok(Box::new(self.simulate_binary(beta, rng)?))
    }
}

impl BinaryModel {
    pub fn simulate_binary(&self, beta: &[f64], rng: &mut dyn RngCore) -> Result<Self> {
        check_finite(&self.labels, beta)?;
        let mut y = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let prob = self.link.eval(self.eta(row, beta)).f_;
            let dist =
                Binomial::new(self.m[i] as u64, prob).map_err(|e| Error::invalid(e.to_string()))?;
            y.push(dist.sample(rng) as f64);
        }
        Ok(self.with_successes_fast(y))
    }
}
