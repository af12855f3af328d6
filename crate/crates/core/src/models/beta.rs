//! Beta regression with mean link and precision `phi`.
//!
//! With `a = phi mu` and `b = phi (1 - mu)` each score component is linear in
//! `t = log y` and `z = log(1 - y)`: `u_k = (da/dtheta_k) (t - E t) + (db/dtheta_k) (z - E z)`.
//! All expected quantities follow from the joint cumulants of `(t, z)`:
//! `var t = psi1(a) - psi1(phi)`, `var z = psi1(b) - psi1(phi)`,
//! `cov(t, z) = -psi1(phi)`, with third cumulants `psi2(a) - psi2(phi)`,
//! `psi2(b) - psi2(phi)` and `-psi2(phi)` for every mixed term.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_finite, CumulantBundle, Model, Simulate, TensorBuilder};
use crate::numerics::{digamma, ln_gamma, tetragamma, trigamma, SpdFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaLink {
    Logit,
    Log,
    Cloglog,
}

impl std::str::FromStr for BetaLink {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(BetaLink::Logit),
            "log" => Ok(BetaLink::Log),
            "cloglog" => Ok(BetaLink::Cloglog),
            _ => Err(Error::invalid(format!(
                "unknown beta link '{s}' (expected logit, log or cloglog)"
            ))),
        }
    }
}

impl BetaLink {
    /// `(mu, dmu/deta, d2mu/deta2)`
    pub fn mean(self, eta: f64) -> (f64, f64, f64) {
        match self {
            BetaLink::Logit => {
                let mu = 1.0 / (1.0 + (-eta).exp());
                let d1 = mu * (1.0 - mu);
                (mu, d1, d1 * (1.0 - 2.0 * mu))
            }
            BetaLink::Log => {
                let mu = eta.exp();
                (mu, mu, mu)
            }
            BetaLink::Cloglog => {
                let e = eta.exp();
                let d1 = e * (-e).exp();
                (-(-e).exp_m1(), d1, d1 * (1.0 - e))
            }
        }
    }

    /// `g(mu)`
    pub fn link(self, mu: f64) -> f64 {
        match self {
            BetaLink::Logit => (mu / (1.0 - mu)).ln(),
            BetaLink::Log => mu.ln(),
            BetaLink::Cloglog => (-(-mu).ln_1p()).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRegDesign {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub link: BetaLink,
    /// Names of the regression coefficients; `phi` is appended.
    pub labels: Vec<String>,
}

/// Parameter order `(beta_1, ..., beta_p, phi)`.
#[derive(Debug, Clone)]
pub struct BetaRegModel {
    y: Vec<f64>,
    x: DMatrix<f64>,
    link: BetaLink,
    labels: Vec<String>,
}

/// Per-observation quantities at a parameter point.
struct Obs {
    mu: f64,
    d1: f64,
    d2: f64,
    a: f64,
    b: f64,
}

impl BetaRegModel {
    pub fn new(design: BetaRegDesign) -> Result<Self> {
        let n = design.y.len();
        let p = design.labels.len();
        if n == 0 || p == 0 {
            return Err(Error::invalid(
                "beta regression needs observations and covariates",
            ));
        }
        if design.x.len() != n {
            return Err(Error::invalid("response and design lengths differ"));
        }
        for (i, &v) in design.y.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("response {v} is not strictly inside (0, 1)"),
                });
            }
        }
        let mut x = DMatrix::zeros(n, p);
        for (i, row) in design.x.iter().enumerate() {
            if row.len() != p || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("expected {p} finite covariates"),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let mut labels = design.labels;
        labels.push("phi".into());
        Ok(Self {
            y: design.y,
            x,
            link: design.link,
            labels,
        })
    }

    pub fn link(&self) -> BetaLink {
        self.link
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    fn p_beta(&self) -> usize {
        self.x.ncols()
    }

    fn observations(&self, theta: &[f64]) -> Result<Vec<Obs>> {
        check_finite(&self.labels, theta)?;
        let p = self.p_beta();
        let phi = theta[p];
        if !(phi > 0.0) {
            return Err(Error::Domain {
                component: "phi".into(),
                value: phi,
            });
        }
        let mut out = Vec::with_capacity(self.y.len());
        for i in 0..self.y.len() {
            let eta: f64 = (0..p).map(|j| self.x[(i, j)] * theta[j]).sum();
            let (mu, d1, d2) = self.link.mean(eta);
            if !(mu > 0.0 && mu < 1.0) {
                return Err(Error::Domain {
                    component: format!("mu[{}]", i + 1),
                    value: mu,
                });
            }
            out.push(Obs {
                mu,
                d1,
                d2,
                a: phi * mu,
                b: phi * (1.0 - mu),
            });
        }
        Ok(out)
    }

    /// `(da/dtheta, db/dtheta)` for observation `i`.
    fn first_coefficients(&self, i: usize, o: &Obs, phi: f64, ca: &mut [f64], cb: &mut [f64]) {
        let p = self.p_beta();
        for j in 0..p {
            ca[j] = phi * o.d1 * self.x[(i, j)];
            cb[j] = -ca[j];
        }
        ca[p] = o.mu;
        cb[p] = 1.0 - o.mu;
    }

    /// `d2a/(dtheta_r dtheta_s)`; the corresponding `b` derivative is its negative.
    fn second_coefficient(&self, i: usize, o: &Obs, phi: f64, r: usize, s: usize) -> f64 {
        let p = self.p_beta();
        match (r < p, s < p) {
            (true, true) => phi * o.d2 * self.x[(i, r)] * self.x[(i, s)],
            (true, false) => o.d1 * self.x[(i, r)],
            (false, true) => o.d1 * self.x[(i, s)],
            (false, false) => 0.0,
        }
    }

    /// Starting values: least squares of `g(y)` on `X`, then a moment estimate of `phi`.
    fn moment_start(&self) -> Option<Vec<f64>> {
        let (n, p) = (self.y.len(), self.p_beta());
        if n <= p {
            return None;
        }
        let gy = DVector::from_iterator(n, self.y.iter().map(|&v| self.link.link(v)));
        let xtx = self.x.transpose() * &self.x;
        let beta = SpdFactor::new(&xtx)
            .ok()?
            .solve(&(self.x.transpose() * &gy));
        let eta = &self.x * &beta;
        let resid = &gy - &eta;
        let s2 = resid.dot(&resid) / (n - p) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let (mu, d1, _) = self.link.mean(eta[i]);
            if !(mu > 0.0 && mu < 1.0) {
                return None;
            }
            acc += mu * (1.0 - mu) / (s2 * d1 * d1);
        }
        let phi = acc / n as f64 - 1.0;
        let mut start: Vec<f64> = beta.iter().copied().collect();
        start.push(if phi > 0.0 && phi.is_finite() {
            phi
        } else {
            1.0
        });
        Some(start)
    }
}

impl Model for BetaRegModel {
    fn dim(&self) -> usize {
        self.p_beta() + 1
    }

    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn check_domain(&self, theta: &[f64]) -> Result<()> {
        self.observations(theta).map(|_| ())
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let obs = self.observations(theta)?;
        let phi = theta[self.p_beta()];
        let lg_phi = ln_gamma(phi);
        Ok(obs
            .iter()
            .zip(&self.y)
            .map(|(o, &y)| {
                (o.a - 1.0) * y.ln() + (o.b - 1.0) * (-y).ln_1p() + lg_phi
                    - ln_gamma(o.a)
                    - ln_gamma(o.b)
            })
            .sum())
    }

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let obs = self.observations(theta)?;
        let phi = theta[self.p_beta()];
        let k = self.dim();
        let dg_phi = digamma(phi)?;
        let (mut ca, mut cb) = (vec![0.0; k], vec![0.0; k]);
        let mut u = DVector::zeros(k);
        for (i, o) in obs.iter().enumerate() {
            let tbar = self.y[i].ln() - digamma(o.a)? + dg_phi;
            let zbar = (-self.y[i]).ln_1p() - digamma(o.b)? + dg_phi;
            self.first_coefficients(i, o, phi, &mut ca, &mut cb);
            for r in 0..k {
                u[r] += ca[r] * tbar + cb[r] * zbar;
            }
        }
        Ok(u)
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle> {
        let score = self.score(theta)?;
        let obs = self.observations(theta)?;
        let phi = theta[self.p_beta()];
        let k = self.dim();
        let (t1_phi, t2_phi) = (trigamma(phi)?, tetragamma(phi)?);
        let mut info = DMatrix::zeros(k, k);
        let mut nu3 = TensorBuilder::new(k);
        let mut numix = TensorBuilder::new(k);
        let (mut ca, mut cb) = (vec![0.0; k], vec![0.0; k]);
        for (i, o) in obs.iter().enumerate() {
            self.first_coefficients(i, o, phi, &mut ca, &mut cb);
            let cs: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x + y).collect();
            // second-order cumulants split as A A (k_tt - k_tz) + B B (k_zz - k_tz) + k_tz S S
            let k_tz = -t1_phi;
            let k_tt = trigamma(o.a)? - t1_phi - k_tz;
            let k_zz = trigamma(o.b)? - t1_phi - k_tz;
            // third-order analogue with the common mixed cumulant -psi2(phi)
            let k_m = -t2_phi;
            let k_ttt = tetragamma(o.a)? - t2_phi - k_m;
            let k_zzz = tetragamma(o.b)? - t2_phi - k_m;
            for r in 0..k {
                for s in 0..k {
                    info[(r, s)] +=
                        ca[r] * ca[s] * k_tt + cb[r] * cb[s] * k_zz + cs[r] * cs[s] * k_tz;
                    let da = self.second_coefficient(i, o, phi, r, s);
                    for t in 0..k {
                        let v3 = ca[r] * ca[s] * ca[t] * k_ttt
                            + cb[r] * cb[s] * cb[t] * k_zzz
                            + cs[r] * cs[s] * cs[t] * k_m;
                        if v3 != 0.0 {
                            nu3.add(r, s, t, v3);
                        }
                        // E(u_t u_rs) with u_rs random part da (t - E t) - da (z - E z)
                        let vm = ca[t] * da * k_tt - cb[t] * da * k_zz;
                        if vm != 0.0 {
                            numix.add(t, r, s, vm);
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
        self.moment_start().unwrap_or_else(|| {
            let mut s = vec![0.0; self.dim()];
            s[self.p_beta()] = 1.0;
            s
        })
    }
}

impl Simulate for BetaRegModel {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>> {
        let obs = self.observations(theta)?;
        let mut y = Vec::with_capacity(obs.len());
        for o in &obs {
            let dist = Beta::new(o.a, o.b).map_err(|e| Error::invalid(e.to_string()))?;
            // redraw the rare values that round to an endpoint
            let draw = (0..100)
                .map(|_| dist.sample(rng))
                .find(|v| *v > 0.0 && *v < 1.0)
                .ok_or_else(|| Error::invalid("beta draws kept rounding to 0 or 1"))?;
            y.push(draw);
        }
        Ok(Box::new(Self {
            y,
            x: self.x.clone(),
            link: self.link,
            labels: self.labels.clone(),
        }))
    }
}
