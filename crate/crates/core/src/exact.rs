//! Exact (conditional) median unbiased estimation for small logistic designs
//! by enumeration of the outcome space.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{BinaryDesign, BinaryLink, BinaryModel};
use crate::numerics::{ln_gamma, try_expand_bracket, try_find_root};
use crate::solve::{fit, FitOptions, Method};

/// Largest number of outcome vectors enumerated.
pub const SUPPORT_LIMIT: usize = 10_000_000;
const ROOT_TOL: f64 = 1e-8;
const INITIAL_BRACKET: (f64, f64) = (-30.0, 30.0);
/// Sufficient-statistic values closer than this are treated as equal.
const MATCH_TOL: f64 = 1e-9;

/// Binomial logistic design `y_i ~ Bi(m_i, pi_i)`, `logit pi_i = x_i theta`,
/// with one coefficient of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerableDesign {
    pub x: Vec<Vec<f64>>,
    pub trials: Vec<u32>,
    /// Column whose sufficient statistic `t = sum_i x_ir y_i` is the target;
    /// the remaining columns give the conditioning statistics `s`.
    pub interest: usize,
}

impl EnumerableDesign {
    /// Single covariate, no intercept, `m` trials per row.
    pub fn simple(x: Vec<f64>, m: u32) -> Self {
        let trials = vec![m; x.len()];
        Self {
            x: x.into_iter().map(|v| vec![v]).collect(),
            trials,
            interest: 0,
        }
    }

    pub fn support_size(&self) -> f64 {
        self.trials.iter().map(|&m| m as f64 + 1.0).product()
    }

    fn validate(&self) -> Result<usize> {
        let n = self.x.len();
        if n == 0 || self.trials.len() != n {
            return Err(Error::invalid(
                "design rows and trials must be nonempty and equal in number",
            ));
        }
        let p = self.x[0].len();
        if self.interest >= p || self.x.iter().any(|r| r.len() != p) {
            return Err(Error::invalid(
                "ragged design or interest column out of range",
            ));
        }
        let size = self.support_size();
        if size > SUPPORT_LIMIT as f64 {
            return Err(Error::SupportOverflow {
                size,
                limit: SUPPORT_LIMIT as f64,
            });
        }
        Ok(p)
    }

    /// Distribution of `t` given the other sufficient statistics equal `s`
    /// (all of them when `s` is `None`), up to the `exp(theta t)` tilt.
    pub fn distribution(&self, s: Option<&[f64]>) -> Result<ExactDistribution> {
        let p = self.validate()?;
        if let Some(s) = s {
            if s.len() != p - 1 {
                return Err(Error::invalid(format!(
                    "expected {} conditioning statistics",
                    p - 1
                )));
            }
        }
        let n = self.x.len();
        let log_choose: Vec<Vec<f64>> = self
            .trials
            .iter()
            .map(|&m| {
                (0..=m)
                    .map(|k| {
                        ln_gamma(m as f64 + 1.0)
                            - ln_gamma(k as f64 + 1.0)
                            - ln_gamma((m - k) as f64 + 1.0)
                    })
                    .collect()
            })
            .collect();
        let mut atoms: Vec<(f64, f64, usize)> = Vec::new();
        let mut y = vec![0u32; n];
        let mut stats = vec![0.0; p];
        // the odometer visits outcomes in mixed-radix order, so `k` encodes `y`
        let mut k = 0usize;
        loop {
            stats.iter_mut().for_each(|v| *v = 0.0);
            let mut lw = 0.0;
            for i in 0..n {
                let yi = y[i] as f64;
                for (v, x) in stats.iter_mut().zip(&self.x[i]) {
                    *v += x * yi;
                }
                lw += log_choose[i][y[i] as usize];
            }
            let keep = s.map_or(true, |s| {
                stats
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != self.interest)
                    .zip(s)
                    .all(|((_, a), b)| (a - b).abs() <= MATCH_TOL * b.abs().max(1.0))
            });
            if keep {
                atoms.push((stats[self.interest], lw, k));
            }
            k += 1;
            // odometer
            let mut i = 0;
            while i < n && y[i] == self.trials[i] {
                y[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            y[i] += 1;
        }
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut log_counts: Vec<f64> = Vec::new();
        let mut witnesses = Vec::new();
        for (t, lw, k) in atoms {
            match support.last() {
                Some(&last) if (t - last).abs() <= MATCH_TOL * last.abs().max(1.0) => {
                    let c = log_counts.last_mut().unwrap();
                    *c = log_add(*c, lw);
                }
                _ => {
                    support.push(t);
                    log_counts.push(lw);
                    witnesses.push(self.decode(k));
                }
            }
        }
        Ok(ExactDistribution {
            support,
            log_counts,
            witnesses,
        })
    }

    fn decode(&self, mut k: usize) -> Vec<u32> {
        self.trials
            .iter()
            .map(|&m| {
                let radix = m as usize + 1;
                let yi = (k % radix) as u32;
                k /= radix;
                yi
            })
            .collect()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, log_add)
}

/// `P_theta(T = t_j) = c_j exp(theta t_j) / sum_k c_k exp(theta t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    /// Distinct values of `t`, increasing.
    pub support: Vec<f64>,
    /// `log c_j`
    pub log_counts: Vec<f64>,
    /// One outcome vector attaining each support value.
    pub witnesses: Vec<Vec<u32>>,
}

impl ExactDistribution {
    fn log_terms(&self, theta: f64) -> Vec<f64> {
        self.support
            .iter()
            .zip(&self.log_counts)
            .map(|(t, c)| c + theta * t)
            .collect()
    }

    pub fn probabilities(&self, theta: f64) -> Vec<f64> {
        let lt = self.log_terms(theta);
        let z = log_sum_exp(lt.iter().copied());
        lt.iter().map(|v| (v - z).exp()).collect()
    }

    /// `log P(T <= t)` if `upper` is false, `log P(T >= t)` otherwise.
    fn log_tail(&self, theta: f64, t: f64, upper: bool) -> f64 {
        let lt = self.log_terms(theta);
        let z = log_sum_exp(lt.iter().copied());
        let eps = MATCH_TOL * t.abs().max(1.0);
        let part = log_sum_exp(
            self.support
                .iter()
                .zip(&lt)
                .filter(|(s, _)| {
                    if upper {
                        **s >= t - eps
                    } else {
                        **s <= t + eps
                    }
                })
                .map(|(_, v)| *v),
        );
        part - z
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        self.support
            .iter()
            .position(|s| (s - t).abs() <= MATCH_TOL * t.abs().max(1.0))
            .ok_or_else(|| Error::invalid(format!("t = {t} is not in the support")))
    }

    /// Exact median unbiased estimate at the observed `t`.
    pub fn median_unbiased(&self, t: f64) -> Result<ExactEstimate> {
        let j = self.index_of(t)?;
        let t = self.support[j];
        let half = 0.5f64.ln();
        let root = |upper: bool| -> Result<f64> {
            let f = |th: f64| Ok(self.log_tail(th, t, upper) - half);
            let (lo, hi) = try_expand_bracket(f, INITIAL_BRACKET.0, INITIAL_BRACKET.1)?;
            try_find_root(f, lo, hi, ROOT_TOL)
        };
        if self.support.len() == 1 {
            return Err(Error::invalid(
                "degenerate distribution: a single support point",
            ));
        }
        // P(T <= t) falls from 1 to 0 in theta unless t is the largest value
        let lower = if j + 1 < self.support.len() {
            Some(root(false)?)
        } else {
            None
        };
        let upper = if j > 0 { Some(root(true)?) } else { None };
        let value = match (lower, upper) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        Ok(ExactEstimate {
            value,
            theta_star: lower,
            theta_star_star: upper,
        })
    }
}

/// `(theta_* + theta_**) / 2`, or whichever of the two exists at the ends of
/// the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactEstimate {
    pub value: f64,
    /// Largest `theta` with `P(T <= t) >= 1/2`.
    pub theta_star: Option<f64>,
    /// Smallest `theta` with `P(T >= t) >= 1/2`.
    pub theta_star_star: Option<f64>,
}

impl ExactEstimate {
    pub fn at_boundary(&self) -> bool {
        self.theta_star.is_none() || self.theta_star_star.is_none()
    }
}

/// Exact median unbiased estimate with no conditioning; the design must have
/// a single column.
pub fn exact_median_unbiased(design: &EnumerableDesign, t: f64) -> Result<ExactEstimate> {
    if design.x.first().map_or(0, Vec::len) != 1 {
        return Err(Error::invalid(
            "unconditional exact estimation needs a one-column design; condition on the rest",
        ));
    }
    design.distribution(None)?.median_unbiased(t)
}

/// Exact conditional median unbiased estimate given the other sufficient
/// statistics `s` (in column order, interest column skipped).
pub fn exact_conditional_median_unbiased(
    design: &EnumerableDesign,
    t: f64,
    s: &[f64],
) -> Result<ExactEstimate> {
    design.distribution(Some(s))?.median_unbiased(t)
}

/// Exact, maximum likelihood and median bias-reduced estimates of the
/// interest coefficient at one value of its sufficient statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: f64,
    pub exact: f64,
    pub mle: f64,
    pub mbr: f64,
}

impl OracleRow {
    pub fn mle_deviation(&self) -> f64 {
        (self.mle - self.exact).abs()
    }

    pub fn mbr_deviation(&self) -> f64 {
        (self.mbr - self.exact).abs()
    }
}

/// Oracle comparison at every support value of `t` (given `s` when present).
/// The likelihood fits use the full logistic model on a witness outcome;
/// they depend on the data only through the sufficient statistics.
pub fn oracle_sweep(
    design: &EnumerableDesign,
    s: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<Vec<OracleRow>> {
    let dist = design.distribution(s)?;
    (0..dist.support.len())
        .map(|j| oracle_row(design, &dist, j, opts))
        .collect()
}

/// Oracle comparison at the observed `t`.
pub fn oracle_at(
    design: &EnumerableDesign,
    t: f64,
    s: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<OracleRow> {
    let dist = design.distribution(s)?;
    let j = dist.index_of(t)?;
    oracle_row(design, &dist, j, opts)
}

fn oracle_row(
    design: &EnumerableDesign,
    dist: &ExactDistribution,
    j: usize,
    opts: &FitOptions,
) -> Result<OracleRow> {
    let t = dist.support[j];
    let exact = dist.median_unbiased(t)?.value;
    let p = design.x[0].len();
    let model = BinaryModel::new(BinaryDesign {
        x: design.x.clone(),
        successes: dist.witnesses[j].iter().map(|&v| v as f64).collect(),
        trials: design.trials.iter().map(|&m| m as f64).collect(),
        link: BinaryLink::Logit,
        labels: (1..=p).map(|c| format!("x{c}")).collect(),
    })?;
    let estimate = |method: Method| -> Result<f64> {
        let f = fit(&model, method, opts)?;
        if !f.converged {
            return Err(Error::invalid(format!(
                "{method} fit did not converge at t = {t}"
            )));
        }
        Ok(f.reported_estimates()[design.interest])
    };
    Ok(OracleRow {
        t,
        exact,
        mle: estimate(Method::Mle)?,
        mbr: estimate(Method::MedianBr)?,
    })
}
