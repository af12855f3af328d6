use serde::{Deserialize, Serialize};

use super::profile::ProfilePath;
use super::{fit, profile_median_fit, FitOptions, FitResult, Method};
use crate::adjust::profile_cumulants;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{norm_quantile, try_find_root, DEFAULT_ROOT_TOL};

/// Outward steps of `2 s.e.` tried for each score-interval endpoint.
const MAX_INTERVAL_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Wald,
    Score,
}

/// Score used to build a score-type interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreStatistic {
    /// Median modified profile score
    Median,
    /// Unmodified profile score
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub component: usize,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub kind: IntervalKind,
    /// Endpoint not bracketed (or estimate infinite); the bound is infinite.
    pub open_lower: bool,
    pub open_upper: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn check_level(level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid(format!("level {level} outside [0, 1)")));
    }
    Ok(norm_quantile(0.5 * (1.0 + level)))
}

/// `estimate -/+ z s.e.`; infinite estimates give the whole line.
pub fn wald_interval(fit: &FitResult, r: usize, level: f64) -> Result<ConfidenceInterval> {
    if r >= fit.estimates.len() {
        return Err(Error::invalid(format!("component {r} out of range")));
    }
    let z = check_level(level)?;
    if !fit.finite[r] || !fit.std_errors[r].is_finite() {
        log::warn!("wald interval for infinite estimate of {}", fit.labels[r]);
        return Ok(ConfidenceInterval {
            component: r,
            level,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            kind: IntervalKind::Wald,
            open_lower: true,
            open_upper: true,
        });
    }
    let (e, s) = (fit.estimates[r], fit.std_errors[r]);
    let half = if z == 0.0 { 0.0 } else { z * s };
    Ok(ConfidenceInterval {
        component: r,
        level,
        lower: e - half,
        upper: e + half,
        kind: IntervalKind::Wald,
        open_lower: false,
        open_upper: false,
    })
}

/// Interval `{psi : S(psi)^2 <= z^2}` with `S` the chosen profile score
/// standardised by `sqrt(kappa2)` at `(psi, lambda_psi)`.
///
/// Endpoints are bracketed outward from the root of `S` in steps of twice
/// the standard error; an endpoint not bracketed is reported infinite and flagged.
pub fn score_interval(
    model: &dyn Model,
    r: usize,
    level: f64,
    opts: &FitOptions,
    statistic: ScoreStatistic,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let centre = match statistic {
        ScoreStatistic::Median => profile_median_fit(model, r, opts)?,
        ScoreStatistic::Mle => fit(model, Method::Mle, opts)?,
    };
    if !centre.finite[r] {
        return Ok(unbounded(r, level));
    }
    score_interval_from(model, r, level, opts, statistic, &centre.estimates)
}

fn unbounded(r: usize, level: f64) -> ConfidenceInterval {
    ConfidenceInterval {
        component: r,
        level,
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        kind: IntervalKind::Score,
        open_lower: true,
        open_upper: true,
    }
}

/// [`score_interval`] with the search started from `centre`, a point near the
/// root of the score (any converged fit of the model).
pub fn score_interval_from(
    model: &dyn Model,
    r: usize,
    level: f64,
    opts: &FitOptions,
    statistic: ScoreStatistic,
    centre: &[f64],
) -> Result<ConfidenceInterval> {
    let z = check_level(level)?;
    if r >= centre.len() {
        return Err(Error::invalid(format!("component {r} out of range")));
    }
    if !centre[r].is_finite() {
        return Ok(unbounded(r, level));
    }
    let psi0 = centre[r];
    let se = {
        let b = model.cumulants(centre)?;
        1.0 / profile_cumulants(&b, r)?.kappa2.sqrt()
    };
    let step = 2.0 * if se.is_finite() && se > 0.0 { se } else { 1.0 };

    let median = statistic == ScoreStatistic::Median;
    let mut ends = [psi0; 2];
    let mut flags = [false; 2];
    // S decreases in psi: the lower end solves S = z, the upper S = -z
    for (k, target) in [z, -z].into_iter().enumerate() {
        let path = ProfilePath::new(model, r, centre.to_vec(), opts, median);
        let s0 = path.statistic(psi0)?;
        if s0 == target {
            continue;
        }
        let dir = if s0 > target { 1.0 } else { -1.0 };
        match path.bracket(psi0, s0, target, dir, step, MAX_INTERVAL_STEPS, false) {
            Some((lo, hi)) => {
                ends[k] = try_find_root(
                    |x| Ok(path.statistic(x)? - target),
                    lo,
                    hi,
                    DEFAULT_ROOT_TOL,
                )?;
            }
            None => {
                ends[k] = f64::INFINITY.copysign(dir);
                flags[k] = true;
            }
        }
    }
    Ok(ConfidenceInterval {
        component: r,
        level,
        lower: ends[0],
        upper: ends[1],
        kind: IntervalKind::Score,
        open_lower: flags[0],
        open_upper: flags[1],
    })
}
