//! Maximum likelihood, Firth and median bias-reduced fitting by (modified)
//! Fisher scoring, plus profile fits and confidence intervals.

mod fit;
mod intervals;
mod profile;

pub use fit::{adjusted_score, fit, insensitivity_matrix, AdjustedScore};
pub use intervals::{
    score_interval, score_interval_from, wald_interval, ConfidenceInterval, IntervalKind,
    ScoreStatistic,
};
pub use profile::{constrained_mle, profile_median_fit, profile_score, ProfileScore};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    Firth,
    #[serde(alias = "mbr")]
    MedianBr,
    #[serde(alias = "mbr-profile")]
    MedianBrProfile,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Firth => "firth",
            Method::MedianBr => "median-br",
            Method::MedianBrProfile => "median-br-profile",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "firth" => Ok(Method::Firth),
            "mbr" | "median-br" => Ok(Method::MedianBr),
            "mbr-profile" | "median-br-profile" => Ok(Method::MedianBrProfile),
            _ => Err(Error::invalid(format!(
                "unknown method '{s}' (expected mle, firth, mbr or mbr-profile)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Bound on the adjusted score scaled by `diag(i)^{-1/2}`, in the infinity norm.
    pub tolerance: f64,
    pub step_halvings: u32,
    pub start: Option<Vec<f64>>,
    /// Infinity-norm size of the iterate beyond which a monotone likelihood
    /// increase is treated as divergence of the maximum likelihood estimate.
    pub divergence_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-8,
            step_halvings: 10,
            start: None,
            divergence_threshold: 50.0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.tolerance > 0.0) || !(self.divergence_threshold > 0.0)
        {
            return Err(Error::invalid(
                "fit options: iterations, tolerance and divergence threshold must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub theta: Vec<f64>,
    pub adjusted_score_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: Method,
    pub labels: Vec<String>,
    /// Final iterate. Components flagged infinite hold the last (large) value.
    pub estimates: Vec<f64>,
    /// `sqrt(diag(i^{-1}))`, infinite for infinite components.
    pub std_errors: Vec<f64>,
    /// `i^{-1}` on the finite components; rows and columns of infinite
    /// components are zero apart from an infinite diagonal.
    pub vcov: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub finite: Vec<bool>,
    pub trace: Vec<TraceEntry>,
    pub log_likelihood: f64,
    /// Component fitted by a profile fit.
    pub profile_component: Option<usize>,
}

impl FitResult {
    /// Estimates with infinite components reported as signed infinities.
    pub fn reported_estimates(&self) -> Vec<f64> {
        self.estimates
            .iter()
            .zip(&self.finite)
            .map(|(&v, &f)| if f { v } else { f64::INFINITY.copysign(v) })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.finite.iter().all(|&f| f)
    }
}
