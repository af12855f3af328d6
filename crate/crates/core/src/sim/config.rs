use serde::{Deserialize, Serialize};

use crate::datasets::Table;
use crate::error::{Error, Result};
use crate::model::Simulate;
use crate::models::{
    BetaLink, BetaRegDesign, BetaRegModel, BinaryDesign, BinaryLink, BinaryModel, GammaStrataModel,
    MatchedTablesDesign, MatchedTablesModel, NormalModel, SkewNormalModel,
};
use crate::numerics::QuadratureSettings;
use crate::solve::{FitOptions, Method};

fn yes() -> bool {
    true
}

fn default_level() -> f64 {
    0.95
}

/// Model structure a simulation draws responses for. Data sources take a
/// CSV path or a bundled name such as `@endometrial`; only the covariates are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelTemplate {
    Binary {
        data: String,
        covariates: Vec<String>,
        #[serde(default = "yes")]
        intercept: bool,
        link: BinaryLink,
        /// Trials per row, 1 for Bernoulli responses.
        #[serde(default)]
        trials: Option<u32>,
    },
    Beta {
        data: String,
        covariates: Vec<String>,
        #[serde(default = "yes")]
        intercept: bool,
        link: BetaLink,
    },
    GammaStrata {
        strata: usize,
        per_stratum: usize,
    },
    Normal {
        n: usize,
        #[serde(default)]
        known_mean: Option<f64>,
    },
    SkewNormal {
        n: usize,
        #[serde(default)]
        quadrature: QuadratureSettings,
    },
    MatchedTables {
        strata: usize,
        controls: u32,
    },
}

impl ModelTemplate {
    /// A model with the template's structure and placeholder responses.
    pub fn build(&self) -> Result<Box<dyn Simulate>> {
        Ok(match self {
            ModelTemplate::Binary {
                data,
                covariates,
                intercept,
                link,
                trials,
            } => {
                let (x, labels) = Table::load(data)?.design(covariates, *intercept)?;
                let n = x.len();
                let m = trials.unwrap_or(1);
                if m == 0 {
                    return Err(Error::invalid("trials must be positive"));
                }
                Box::new(BinaryModel::new(BinaryDesign {
                    x,
                    successes: vec![0.0; n],
                    trials: vec![m as f64; n],
                    link: *link,
                    labels,
                })?)
            }
            ModelTemplate::Beta {
                data,
                covariates,
                intercept,
                link,
            } => {
                let (x, labels) = Table::load(data)?.design(covariates, *intercept)?;
                let n = x.len();
                Box::new(BetaRegModel::new(BetaRegDesign {
                    y: vec![0.5; n],
                    x,
                    link: *link,
                    labels,
                })?)
            }
            ModelTemplate::GammaStrata {
                strata,
                per_stratum,
            } => Box::new(GammaStrataModel::new(vec![
                vec![1.0; *per_stratum];
                *strata
            ])?),
            ModelTemplate::Normal { n, known_mean } => {
                let y = (0..*n).map(|i| i as f64).collect();
                Box::new(NormalModel::new(y, *known_mean)?)
            }
            ModelTemplate::SkewNormal { n, quadrature } => {
                let y = (0..*n).map(|i| i as f64 - 0.5 * *n as f64).collect();
                Box::new(SkewNormalModel::new(y, *quadrature)?)
            }
            ModelTemplate::MatchedTables { strata, controls } => {
                Box::new(MatchedTablesModel::new(MatchedTablesDesign {
                    cases: vec![0.0; *strata],
                    controls: vec![0.0; *strata],
                    m: *controls,
                })?)
            }
        })
    }
}

/// A Monte Carlo study: `replications` datasets drawn from `model` at
/// `truth`, each fitted by every method in `methods`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: ModelTemplate,
    pub truth: Vec<f64>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub methods: Vec<Method>,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Components summarised (and fitted, for the profile method); all by default.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    /// Score-type intervals for the methods that have them.
    #[serde(default = "yes")]
    pub score_intervals: bool,
    #[serde(default)]
    pub fit: FitOptions,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications: must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods: at least one method is required"));
        }
        if !(0.0..1.0).contains(&self.level) {
            return Err(Error::invalid("level: must lie in [0, 1)"));
        }
        self.fit.validate()?;
        let model = self.model.build()?;
        if self.truth.len() != model.dim() {
            return Err(Error::invalid(format!(
                "truth: model has {} parameters, truth has {}",
                model.dim(),
                self.truth.len()
            )));
        }
        model.check_domain(&self.truth)?;
        if let Some(c) = &self.components {
            if c.is_empty() || c.iter().any(|&r| r >= model.dim()) {
                return Err(Error::invalid("components: empty or out of range"));
            }
        }
        Ok(())
    }

    pub fn components(&self, dim: usize) -> Vec<usize> {
        self.components
            .clone()
            .unwrap_or_else(|| (0..dim).collect())
    }
}
