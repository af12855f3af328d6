use super::config::{ModelTemplate, SimulationConfig};
use crate::datasets::foodexp_model;
use crate::error::{Error, Result};
use crate::models::{BetaLink, BinaryLink};
use crate::numerics::QuadratureSettings;
use crate::solve::{fit, FitOptions, Method};

const NAMES: [&str; 10] = [
    "skew-normal",
    "endometrial",
    "endometrial-beta2",
    "endometrial-probit",
    "gamma-strata",
    "gamma-strata-single",
    "foodexp",
    "normal-known-mean",
    "normal",
    "matched-tables",
];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

fn endometrial(link: BinaryLink) -> ModelTemplate {
    ModelTemplate::Binary {
        data: "@endometrial".into(),
        covariates: vec!["NV".into(), "PI".into(), "EH".into()],
        intercept: true,
        link,
        trials: None,
    }
}

fn config(
    model: ModelTemplate,
    truth: Vec<f64>,
    methods: Vec<Method>,
    components: Option<Vec<usize>>,
) -> SimulationConfig {
    SimulationConfig {
        model,
        truth,
        replications: 1000,
        seed: 0,
        methods,
        level: 0.95,
        components,
        score_intervals: true,
        fit: FitOptions::default(),
    }
}

/// Preset studies on the example designs, with 1000 replicates and seed 0.
///
/// * `skew-normal`: shape 5, n = 50
/// * `endometrial`, `endometrial-probit`: the study's covariates, beta = (1.5, 2, 0, -2)
/// * `endometrial-beta2`: logit, the NV coefficient by profile fit
/// * `gamma-strata`: 50 strata of 5, shape e, unit rates; `-single`: one stratum of 5
/// * `foodexp`: beta regression at the fitted maximum likelihood estimate
/// * `normal-known-mean`, `normal`: n = 10, unit variance
/// * `matched-tables`: 50 tables, 3 controls, log odds ratio 1, zero stratum effects
pub fn builtin(name: &str) -> Result<SimulationConfig> {
    use Method::*;
    let all = vec![Mle, Firth, MedianBr];
    Ok(match name {
        "skew-normal" => config(
            ModelTemplate::SkewNormal {
                n: 50,
                quadrature: QuadratureSettings::default(),
            },
            vec![5.0],
            all,
            None,
        ),
        "endometrial" => config(
            endometrial(BinaryLink::Logit),
            vec![1.5, 2.0, 0.0, -2.0],
            all,
            None,
        ),
        "endometrial-probit" => config(
            endometrial(BinaryLink::Probit),
            vec![1.5, 2.0, 0.0, -2.0],
            all,
            None,
        ),
        "endometrial-beta2" => config(
            endometrial(BinaryLink::Logit),
            vec![1.5, 2.0, 0.0, -2.0],
            vec![Mle, Firth, MedianBrProfile],
            Some(vec![1]),
        ),
        "gamma-strata" | "gamma-strata-single" => {
            let strata = if name == "gamma-strata" { 50 } else { 1 };
            let mut truth = vec![1.0; strata + 1];
            truth[0] = std::f64::consts::E;
            config(
                ModelTemplate::GammaStrata {
                    strata,
                    per_stratum: 5,
                },
                truth,
                vec![Mle, Firth, MedianBrProfile],
                Some(vec![0]),
            )
        }
        "foodexp" => {
            let m = foodexp_model(BetaLink::Logit)?;
            let truth = fit(&m, Mle, &FitOptions::default())?.estimates;
            config(
                ModelTemplate::Beta {
                    data: "@foodexp".into(),
                    covariates: vec!["income".into(), "persons".into()],
                    intercept: true,
                    link: BetaLink::Logit,
                },
                truth,
                all,
                None,
            )
        }
        "normal-known-mean" => config(
            ModelTemplate::Normal {
                n: 10,
                known_mean: Some(0.0),
            },
            vec![1.0],
            all,
            None,
        ),
        "normal" => config(
            ModelTemplate::Normal {
                n: 10,
                known_mean: None,
            },
            vec![0.0, 1.0],
            vec![Mle, Firth, MedianBr, MedianBrProfile],
            None,
        ),
        "matched-tables" => {
            let mut truth = vec![0.0; 51];
            truth[0] = 1.0;
            config(
                ModelTemplate::MatchedTables {
                    strata: 50,
                    controls: 3,
                },
                truth,
                vec![Mle, Firth, MedianBrProfile],
                Some(vec![0]),
            )
        }
        _ => {
            return Err(Error::invalid(format!(
                "unknown built-in study `{name}` (known: {})",
                NAMES.join(", ")
            )))
        }
    })
}
