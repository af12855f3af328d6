use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::SimulationConfig;
use super::summary::{summarize, ComponentSample, MethodTotals, SimulationSummary, SummaryRow};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::solve::{
    fit, profile_median_fit, score_interval_from, wald_interval, ConfidenceInterval, FitOptions,
    Method, ScoreStatistic,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MEDSCORE_THREADS";
const KEPT_FAILURE_MESSAGES: usize = 5;

/// Generator for replicate `rep`: the seed picks the key, the replicate the stream.
pub fn replicate_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// One method's result on one replicate, for the summarised components.
#[derive(Debug, Clone)]
struct Outcome {
    estimates: Vec<f64>,
    /// Every summarised component finite.
    all_finite: bool,
    wald: Vec<ConfidenceInterval>,
    score: Vec<Option<ConfidenceInterval>>,
}

fn score_statistic(method: Method) -> Option<ScoreStatistic> {
    match method {
        Method::Mle => Some(ScoreStatistic::Mle),
        Method::Firth => None,
        Method::MedianBr | Method::MedianBrProfile => Some(ScoreStatistic::Median),
    }
}

fn fit_one(
    model: &dyn Model,
    method: Method,
    comps: &[usize],
    cfg: &SimulationConfig,
) -> Result<Outcome> {
    let opts: &FitOptions = &cfg.fit;
    let stat = score_statistic(method).filter(|_| cfg.score_intervals);
    let mut out = Outcome {
        estimates: Vec::with_capacity(comps.len()),
        all_finite: true,
        wald: Vec::with_capacity(comps.len()),
        score: Vec::new(),
    };
    let push = |f: &crate::solve::FitResult, r: usize, out: &mut Outcome| -> Result<()> {
        if !f.converged {
            return Err(Error::invalid(format!("{method} fit did not converge")));
        }
        out.estimates.push(f.reported_estimates()[r]);
        out.wald.push(wald_interval(f, r, cfg.level)?);
        if let Some(s) = stat {
            let ci = if f.finite[r] {
                score_interval_from(model, r, cfg.level, opts, s, &f.estimates).ok()
            } else {
                None
            };
            out.score.push(ci);
        }
        Ok(())
    };
    if method == Method::MedianBrProfile {
        for &r in comps {
            let f = profile_median_fit(model, r, opts)?;
            out.all_finite &= f.finite[r];
            push(&f, r, &mut out)?;
        }
    } else {
        let f = fit(model, method, opts)?;
        // nuisance components may diverge while the summarised ones stay finite
        out.all_finite = comps.iter().all(|&r| f.finite[r]);
        for &r in comps {
            push(&f, r, &mut out)?;
        }
    }
    Ok(out)
}

fn worker_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs the study on the number of threads named by `MEDSCORE_THREADS`
/// (rayon's default when unset).
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationSummary> {
    run_simulation_with_threads(cfg, worker_count())
}

/// Results do not depend on `threads`: every replicate draws from its own
/// stream and the reduction runs in replicate order.
pub fn run_simulation_with_threads(
    cfg: &SimulationConfig,
    threads: Option<usize>,
) -> Result<SimulationSummary> {
    cfg.validate()?;
    let template = cfg.model.build()?;
    let comps = cfg.components(template.dim());
    let labels = template.labels();

    let one = |rep: usize| -> Vec<std::result::Result<Outcome, String>> {
        let mut rng = replicate_rng(cfg.seed, rep);
        match template.simulate(&cfg.truth, &mut rng) {
            Ok(data) => cfg
                .methods
                .iter()
                .map(|&m| {
                    fit_one(data.as_ref(), m, &comps, cfg)
                        .map_err(|e| format!("replicate {rep}: {e}"))
                })
                .collect(),
            Err(e) => {
                vec![Err(format!("replicate {rep}: simulation failed: {e}")); cfg.methods.len()]
            }
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<Vec<std::result::Result<Outcome, String>>> =
        pool.install(|| (0..cfg.replications).into_par_iter().map(one).collect());

    let mut rows = Vec::new();
    let mut totals = Vec::new();
    for (k, &method) in cfg.methods.iter().enumerate() {
        let mut failures = 0;
        let mut messages = Vec::new();
        let mut infinite = 0;
        let mut samples = vec![ComponentSample::default(); comps.len()];
        let conditional = method == Method::Mle;
        for rep in &results {
            match &rep[k] {
                Ok(o) => {
                    if !o.all_finite {
                        infinite += 1;
                    }
                    for (j, s) in samples.iter_mut().enumerate() {
                        s.estimates.push(o.estimates[j]);
                        s.finite.push(if conditional {
                            o.all_finite
                        } else {
                            o.estimates[j].is_finite()
                        });
                        s.wald.push(o.wald[j].clone());
                        if !o.score.is_empty() {
                            s.score.push(o.score[j].clone());
                        }
                    }
                }
                Err(msg) => {
                    failures += 1;
                    if messages.len() < KEPT_FAILURE_MESSAGES {
                        messages.push(msg.clone());
                    }
                }
            }
        }
        let fitted = cfg.replications - failures;
        totals.push(MethodTotals {
            method,
            failures,
            infinite_pct: if fitted > 0 {
                100.0 * infinite as f64 / fitted as f64
            } else {
                f64::NAN
            },
            failure_messages: messages,
        });
        if fitted == 0 {
            continue;
        }
        for (j, s) in samples.iter().enumerate() {
            let r = comps[j];
            rows.push(SummaryRow {
                method,
                component: r,
                parameter: labels[r].clone(),
                truth: cfg.truth[r],
                conditional,
                metrics: summarize(s, cfg.truth[r])?,
            });
        }
    }
    Ok(SimulationSummary {
        seed: cfg.seed,
        replications: cfg.replications,
        level: cfg.level,
        rows,
        methods: totals,
    })
}
