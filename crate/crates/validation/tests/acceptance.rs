//! Acceptance run. Prints one PASS/FAIL line per criterion and exits with a
//! failure status when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use medscore::datasets::{endometrial_model, foodexp_model};
use medscore::exact::{oracle_sweep, EnumerableDesign};
use medscore::models::{BetaLink, BinaryLink, NormalModel};
use medscore::sim::{builtin, builtin_names, run_simulation, SimulationConfig, SimulationSummary};
use medscore::solve::{fit, profile_median_fit, FitOptions, FitResult, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

/// Half a unit in the third decimal.
const THREE_DECIMALS: f64 = 5e-4;
const SEED: u64 = 1;

struct Criterion {
    id: u32,
    title: &'static str,
    /// Runtime limit, where one is set.
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

/// Collects tolerance violations and the largest deviation seen.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    /// Largest deviation over the tolerance checks, if any were made.
    worst: Option<f64>,
    count: usize,
}

impl Tally {
    fn near(&mut self, what: impl std::fmt::Display, got: f64, want: f64, tol: f64) {
        let d = (got - want).abs();
        self.count += 1;
        self.worst = Some(self.worst.map_or(d, |w| w.max(d)));
        if !(d <= tol) {
            self.failures
                .push(format!("{what}: got {got:.6}, want {want} (tol {tol:e})"));
        }
    }

    fn require(&mut self, what: impl std::fmt::Display, ok: bool) {
        self.count += 1;
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn finish(self, summary: String) -> Outcome {
        if self.failures.is_empty() {
            let worst = self
                .worst
                .map(|w| format!(", max deviation {w:.1e}"))
                .unwrap_or_default();
            Ok(format!("{summary}; {} checks{worst}", self.count))
        } else {
            Err(format!(
                "{} of {} checks failed: {}",
                self.failures.len(),
                self.count,
                self.failures.join("; ")
            ))
        }
    }
}

fn converged(f: FitResult, what: &str) -> Result<FitResult, String> {
    if f.converged {
        Ok(f)
    } else {
        Err(format!("{what} did not converge"))
    }
}

fn fit_ok(
    model: &dyn medscore::model::Model,
    method: Method,
    what: &str,
) -> Result<FitResult, String> {
    converged(
        fit(model, method, &FitOptions::default()).map_err(|e| format!("{what}: {e}"))?,
        what,
    )
}

fn normal_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut t = Tally::default();
    let opts = FitOptions::default();
    for k in 0..50 {
        let n = rng.random_range(4..40usize);
        let (mu, sd) = (rng.random_range(-3.0..3.0), rng.random_range(0.2..4.0));
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mu + sd * z
            })
            .collect();
        let nf = n as f64;
        let mean = y.iter().sum::<f64>() / nf;

        let known = NormalModel::known_mean(y.clone(), mu).map_err(|e| e.to_string())?;
        let f = fit_ok(&known, Method::MedianBr, "known-mean median-br")?;
        t.near(
            format!("dataset {k} known-mean"),
            f.estimates[0],
            known.sum_squares(mu) / (nf - 2.0 / 3.0),
            1e-8,
        );

        let free = NormalModel::unknown_mean(y).map_err(|e| e.to_string())?;
        let s = free.sum_squares(mean);
        let p = converged(
            profile_median_fit(&free, 1, &opts).map_err(|e| e.to_string())?,
            "profile",
        )?;
        t.near(
            format!("dataset {k} profile"),
            p.estimates[1],
            s / (nf - 1.0 - 2.0 / 3.0),
            1e-8,
        );
        let f = fit_ok(&free, Method::Firth, "firth")?;
        t.near(
            format!("dataset {k} firth"),
            f.estimates[1],
            s / (nf - 1.0),
            1e-8,
        );
    }
    t.finish("50 datasets, n in 4..40".into())
}

/// Estimate and standard error per coefficient.
type Row = [(f64, f64); 4];

const ENDO_LOGIT_FIRTH: Row = [
    (3.775, 1.489),
    (2.929, 1.551),
    (-0.035, 0.040),
    (-2.604, 0.776),
];
const ENDO_LOGIT_MBR: Row = [
    (3.969, 1.552),
    (3.869, 2.298),
    (-0.039, 0.042),
    (-2.708, 0.803),
];
const ENDO_PROBIT_FIRTH: Row = [
    (1.915, 0.789),
    (1.659, 0.747),
    (-0.015, 0.021),
    (-1.380, 0.403),
];
const ENDO_PROBIT_MBR: Row = [
    (1.984, 0.812),
    (1.971, 0.919),
    (-0.017, 0.022),
    (-1.425, 0.414),
];

fn compare_row(t: &mut Tally, what: &str, f: &FitResult, row: &Row, tol: &[f64; 4]) {
    for (r, &(est, se)) in row.iter().enumerate() {
        t.near(
            format!("{what} {} estimate", f.labels[r]),
            f.estimates[r],
            est,
            tol[r],
        );
        t.near(
            format!("{what} {} s.e.", f.labels[r]),
            f.std_errors[r],
            se,
            tol[r],
        );
    }
}

fn endometrial_tables() -> Outcome {
    let mut t = Tally::default();
    let tol = [THREE_DECIMALS; 4];
    for (link, firth, mbr) in [
        (BinaryLink::Logit, &ENDO_LOGIT_FIRTH, &ENDO_LOGIT_MBR),
        (BinaryLink::Probit, &ENDO_PROBIT_FIRTH, &ENDO_PROBIT_MBR),
    ] {
        let m = endometrial_model(link).map_err(|e| e.to_string())?;
        let name = format!("{link:?}").to_lowercase();
        compare_row(
            &mut t,
            &format!("{name} firth"),
            &fit_ok(&m, Method::Firth, "firth")?,
            firth,
            &tol,
        );
        compare_row(
            &mut t,
            &format!("{name} median-br"),
            &fit_ok(&m, Method::MedianBr, "median-br")?,
            mbr,
            &tol,
        );
    }
    let m = endometrial_model(BinaryLink::Logit).map_err(|e| e.to_string())?;
    let p = converged(
        profile_median_fit(&m, 1, &FitOptions::default()).map_err(|e| e.to_string())?,
        "profile",
    )?;
    t.near(
        "logit profile NV estimate",
        p.estimates[1],
        3.883,
        THREE_DECIMALS,
    );
    t.near(
        "logit profile NV s.e.",
        p.std_errors[1],
        2.407,
        THREE_DECIMALS,
    );
    t.finish("logit and probit, firth and median-br, plus the NV profile fit".into())
}

fn joint_profile_closeness() -> Outcome {
    let m = endometrial_model(BinaryLink::Logit).map_err(|e| e.to_string())?;
    let joint = fit_ok(&m, Method::MedianBr, "median-br")?.estimates[1];
    let profile = profile_median_fit(&m, 1, &FitOptions::default())
        .map_err(|e| e.to_string())?
        .estimates[1];
    let d = (joint - profile).abs();
    let msg = format!("joint {joint:.4}, profile {profile:.4}, gap {d:.4} (limit 0.02)");
    if d <= 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// `t`, exact conditional median unbiased, median-br, maximum likelihood.
const HIRJI: [(f64, f64, f64, f64); 13] = [
    (1.0, -4.489, -6.077, f64::NEG_INFINITY),
    (2.0, -3.885, -3.909, -4.537),
    (3.0, -2.876, -2.900, -3.239),
    (4.0, -2.141, -2.150, -2.361),
    (5.0, -1.517, -1.520, -1.654),
    (6.0, -0.953, -0.955, -1.032),
    (7.0, -0.421, -0.421, -0.453),
    (8.0, 0.104, 0.103, 0.114),
    (9.0, 0.641, 0.640, 0.695),
    (10.0, 1.220, 1.217, 1.325),
    (11.0, 1.899, 1.885, 2.068),
    (12.0, 2.851, 2.778, 3.103),
    (13.0, 3.430, 4.966, f64::INFINITY),
];

fn hirji_design() -> EnumerableDesign {
    // intercept, age at most 30, first treatment; 30 patients in four cells
    let cells = [
        ([1.0, 1.0, 1.0], 9),
        ([1.0, 1.0, 0.0], 11),
        ([1.0, 0.0, 1.0], 6),
        ([1.0, 0.0, 0.0], 4),
    ];
    EnumerableDesign {
        x: cells.iter().map(|(x, _)| x.to_vec()).collect(),
        trials: cells.iter().map(|&(_, m)| m).collect(),
        interest: 2,
    }
}

fn exact_oracle() -> Outcome {
    let opts = FitOptions::default();
    let mut t = Tally::default();
    let rows =
        oracle_sweep(&hirji_design(), Some(&[16.0, 12.0]), &opts).map_err(|e| e.to_string())?;
    t.require(
        format!("Hirji table has {} rows, want 13", rows.len()),
        rows.len() == HIRJI.len(),
    );
    for (row, &(tv, exact, mbr, mle)) in rows.iter().zip(&HIRJI) {
        t.require(
            format!("Hirji t = {} where {tv} expected", row.t),
            row.t == tv,
        );
        t.near(
            format!("Hirji t={tv} exact"),
            row.exact,
            exact,
            THREE_DECIMALS,
        );
        t.near(
            format!("Hirji t={tv} median-br"),
            row.mbr,
            mbr,
            THREE_DECIMALS,
        );
        if mle.is_finite() {
            t.near(format!("Hirji t={tv} mle"), row.mle, mle, THREE_DECIMALS);
        } else {
            t.require(
                format!("Hirji t={tv} mle {} not {mle}", row.mle),
                row.mle == mle,
            );
        }
    }

    let simple = EnumerableDesign::simple(vec![-0.560, -0.230, 0.071, 0.129, 1.559], 1);
    let sweep = oracle_sweep(&simple, None, &opts).map_err(|e| e.to_string())?;
    t.require(
        format!("m=1 sweep has {} points, want 32", sweep.len()),
        sweep.len() == 32,
    );
    for r in &sweep[1..sweep.len() - 1] {
        t.require(
            format!(
                "m=1 t={:.3}: |mbr-exact| {:.4} not below |mle-exact| {:.4}",
                r.t,
                r.mbr_deviation(),
                r.mle_deviation()
            ),
            r.mbr_deviation() < r.mle_deviation(),
        );
    }
    t.finish("Hirji conditional table and the m=1 sweep".into())
}

const FOOD: [[(f64, f64); 4]; 3] = [
    [
        (-0.623, 0.224),
        (-0.012, 0.003),
        (0.118, 0.035),
        (35.610, 8.080),
    ],
    [
        (-0.621, 0.239),
        (-0.012, 0.003),
        (0.118, 0.038),
        (30.922, 7.005),
    ],
    [
        (-0.621, 0.235),
        (-0.012, 0.003),
        (0.118, 0.037),
        (32.160, 7.289),
    ],
];

fn beta_regression() -> Outcome {
    let m = foodexp_model(BetaLink::Logit).map_err(|e| e.to_string())?;
    let mut t = Tally::default();
    let tol = [THREE_DECIMALS, THREE_DECIMALS, THREE_DECIMALS, 0.01];
    for (method, row) in [Method::Mle, Method::Firth, Method::MedianBr]
        .into_iter()
        .zip(&FOOD)
    {
        compare_row(
            &mut t,
            method.name(),
            &fit_ok(&m, method, method.name())?,
            row,
            &tol,
        );
    }
    t.finish("mle, firth and median-br".into())
}

fn study(name: &str, replications: usize, keep: &[Method]) -> Result<SimulationSummary, String> {
    let mut cfg: SimulationConfig = builtin(name).map_err(|e| e.to_string())?;
    cfg.replications = replications;
    cfg.seed = SEED;
    cfg.score_intervals = false;
    cfg.methods.retain(|m| keep.contains(m));
    let s = run_simulation(&cfg).map_err(|e| format!("{name}: {e}"))?;
    for tot in &s.methods {
        if tot.failures > 0 {
            return Err(format!(
                "{name}: {} {} fits failed",
                tot.failures,
                tot.method.name()
            ));
        }
    }
    Ok(s)
}

fn within(t: &mut Tally, what: &str, v: f64, lo: f64, hi: f64) {
    t.require(
        format!("{what} = {v:.2} outside [{lo}, {hi}]"),
        (lo..=hi).contains(&v),
    );
}

fn metric(
    s: &SimulationSummary,
    method: Method,
    component: usize,
) -> Result<&medscore::sim::Metrics, String> {
    s.row(method, component)
        .map(|r| &r.metrics)
        .ok_or_else(|| format!("no {} row for component {component}", method.name()))
}

fn simulation_bands() -> Outcome {
    use Method::*;
    let mut t = Tally::default();
    let mut notes = Vec::new();

    let s = study("endometrial-beta2", 2000, &[Mle, Firth, MedianBrProfile])?;
    let (pu, firth) = (metric(&s, MedianBrProfile, 1)?.pu, metric(&s, Firth, 1)?.pu);
    let sep = s.totals(Mle).map(|x| x.infinite_pct).unwrap_or(f64::NAN);
    within(&mut t, "endometrial PU profile", pu, 47.2, 52.2);
    within(&mut t, "endometrial PU firth", firth, 50.6, 55.6);
    within(&mut t, "endometrial separation %", sep, 5.3, 8.3);
    notes.push(format!(
        "endometrial PU {pu:.2}/{firth:.2}, separation {sep:.2}%"
    ));

    let s = study("gamma-strata", 2000, &[Mle, MedianBrProfile])?;
    let (pu, mle) = (metric(&s, MedianBrProfile, 0)?.pu, metric(&s, Mle, 0)?);
    within(&mut t, "gamma PU profile", pu, 45.9, 50.9);
    t.require(
        format!("gamma PU mle {:.2} not below 5", mle.pu),
        mle.pu < 5.0,
    );
    t.require(
        format!("gamma Wald mle {:.2} not below 50", mle.wald),
        mle.wald < 50.0,
    );
    notes.push(format!(
        "gamma PU {pu:.2}, mle PU {:.2} Wald {:.2}",
        mle.pu, mle.wald
    ));

    let s = study("skew-normal", 1000, &[Mle, MedianBr])?;
    let (pu, fin) = (metric(&s, MedianBr, 0)?.pu, metric(&s, Mle, 0)?.finite_pct);
    within(&mut t, "skew-normal PU median-br", pu, 46.3, 54.3);
    within(&mut t, "skew-normal % finite mle", fin, 94.0, 98.0);
    notes.push(format!("skew-normal PU {pu:.2}, finite {fin:.1}%"));

    t.finish(notes.join("; "))
}

fn property_suites() -> Outcome {
    let checks: [(&str, fn() -> common::Check); 11] = [
        ("gradient", common::gradient_matches_score),
        ("tensor symmetry", common::tensor_symmetries),
        ("partial information", common::kappa2_is_partial_information),
        (
            "binary enumeration",
            common::binary_cumulants_match_enumeration,
        ),
        (
            "gamma partial information",
            common::gamma_kappa2_closed_form,
        ),
        ("penalty", common::penalty_equivalence),
        ("logit adjustment", common::logit_zero_adjustment),
        ("equivariance", common::equivariance),
        ("insensitivity", common::insensitivity_is_diagonal),
        ("irls", common::irls_matches_scoring),
        ("determinism", common::simulation_determinism),
    ];
    let mut t = Tally::default();
    for (name, check) in checks {
        if let Err(e) = check() {
            t.require(format!("{name}: {e}"), false);
        } else {
            t.require("", true);
        }
    }

    let median = [Method::MedianBr, Method::MedianBrProfile];
    let mut rows = 0;
    for name in builtin_names() {
        let s = study(name, 2000, &median)?;
        for r in &s.rows {
            rows += 1;
            let m = &r.metrics;
            let band = 3.0 * m.pu_se;
            t.require(
                format!(
                    "{name} {} {}: PU {:.2} outside 50 +/- {band:.2}",
                    r.method.name(),
                    r.parameter,
                    m.pu
                ),
                (m.pu - 50.0).abs() <= band,
            );
        }
    }
    t.finish(format!(
        "11 property checks, median centering on {rows} rows over {} studies",
        builtin_names().len()
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            title: "normal closed forms",
            budget: Some(Duration::from_secs(1)),
            run: normal_closed_forms,
        },
        Criterion {
            id: 2,
            title: "endometrial estimates",
            budget: Some(Duration::from_secs(1)),
            run: endometrial_tables,
        },
        Criterion {
            id: 3,
            title: "joint vs profile",
            budget: None,
            run: joint_profile_closeness,
        },
        Criterion {
            id: 4,
            title: "exact oracle tables",
            budget: Some(Duration::from_secs(30)),
            run: exact_oracle,
        },
        Criterion {
            id: 5,
            title: "beta regression",
            budget: Some(Duration::from_secs(1)),
            run: beta_regression,
        },
        Criterion {
            id: 6,
            title: "simulation bands",
            budget: Some(Duration::from_secs(20 * 60)),
            run: simulation_bands,
        },
        Criterion {
            id: 7,
            title: "property suites",
            budget: None,
            run: property_suites,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if c.budget.is_some_and(|b| took > b) => {
                Err(format!("{msg}; over the {:?} budget", c.budget.unwrap()))
            }
            o => o,
        };
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!(
            "{tag} criterion {} {} ({:.2}s): {msg}",
            c.id,
            c.title,
            took.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
