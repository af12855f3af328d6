//! `medscore` command-line front end: fit, simulate and oracle subcommands.
//!
//! Exit status: 0 on success, 1 on input errors, 2 when a fit or a numerical
//! routine fails to converge.

mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use medscore::datasets::Table;
use medscore::exact::{oracle_at, oracle_sweep, EnumerableDesign, OracleRow};
use medscore::model::Model;
use medscore::models::{
    BetaLink, BetaRegDesign, BetaRegModel, BinaryDesign, BinaryLink, BinaryModel, GammaStrataModel,
    MatchedTablesDesign, MatchedTablesModel, NormalModel, SkewNormalModel,
};
use medscore::numerics::QuadratureSettings;
use medscore::sim::{builtin, builtin_names, run_simulation, SimulationConfig};
use medscore::solve::{
    fit, profile_median_fit, score_interval_from, wald_interval, FitOptions, FitResult, Method,
    ScoreStatistic,
};

use report::{fit_report, num, simulation_report};

#[derive(Parser)]
#[command(name = "medscore", version, about = "Median bias-reduced estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV data set and print a JSON report.
    Fit(FitArgs),
    /// Run a simulation study and print its summary.
    Simulate(SimulateArgs),
    /// Compare exact, maximum likelihood and median bias-reduced estimates
    /// for a small logistic design.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Binary,
    Beta,
    GammaStrata,
    Normal,
    SkewNormal,
    MatchedTables,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// logit or probit for binary data; logit, log or cloglog for beta data.
    #[arg(long, default_value = "logit")]
    link: String,
    /// mle, firth, mbr or mbr-profile.
    #[arg(long, default_value = "mbr")]
    method: String,
    /// CSV file with a header row, or a bundled data set (`@endometrial`, `@foodexp`).
    #[arg(long)]
    data: String,
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long)]
    intercept: bool,
    /// Column of binomial trials (binary model; Bernoulli responses when absent).
    #[arg(long)]
    trials: Option<String>,
    /// Stratum label column (gamma-strata).
    #[arg(long)]
    strata: Option<String>,
    /// Known mean (normal model); the mean is estimated when absent.
    #[arg(long)]
    known_mean: Option<f64>,
    /// Case outcome column, 0 or 1 (matched-tables).
    #[arg(long)]
    cases: Option<String>,
    /// Column counting exposed controls (matched-tables).
    #[arg(long)]
    controls: Option<String>,
    /// Controls per table (matched-tables).
    #[arg(long)]
    controls_per_table: Option<u32>,
    /// Component for mbr-profile, by label or 0-based index; stratified models
    /// default to the common parameter, the others profile every component.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Skip score-type intervals.
    #[arg(long)]
    no_score: bool,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation config.
    #[arg(long, conflicts_with = "builtin", required_unless_present_any = ["builtin", "list"])]
    config: Option<PathBuf>,
    /// Name of a built-in study.
    #[arg(long)]
    builtin: Option<String>,
    /// List the built-in studies.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    replications: Option<usize>,
    /// Overrides the config seed; the default seed is 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Also write the CSV table to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// CSV design: covariate columns and a trials column.
    #[arg(long, conflicts_with = "x")]
    design: Option<String>,
    /// Covariate columns of the design file, in parameter order.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Trials column of the design file.
    #[arg(long, default_value = "m")]
    trials: String,
    /// Covariate whose coefficient is estimated.
    #[arg(long)]
    interest: Option<String>,
    /// Single-covariate design without intercept: comma-separated covariate values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Trials per row for `--x`.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Observed value of the interest sufficient statistic.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "sweep")]
    t: Option<f64>,
    /// Conditioning statistics for the remaining columns, in column order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    s: Vec<f64>,
    /// Every support value of t instead of a single one.
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<medscore::Error> for Failure {
    fn from(e: medscore::Error) -> Self {
        match e {
            medscore::Error::InvalidInput(_)
            | medscore::Error::Data { .. }
            | medscore::Error::Domain { .. }
            | medscore::Error::SupportOverflow { .. }
            | medscore::Error::EmptySupport => Failure::Input(e.into()),
            _ => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<medscore::Error>() {
            Ok(core) => core.into(),
            Err(e) => Failure::Input(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print_json(v: &Value) {
    let mut text = serde_json::to_string_pretty(v).expect("json values always serialise");
    text.push('\n');
    emit(&text);
}

fn require<'a>(v: &'a Option<String>, flag: &str, model: &str) -> Result<&'a str, Failure> {
    v.as_deref()
        .ok_or_else(|| Failure::Input(anyhow!("--{flag} is required for the {model} model")))
}

fn cmd_fit(a: &FitArgs) -> Result<ExitCode, Failure> {
    let method: Method = a.method.parse()?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Failure::Input(anyhow!(
            "--level must lie strictly between 0 and 1"
        )));
    }
    let table = Table::load(&a.data)?;
    let (model, stratified) = build_model(a, &table)?;
    let opts = FitOptions {
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        ..FitOptions::default()
    };
    opts.validate()?;
    let labels = model.labels();
    let profile = match &a.profile {
        Some(p) => Some(component_index(p, &labels)?),
        None if stratified => Some(0),
        None => None,
    };
    if a.profile.is_some() && method != Method::MedianBrProfile {
        return Err(Failure::Input(anyhow!(
            "--profile applies to --method mbr-profile only"
        )));
    }

    let result: FitResult = match (method, profile) {
        (Method::MedianBrProfile, Some(r)) => profile_median_fit(model.as_ref(), r, &opts)?,
        _ => fit(model.as_ref(), method, &opts)?,
    };

    let mut warnings = Vec::new();
    for (r, label) in labels.iter().enumerate() {
        if !result.finite[r] {
            warnings.push(format!("estimate of {label} is infinite"));
        }
    }
    let shown: Vec<usize> = match (method, profile) {
        (Method::MedianBrProfile, Some(r)) => vec![r],
        _ if stratified => vec![0],
        _ => (0..labels.len()).collect(),
    };
    let mut wald = BTreeMap::new();
    for &r in &shown {
        wald.insert(r, wald_interval(&result, r, a.level)?);
    }
    let stat = match method {
        Method::Mle => Some(ScoreStatistic::Mle),
        Method::Firth => None,
        Method::MedianBr | Method::MedianBrProfile => Some(ScoreStatistic::Median),
    };
    let mut score = BTreeMap::new();
    if let Some(stat) = stat.filter(|_| !a.no_score && result.converged) {
        for &r in &shown {
            if !result.finite[r] {
                continue;
            }
            match score_interval_from(model.as_ref(), r, a.level, &opts, stat, &result.estimates) {
                Ok(ci) => {
                    if ci.open_lower || ci.open_upper {
                        warnings.push(format!("score interval for {} is unbounded", labels[r]));
                    }
                    score.insert(r, ci);
                }
                Err(e) => warnings.push(format!("score interval for {}: {e}", labels[r])),
            }
        }
    }
    if !result.converged {
        warnings.push(format!(
            "fit did not converge in {} iterations",
            result.iterations
        ));
    }
    print_json(&fit_report(&result, &shown, &wald, &score, &warnings));
    Ok(if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn component_index(spec: &str, labels: &[String]) -> Result<usize, Failure> {
    if let Some(i) = labels.iter().position(|l| l == spec) {
        return Ok(i);
    }
    match spec.parse::<usize>() {
        Ok(i) if i < labels.len() => Ok(i),
        _ => Err(Failure::Input(anyhow!(
            "unknown component `{spec}` (parameters: {})",
            labels.join(", ")
        ))),
    }
}

fn build_model(a: &FitArgs, table: &Table) -> Result<(Box<dyn Model>, bool), Failure> {
    let name = |k: ModelKind| match k {
        ModelKind::Binary => "binary",
        ModelKind::Beta => "beta",
        ModelKind::GammaStrata => "gamma-strata",
        ModelKind::Normal => "normal",
        ModelKind::SkewNormal => "skew-normal",
        ModelKind::MatchedTables => "matched-tables",
    };
    let kind = name(a.model);
    Ok(match a.model {
        ModelKind::Binary => {
            let link: BinaryLink = a.link.parse()?;
            let y = table
                .column(require(&a.response, "response", kind)?)?
                .to_vec();
            let (x, labels) = table.design(&a.covariates, a.intercept)?;
            let trials = match &a.trials {
                Some(c) => table.column(c)?.to_vec(),
                None => vec![1.0; y.len()],
            };
            let m = BinaryModel::new(BinaryDesign {
                x,
                successes: y,
                trials,
                link,
                labels,
            })?;
            (Box::new(m), false)
        }
        ModelKind::Beta => {
            let link: BetaLink = a.link.parse()?;
            let y = table
                .column(require(&a.response, "response", kind)?)?
                .to_vec();
            let (x, labels) = table.design(&a.covariates, a.intercept)?;
            let m = BetaRegModel::new(BetaRegDesign { y, x, link, labels })?;
            (Box::new(m), false)
        }
        ModelKind::Normal => {
            let y = table
                .column(require(&a.response, "response", kind)?)?
                .to_vec();
            (Box::new(NormalModel::new(y, a.known_mean)?), false)
        }
        ModelKind::SkewNormal => {
            let y = table
                .column(require(&a.response, "response", kind)?)?
                .to_vec();
            (
                Box::new(SkewNormalModel::new(y, QuadratureSettings::default())?),
                false,
            )
        }
        ModelKind::GammaStrata => {
            let y = table.column(require(&a.response, "response", kind)?)?;
            let labels = table.column(require(&a.strata, "strata", kind)?)?;
            // strata in order of first appearance
            let mut order: Vec<f64> = Vec::new();
            let mut groups: Vec<Vec<f64>> = Vec::new();
            for (&v, &s) in y.iter().zip(labels) {
                match order.iter().position(|&o| o == s) {
                    Some(g) => groups[g].push(v),
                    None => {
                        order.push(s);
                        groups.push(vec![v]);
                    }
                }
            }
            (Box::new(GammaStrataModel::new(groups)?), true)
        }
        ModelKind::MatchedTables => {
            let cases = table.column(require(&a.cases, "cases", kind)?)?.to_vec();
            let controls = table
                .column(require(&a.controls, "controls", kind)?)?
                .to_vec();
            let m = a.controls_per_table.ok_or_else(|| {
                Failure::Input(anyhow!(
                    "--controls-per-table is required for the {kind} model"
                ))
            })?;
            let model = MatchedTablesModel::new(MatchedTablesDesign { cases, controls, m })?;
            (Box::new(model), true)
        }
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<ExitCode, Failure> {
    if a.list {
        emit(
            &builtin_names()
                .iter()
                .map(|n| format!("{n}\n"))
                .collect::<String>(),
        );
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg: SimulationConfig = match (&a.config, &a.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(Failure::Input)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid simulation config {}", path.display()))
                .map_err(Failure::Input)?
        }
        (None, Some(name)) => builtin(name)?,
        (None, None) => unreachable!("clap requires --config or --builtin"),
    };
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let summary = run_simulation(&cfg)?;
    let csv = summary.to_csv();
    if let Some(path) = &a.csv {
        std::fs::write(path, &csv)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Input)?;
    }
    match a.format {
        Format::Json => print_json(&simulation_report(&summary)),
        Format::Csv => emit(&csv),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: &OracleArgs) -> Result<ExitCode, Failure> {
    let design = match &a.design {
        Some(path) => {
            let table = Table::load(path)?;
            if a.covariates.is_empty() {
                bail_input("--covariates is required with --design")?;
            }
            let (x, labels) = table.design(&a.covariates, false)?;
            let interest = match &a.interest {
                Some(c) => component_index(c, &labels)?,
                None => {
                    return Err(Failure::Input(anyhow!(
                        "--interest is required with --design"
                    )))
                }
            };
            let trials = table
                .column(&a.trials)?
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Ok(v as u32)
                    } else {
                        Err(Failure::Input(anyhow!(
                            "row {}: trials must be a nonnegative integer",
                            i + 1
                        )))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            EnumerableDesign {
                x,
                trials,
                interest,
            }
        }
        None if !a.x.is_empty() => EnumerableDesign::simple(a.x.clone(), a.m),
        None => return Err(Failure::Input(anyhow!("give either --design or --x"))),
    };
    let s = if a.s.is_empty() {
        None
    } else {
        Some(a.s.as_slice())
    };
    if s.is_none() && design.x[0].len() > 1 {
        bail_input("designs with several columns need conditioning statistics --s")?;
    }
    let opts = FitOptions::default();
    let rows: Vec<OracleRow> = if a.sweep {
        oracle_sweep(&design, s, &opts)?
    } else {
        vec![oracle_at(
            &design,
            a.t.expect("clap requires --t without --sweep"),
            s,
            &opts,
        )?]
    };
    match a.format {
        Format::Json => {
            let body: Vec<Value> = rows.iter().map(oracle_json).collect();
            if a.sweep {
                print_json(&json!({ "rows": body }));
            } else {
                print_json(&body[0]);
            }
        }
        Format::Csv => {
            let mut text = String::from("t,exact,mle,mbr,mle_deviation,mbr_deviation\n");
            for r in &rows {
                text += &format!(
                    "{},{},{},{},{},{}\n",
                    r.t,
                    r.exact,
                    r.mle,
                    r.mbr,
                    r.mle_deviation(),
                    r.mbr_deviation()
                );
            }
            emit(&text);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bail_input(msg: &str) -> Result<(), Failure> {
    Err(Failure::Input(anyhow!("{msg}")))
}

fn oracle_json(r: &OracleRow) -> Value {
    json!({
        "t": num(r.t),
        "exact": num(r.exact),
        "mle": num(r.mle),
        "mbr": num(r.mbr),
        "mle_deviation": num(r.mle_deviation()),
        "mbr_deviation": num(r.mbr_deviation()),
    })
}
