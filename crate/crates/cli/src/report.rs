//! JSON reports. Numbers use the shortest representation that parses back to
//! the same double; non-finite values are written as the strings
//! `"Infinity"`, `"-Infinity"` and `"NaN"`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use medscore::sim::SimulationSummary;
use medscore::solve::{ConfidenceInterval, FitResult};

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("NaN")
    } else if v > 0.0 {
        json!("Infinity")
    } else {
        json!("-Infinity")
    }
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn named<T>(
    labels: &[String],
    idx: impl IntoIterator<Item = usize>,
    f: impl Fn(usize) -> T,
) -> Value
where
    T: Into<Value>,
{
    let mut m = Map::new();
    for r in idx {
        m.insert(labels[r].clone(), f(r).into());
    }
    Value::Object(m)
}

fn interval(ci: &ConfidenceInterval) -> Value {
    json!({
        "lower": num(ci.lower),
        "upper": num(ci.upper),
        "level": num(ci.level),
        "open_lower": ci.open_lower,
        "open_upper": ci.open_upper,
    })
}

pub fn fit_report(
    f: &FitResult,
    shown: &[usize],
    wald: &BTreeMap<usize, ConfidenceInterval>,
    score: &BTreeMap<usize, ConfidenceInterval>,
    warnings: &[String],
) -> Value {
    let p = f.labels.len();
    let est = f.reported_estimates();
    let vcov: Vec<Value> = (0..p)
        .map(|i| Value::Array((0..p).map(|j| num(f.vcov[(i, j)])).collect()))
        .collect();
    json!({
        "method": f.method.name(),
        "parameters": f.labels,
        "profile_component": f.profile_component.map(|r| f.labels[r].clone()),
        "estimates": named(&f.labels, 0..p, |r| num(est[r])),
        "std_errors": named(&f.labels, 0..p, |r| num(f.std_errors[r])),
        "vcov": vcov,
        "wald_intervals": named(&f.labels, wald.keys().copied(), |r| interval(&wald[&r])),
        "score_intervals": named(&f.labels, shown.iter().copied().filter(|r| score.contains_key(r)), |r| interval(&score[&r])),
        "iterations": f.iterations,
        "converged": f.converged,
        "finite": named(&f.labels, 0..p, |r| f.finite[r]),
        "log_likelihood": num(f.log_likelihood),
        "warnings": warnings,
    })
}

pub fn simulation_report(s: &SimulationSummary) -> Value {
    let rows: Vec<Value> = s
        .rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            json!({
                "method": r.method.name(),
                "component": r.component,
                "parameter": r.parameter,
                "truth": num(r.truth),
                "conditional_on_finite": r.conditional,
                "PU": num(m.pu),
                "PU_se": num(m.pu_se),
                "MAE": num(m.mae),
                "B": num(m.bias),
                "RMSE": num(m.rmse),
                "Wald": num(m.wald),
                "Wald_se": num(m.wald_se),
                "Score": opt(m.score),
                "Score_se": opt(m.score_se),
                "score_failures": m.score_failures,
                "finite_pct": num(m.finite_pct),
                "n": m.n,
                "n_finite": m.n_finite,
            })
        })
        .collect();
    let methods: Vec<Value> = s
        .methods
        .iter()
        .map(|t| {
            json!({
                "method": t.method.name(),
                "failures": t.failures,
                "infinite_pct": num(t.infinite_pct),
                "failure_messages": t.failure_messages,
            })
        })
        .collect();
    json!({
        "seed": s.seed,
        "replications": s.replications,
        "level": num(s.level),
        "rows": rows,
        "methods": methods,
    })
}
