use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solve::{ConfidenceInterval, Method};

/// Replicate values of one estimator for one component.
#[derive(Debug, Clone, Default)]
pub struct ComponentSample {
    pub estimates: Vec<f64>,
    /// Replicates entering B, RMSE and coverage (all, unless conditioned on finiteness).
    pub finite: Vec<bool>,
    pub wald: Vec<ConfidenceInterval>,
    /// `None` per replicate when the interval could not be computed;
    /// an empty vector when the method has no score interval.
    pub score: Vec<Option<ConfidenceInterval>>,
}

/// Metrics for one estimator of one component, as percentages where relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percentage of estimates `<=` truth
    pub pu: f64,
    pub pu_se: f64,
    /// Median absolute error
    pub mae: f64,
    /// Mean error over the finite replicates
    pub bias: f64,
    pub rmse: f64,
    pub wald: f64,
    pub wald_se: f64,
    pub score: Option<f64>,
    pub score_se: Option<f64>,
    /// Replicates whose score interval failed
    pub score_failures: usize,
    pub finite_pct: f64,
    pub n: usize,
    pub n_finite: usize,
}

fn pct_with_se(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / n as f64;
    (100.0 * p, 100.0 * (p * (1.0 - p) / n as f64).sqrt())
}

/// Sample median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of no values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[k]
    } else if v[k - 1] == v[k] {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    })
}

/// PU and MAE over every replicate; bias, RMSE and coverages over those
/// flagged finite.
pub fn summarize(sample: &ComponentSample, truth: f64) -> Result<Metrics> {
    let n = sample.estimates.len();
    if n == 0 {
        return Err(Error::invalid("summarize needs at least one replicate"));
    }
    if sample.finite.len() != n
        || sample.wald.len() != n
        || !(sample.score.is_empty() || sample.score.len() == n)
    {
        return Err(Error::invalid("summarize inputs differ in length"));
    }
    let under = sample.estimates.iter().filter(|&&e| e <= truth).count();
    let (pu, pu_se) = pct_with_se(under, n);
    let abs: Vec<f64> = sample.estimates.iter().map(|e| (e - truth).abs()).collect();
    let mae = median(&abs)?;

    let idx: Vec<usize> = (0..n).filter(|&i| sample.finite[i]).collect();
    let nf = idx.len();
    let (bias, rmse) = if nf == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let e: Vec<f64> = idx.iter().map(|&i| sample.estimates[i] - truth).collect();
        let b = e.iter().sum::<f64>() / nf as f64;
        let ms = e.iter().map(|v| v * v).sum::<f64>() / nf as f64;
        (b, ms.sqrt())
    };
    let covered = idx
        .iter()
        .filter(|&&i| sample.wald[i].contains(truth))
        .count();
    let (wald, wald_se) = pct_with_se(covered, nf);
    let (score, score_se, score_failures) = if sample.score.is_empty() {
        (None, None, 0)
    } else {
        let done: Vec<&ConfidenceInterval> = idx
            .iter()
            .filter_map(|&i| sample.score[i].as_ref())
            .collect();
        let hits = done.iter().filter(|ci| ci.contains(truth)).count();
        let (s, se) = pct_with_se(hits, done.len());
        (Some(s), Some(se), nf - done.len())
    };
    Ok(Metrics {
        pu,
        pu_se,
        mae,
        bias,
        rmse,
        wald,
        wald_se,
        score,
        score_se,
        score_failures,
        finite_pct: 100.0 * nf as f64 / n as f64,
        n,
        n_finite: nf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub component: usize,
    pub parameter: String,
    pub truth: f64,
    /// Bias, RMSE and coverage restricted to replicates with finite estimates.
    pub conditional: bool,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTotals {
    pub method: Method,
    /// Replicates where the fit failed or did not converge; left out of every metric.
    pub failures: usize,
    /// Percentage of fitted replicates with an infinite summarised component.
    pub infinite_pct: f64,
    /// First few failure messages.
    pub failure_messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub replications: usize,
    pub level: f64,
    pub rows: Vec<SummaryRow>,
    pub methods: Vec<MethodTotals>,
}

impl SimulationSummary {
    pub fn row(&self, method: Method, component: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.component == component)
    }

    pub fn totals(&self, method: Method) -> Option<&MethodTotals> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Comma-separated table, columns padded to a common width, in the order
    /// PU, MAE, B, RMSE, Wald, Score followed by the finite percentage.
    pub fn to_csv(&self) -> String {
        let mut cells: Vec<Vec<String>> = vec![[
            "method",
            "parameter",
            "PU",
            "MAE",
            "B",
            "RMSE",
            "Wald",
            "Score",
            "%finite",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()];
        let f = |v: f64| {
            if v.is_nan() {
                "--".to_string()
            } else {
                format!("{v:.3}")
            }
        };
        for r in &self.rows {
            let m = &r.metrics;
            cells.push(vec![
                r.method.to_string(),
                r.parameter.clone(),
                f(m.pu),
                f(m.mae),
                f(m.bias),
                f(m.rmse),
                f(m.wald),
                m.score.map_or("--".to_string(), f),
                f(m.finite_pct),
            ]);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, &w))| {
                    if c < 2 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            out.push_str(line.join(",").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::IntervalKind;

    fn interval(lower: f64, upper: f64) -> ConfidenceInterval {
        ConfidenceInterval {
            component: 0,
            level: 0.95,
            lower,
            upper,
            kind: IntervalKind::Wald,
            open_lower: false,
            open_upper: false,
        }
    }

    #[test]
    fn footnote_definitions() {
        let s = ComponentSample {
            estimates: vec![1.0, 2.0, 3.0],
            finite: vec![true; 3],
            wald: vec![interval(f64::NEG_INFINITY, f64::INFINITY); 3],
            score: vec![],
        };
        let m = summarize(&s, 2.0).unwrap();
        assert!((m.pu - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.bias, 0.0);
        assert_eq!(m.wald, 100.0);
        assert!(m.score.is_none());
        // errors (-1, 0, 4)
        let s = ComponentSample {
            estimates: vec![1.0, 2.0, 6.0],
            ..s
        };
        assert_eq!(summarize(&s, 2.0).unwrap().mae, 1.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(summarize(&ComponentSample::default(), 0.0).is_err());
    }

    #[test]
    fn conditional_rows_skip_infinite_replicates() {
        let s = ComponentSample {
            estimates: vec![f64::INFINITY, 1.0, 3.0],
            finite: vec![false, true, true],
            wald: vec![interval(0.0, 5.0), interval(0.5, 1.5), interval(2.5, 3.5)],
            score: vec![None, Some(interval(0.0, 4.0)), None],
        };
        let m = summarize(&s, 1.0).unwrap();
        assert!((m.pu - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.mae, 2.0);
        assert_eq!(m.bias, 1.0);
        assert_eq!(m.wald, 50.0);
        assert_eq!(m.score, Some(100.0));
        assert_eq!(m.score_failures, 1);
        assert!((m.finite_pct - 200.0 / 3.0).abs() < 1e-12);
    }
}
