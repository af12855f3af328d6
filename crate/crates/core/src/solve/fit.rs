use nalgebra::{DMatrix, DVector};

use super::{FitOptions, FitResult, Method, TraceEntry};
use crate::adjust::{firth_adjustment, median_adjustment};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::SpdFactor;

/// Number of consecutive likelihood increases required to declare divergence.
const DIVERGENCE_WINDOW: usize = 5;
/// Relative drift over the window that marks a component as infinite.
const DRIFT_FRACTION: f64 = 0.1;
/// Largest scoring step accepted at a maximum likelihood solution. The scaled
/// score alone vanishes along a direction of separation.
const MLE_STEP_TOL: f64 = 1e-6;
/// Movement over the window below which a flat likelihood means convergence
/// rather than drift to infinity.
const FLAT_MIN_DRIFT: f64 = 1e-2;
/// An accepted step that leaves more than this fraction of the scaled score
/// is compared with the half step. Scoring overshoots when the expected
/// information falls well short of the observed information.
const WEAK_PROGRESS: f64 = 0.5;
/// Cosine above which consecutive steps count as one direction.
const COLLINEAR: f64 = 0.99;
/// Step ratios extrapolated; near 1 the tail estimate is unreliable and
/// below the lower end the iteration needs no help.
const MIN_RATIO: f64 = 0.1;
const MAX_RATIO: f64 = 0.99;
/// Relative rounding allowance when comparing log-likelihood values.
const LL_SLACK: f64 = 1e-12;

fn not_below(new: f64, old: f64) -> bool {
    new >= old - LL_SLACK * old.abs().max(1.0)
}

/// Adjusted score, information and the modified scoring step at one point.
#[derive(Debug, Clone)]
pub struct AdjustedScore {
    pub score: DVector<f64>,
    pub info: DMatrix<f64>,
    /// `U` (mle), `U + A` (firth) or `U + i M1` (median-br)
    pub adjusted: DVector<f64>,
    /// `i^{-1} U` plus `i^{-1} A` (firth) or `M1` (median-br)
    pub step: DVector<f64>,
    /// `max_r |adjusted_r| / sqrt(i_rr)`
    pub norm: f64,
}

/// Adjusted score for `method` at `theta`. The profile method uses the joint
/// median adjustment here.
pub fn adjusted_score(model: &dyn Model, method: Method, theta: &[f64]) -> Result<AdjustedScore> {
    model.check_domain(theta)?;
    let (score, info, adjusted, extra) = match method {
        Method::Mle => {
            let (u, i) = model.score_info(theta)?;
            (u.clone(), i, u, None)
        }
        Method::Firth => {
            let b = model.cumulants(theta)?;
            let a = firth_adjustment(&b)?;
            let adj = &b.score + &a;
            (b.score, b.info, adj, None)
        }
        Method::MedianBr | Method::MedianBrProfile => {
            let b = model.cumulants(theta)?;
            let m = median_adjustment(&b)?;
            let adj = &b.score + &b.info * &m.m1;
            (b.score, b.info, adj, Some(m.m1))
        }
    };
    let factor = SpdFactor::new(&info)?;
    let step = match extra {
        Some(m1) => factor.solve(&score) + m1,
        None => factor.solve(&adjusted),
    };
    let norm = scaled_norm(&adjusted, &info, None);
    Ok(AdjustedScore {
        score,
        info,
        adjusted,
        step,
        norm,
    })
}

fn scaled_norm(v: &DVector<f64>, info: &DMatrix<f64>, active: Option<&[bool]>) -> f64 {
    let mut n: f64 = 0.0;
    for r in 0..v.len() {
        if active.map_or(true, |a| a[r]) {
            let s = v[r].abs() / info[(r, r)].sqrt();
            n = n.max(if s.is_nan() { f64::INFINITY } else { s });
        }
    }
    n
}

/// `A i` where row `r` of `A` holds the weights of the efficient score for
/// component `r`; diagonal by construction when the information is invertible.
pub fn insensitivity_matrix(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = SpdFactor::new(info)?.inverse();
    let p = info.nrows();
    let a = DMatrix::from_fn(p, p, |r, s| g[(r, s)] / g[(r, r)]);
    Ok(a * info)
}

/// Fits `model` by the method's scoring iteration.
///
/// For `MedianBrProfile` every component is fitted by its own profile fit
/// and the reported point combines the componentwise estimates.
pub fn fit(model: &dyn Model, method: Method, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    if method == Method::MedianBrProfile {
        return profile_all(model, opts);
    }
    if method == Method::Mle {
        if let Some(signs) = model.mle_at_infinity() {
            return Ok(infinite_mle(model, signs));
        }
    }
    let start = starting_point(model, method, opts)?;
    if method == Method::Mle {
        mle_scoring(model, start, opts)
    } else {
        adjusted_scoring(model, method, start, opts)
    }
}

fn profile_all(model: &dyn Model, opts: &FitOptions) -> Result<FitResult> {
    let p = model.dim();
    let joint = fit(model, Method::MedianBr, opts)?;
    let mut est = joint.estimates.clone();
    let mut converged = joint.converged;
    let mut finite = joint.finite.clone();
    let mut trace = Vec::new();
    for r in 0..p {
        let pr = super::profile_median_fit(model, r, opts)?;
        est[r] = pr.estimates[r];
        converged &= pr.converged;
        finite[r] = pr.finite[r];
        trace.extend(pr.trace);
    }
    let (std_errors, vcov) = variance(model, &est, &finite)?;
    Ok(FitResult {
        method: Method::MedianBrProfile,
        labels: model.labels(),
        log_likelihood: model.log_likelihood(&est).unwrap_or(f64::NAN),
        estimates: est,
        std_errors,
        vcov,
        iterations: trace.len(),
        converged,
        finite,
        trace,
        profile_component: None,
    })
}

fn infinite_mle(model: &dyn Model, signs: Vec<f64>) -> FitResult {
    let p = model.dim();
    let mut vcov = DMatrix::zeros(p, p);
    vcov.fill_diagonal(f64::INFINITY);
    FitResult {
        method: Method::Mle,
        labels: model.labels(),
        estimates: signs,
        std_errors: vec![f64::INFINITY; p],
        vcov,
        iterations: 0,
        converged: true,
        finite: vec![false; p],
        trace: Vec::new(),
        log_likelihood: f64::NAN,
        profile_component: None,
    }
}

/// Explicit start, else a finite converged maximum likelihood fit for the
/// adjusted methods, else the model default.
fn starting_point(model: &dyn Model, method: Method, opts: &FitOptions) -> Result<Vec<f64>> {
    if let Some(s) = &opts.start {
        if s.len() != model.dim() {
            return Err(Error::invalid(format!(
                "start has {} components, model has {}",
                s.len(),
                model.dim()
            )));
        }
        model.check_domain(s)?;
        return Ok(s.clone());
    }
    if method != Method::Mle {
        if let Ok(m) = fit(model, Method::Mle, opts) {
            if m.converged && m.all_finite() && model.check_domain(&m.estimates).is_ok() {
                return Ok(m.estimates);
            }
        }
    }
    let s = model.default_start();
    model.check_domain(&s)?;
    Ok(s)
}

/// Standard errors and variance matrix on the finite components.
pub(crate) fn variance(
    model: &dyn Model,
    theta: &[f64],
    finite: &[bool],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = model.dim();
    let (_, info) = model.score_info(theta)?;
    let idx: Vec<usize> = (0..p).filter(|&r| finite[r]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| info[(idx[i], idx[j])]);
    let g = if idx.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        SpdFactor::new(&sub)?.inverse()
    };
    let mut vcov = DMatrix::zeros(p, p);
    for r in 0..p {
        if !finite[r] {
            vcov[(r, r)] = f64::INFINITY;
        }
    }
    for (i, &r) in idx.iter().enumerate() {
        for (j, &s) in idx.iter().enumerate() {
            vcov[(r, s)] = g[(i, j)];
        }
    }
    let se = (0..p).map(|r| vcov[(r, r)].sqrt()).collect();
    Ok((se, vcov))
}

fn finish(
    model: &dyn Model,
    method: Method,
    theta: Vec<f64>,
    finite: Vec<bool>,
    iterations: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
) -> Result<FitResult> {
    let (std_errors, vcov) = variance(model, &theta, &finite)?;
    Ok(FitResult {
        method,
        labels: model.labels(),
        log_likelihood: model.log_likelihood(&theta)?,
        estimates: theta,
        std_errors,
        vcov,
        iterations,
        converged,
        finite,
        trace,
        profile_component: None,
    })
}

fn add_scaled(theta: &[f64], step: &DVector<f64>, scale: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(step.iter())
        .map(|(t, s)| t + scale * s)
        .collect()
}

/// Firth and joint median bias reduction: `theta + step`, halving the step
/// while it leaves the domain or fails to reduce the adjusted-score norm.
fn adjusted_scoring(
    model: &dyn Model,
    method: Method,
    start: Vec<f64>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut theta = start;
    let mut cur = adjusted_score(model, method, &theta)?;
    let mut trace = Vec::new();
    let mut prev_step: Option<DVector<f64>> = None;
    for it in 0..opts.max_iterations {
        trace.push(TraceEntry {
            theta: theta.clone(),
            adjusted_score_norm: cur.norm,
        });
        if cur.norm <= opts.tolerance {
            // one more full step, kept only if it lowers the norm further
            let mut steps = it;
            let cand = add_scaled(&theta, &cur.step, 1.0);
            if let Ok(n) = adjusted_score(model, method, &cand) {
                if n.norm < cur.norm {
                    theta = cand;
                    steps += 1;
                    trace.push(TraceEntry {
                        theta: theta.clone(),
                        adjusted_score_norm: n.norm,
                    });
                }
            }
            let p = theta.len();
            return finish(model, method, theta, vec![true; p], steps, true, trace);
        }
        let mut fallback: Option<(Vec<f64>, AdjustedScore)> = None;
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=opts.step_halvings {
            let cand = add_scaled(&theta, &cur.step, scale);
            if let Ok(next) = adjusted_score(model, method, &cand) {
                if next.norm < cur.norm {
                    accepted = Some((cand, next));
                    break;
                }
                if fallback.is_none() {
                    fallback = Some((cand, next));
                }
            }
            scale *= 0.5;
        }
        if let Some((_, n)) = &accepted {
            if n.norm > WEAK_PROGRESS * cur.norm {
                let cand = add_scaled(&theta, &cur.step, 0.5 * scale);
                if let Ok(n2) = adjusted_score(model, method, &cand) {
                    if n2.norm < n.norm {
                        accepted = Some((cand, n2));
                    }
                }
            }
        }
        match accepted.or(fallback) {
            Some((t, n)) => {
                let d = DVector::from_iterator(t.len(), t.iter().zip(&theta).map(|(a, b)| a - b));
                let (t, n) = match prev_step.as_ref().and_then(|p| geometric_tail(p, &d)) {
                    Some(tail) => {
                        match adjusted_score(model, method, &add_scaled(&t, &tail, 1.0)) {
                            Ok(e) if e.norm < n.norm => (add_scaled(&t, &tail, 1.0), e),
                            _ => (t, n),
                        }
                    }
                    None => (t, n),
                };
                prev_step = Some(d);
                theta = t;
                cur = n;
            }
            None => {
                let p = theta.len();
                return finish(model, method, theta, vec![true; p], it + 1, false, trace);
            }
        }
    }
    trace.push(TraceEntry {
        theta: theta.clone(),
        adjusted_score_norm: cur.norm,
    });
    let converged = cur.norm <= opts.tolerance;
    let p = theta.len();
    finish(
        model,
        method,
        theta,
        vec![true; p],
        opts.max_iterations,
        converged,
        trace,
    )
}

/// Remaining displacement when the last two steps point the same way and
/// shrink by a steady ratio, summing the geometric series of future steps.
fn geometric_tail(prev: &DVector<f64>, step: &DVector<f64>) -> Option<DVector<f64>> {
    let (a, b) = (prev.norm(), step.norm());
    if a == 0.0 || b == 0.0 {
        return None;
    }
    let ratio = b / a;
    if prev.dot(step) / (a * b) < COLLINEAR || !(MIN_RATIO..MAX_RATIO).contains(&ratio) {
        return None;
    }
    Some(step * (ratio / (1.0 - ratio)))
}

/// Fisher scoring for the maximum likelihood estimate, with step halving on
/// the log-likelihood and detection of estimates that drift to infinity.
fn mle_scoring(model: &dyn Model, start: Vec<f64>, opts: &FitOptions) -> Result<FitResult> {
    let p = model.dim();
    let mut theta = start;
    let mut active = vec![true; p];
    let mut ll = model.log_likelihood(&theta)?;
    let mut history: Vec<(Vec<f64>, f64)> = vec![(theta.clone(), ll)];
    let mut trace = Vec::new();
    let mut diverged = false;

    for it in 0..opts.max_iterations {
        let (u, info) = model.score_info(&theta)?;
        let norm = scaled_norm(&u, &info, Some(&active));
        trace.push(TraceEntry {
            theta: theta.clone(),
            adjusted_score_norm: norm,
        });
        if norm <= opts.tolerance && step_is_small(&u, &info, &active) {
            return mle_finish(model, theta, active, it, true, trace);
        }
        let big = theta.iter().fold(0.0f64, |m, v| m.max(v.abs())) > opts.divergence_threshold
            || flat(&history);
        let step = match active_step(&u, &info, &active) {
            Ok(s) if !(big && !diverged && monotone(&history)) => s,
            other => {
                // singular information, a large iterate or a flat likelihood: divergence if the
                // likelihood has been rising steadily
                if diverged || !monotone(&history) {
                    match other {
                        Ok(s) => s,
                        Err(e) => return Err(e),
                    }
                } else {
                    active = drift_mask(&history);
                    diverged = true;
                    let (u, info) = model.score_info(&theta)?;
                    if scaled_norm(&u, &info, Some(&active)) <= opts.tolerance
                        && step_is_small(&u, &info, &active)
                    {
                        return mle_finish(model, theta, active, it, true, trace);
                    }
                    active_step(&u, &info, &active)?
                }
            }
        };
        let eval = |cand: &[f64]| -> Option<(f64, f64)> {
            let l = model.log_likelihood(cand).ok()?;
            let n = model
                .score_info(cand)
                .map_or(f64::INFINITY, |(u, i)| scaled_norm(&u, &i, Some(&active)));
            Some((l, n))
        };
        // within rounding of the current log-likelihood the scaled score decides
        let better = |l: f64, n: f64| {
            l > ll + LL_SLACK * ll.abs().max(1.0) || (not_below(l, ll) && n < norm)
        };
        let mut scale = 1.0;
        let mut next: Option<(Vec<f64>, f64, f64)> = None;
        let mut fallback = None;
        for _ in 0..=opts.step_halvings {
            let cand = add_scaled(&theta, &step, scale);
            if let Some((l, n)) = eval(&cand) {
                if better(l, n) {
                    next = Some((cand, l, n));
                    break;
                }
                if fallback.is_none() {
                    fallback = Some((cand, l, n));
                }
            }
            scale *= 0.5;
        }
        if let Some((_, _, n)) = &next {
            if *n > WEAK_PROGRESS * norm {
                let cand = add_scaled(&theta, &step, 0.5 * scale);
                if let Some((l2, n2)) = eval(&cand) {
                    if n2 < *n && better(l2, n2) {
                        next = Some((cand, l2, n2));
                    }
                }
            }
        }
        let next = next.map(|(t, l, _)| (t, l));
        let fallback = fallback.map(|(t, l, _)| (t, l));
        match next.or(fallback) {
            Some((t, l)) => {
                theta = t;
                ll = l;
                history.push((theta.clone(), ll));
            }
            None => return mle_finish(model, theta, active, it + 1, false, trace),
        }
    }
    let (u, info) = model.score_info(&theta)?;
    let norm = scaled_norm(&u, &info, Some(&active));
    trace.push(TraceEntry {
        theta: theta.clone(),
        adjusted_score_norm: norm,
    });
    let converged = norm <= opts.tolerance && step_is_small(&u, &info, &active);
    mle_finish(model, theta, active, opts.max_iterations, converged, trace)
}

fn mle_finish(
    model: &dyn Model,
    theta: Vec<f64>,
    finite: Vec<bool>,
    iterations: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
) -> Result<FitResult> {
    finish(
        model,
        Method::Mle,
        theta,
        finite,
        iterations,
        converged,
        trace,
    )
}

/// Scoring step on the active components only.
fn active_step(u: &DVector<f64>, info: &DMatrix<f64>, active: &[bool]) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..u.len()).filter(|&r| active[r]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| info[(idx[i], idx[j])]);
    let rhs = DVector::from_fn(idx.len(), |i, _| u[idx[i]]);
    let s = SpdFactor::new(&sub)?.solve(&rhs);
    let mut step = DVector::zeros(u.len());
    for (i, &r) in idx.iter().enumerate() {
        step[r] = s[i];
    }
    Ok(step)
}

fn step_is_small(u: &DVector<f64>, info: &DMatrix<f64>, active: &[bool]) -> bool {
    active_step(u, info, active).is_ok_and(|s| s.amax() <= MLE_STEP_TOL)
}

/// Log-likelihood non-decreasing over the window. Near separation the
/// increments fall below the resolution of the log-likelihood itself.
fn monotone(history: &[(Vec<f64>, f64)]) -> bool {
    history.len() > DIVERGENCE_WINDOW
        && history[history.len() - DIVERGENCE_WINDOW - 1..]
            .windows(2)
            .all(|w| not_below(w[1].1, w[0].1))
}

/// Log-likelihood unchanged to rounding over the window while the iteration
/// has not converged: the slow drift of a separated probit fit.
fn flat(history: &[(Vec<f64>, f64)]) -> bool {
    if history.len() <= DIVERGENCE_WINDOW {
        return false;
    }
    let (last, first) = (
        &history[history.len() - 1],
        &history[history.len() - 1 - DIVERGENCE_WINDOW],
    );
    let drift = last
        .0
        .iter()
        .zip(&first.0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (last.1 - first.1).abs() <= 100.0 * LL_SLACK * last.1.abs().max(1.0) && drift >= FLAT_MIN_DRIFT
}

/// Components still moving by a sizeable fraction of the largest drift.
fn drift_mask(history: &[(Vec<f64>, f64)]) -> Vec<bool> {
    let last = &history[history.len() - 1].0;
    let first = &history[history.len() - 1 - DIVERGENCE_WINDOW].0;
    let drift: Vec<f64> = last.iter().zip(first).map(|(a, b)| (a - b).abs()).collect();
    let max = drift.iter().cloned().fold(0.0, f64::max);
    drift.iter().map(|&d| d < DRIFT_FRACTION * max).collect()
}
