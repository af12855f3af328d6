use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::fit::variance;
use super::{fit, FitOptions, FitResult, Method, TraceEntry};
use crate::adjust::profile_cumulants;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{try_find_root, SpdFactor, DEFAULT_ROOT_TOL};

/// Inner tolerance on the scaled nuisance score.
const INNER_TOL: f64 = 1e-10;
/// Outer bracket expansions before the estimate is reported on the boundary.
const MAX_OUTER_STEPS: usize = 60;
/// Bisections back toward the last admissible point after a failed evaluation.
const MAX_RETREATS: usize = 30;

/// Modified profile score and its ingredients at `(psi, lambda_psi)`.
#[derive(Debug, Clone)]
pub struct ProfileScore {
    /// `U_P(psi)`
    pub u_p: f64,
    /// `-kappa1 + kappa3 / (6 kappa2)`
    pub median_shift: f64,
    pub kappa2: f64,
    /// `(psi, lambda_psi)` in model order
    pub theta: Vec<f64>,
}

impl ProfileScore {
    pub fn modified(&self) -> f64 {
        self.u_p + self.median_shift
    }
}

fn check_r(model: &dyn Model, r: usize) -> Result<()> {
    if r >= model.dim() {
        return Err(Error::invalid(format!(
            "component {r} out of range for a {}-parameter model",
            model.dim()
        )));
    }
    Ok(())
}

/// Maximises the likelihood over the nuisance components with component `r`
/// held at `psi`. `warm` supplies the starting point (its `r` entry is ignored).
pub fn constrained_mle(
    model: &dyn Model,
    r: usize,
    psi: f64,
    warm: &[f64],
    opts: &FitOptions,
) -> Result<Vec<f64>> {
    check_r(model, r)?;
    let p = model.dim();
    let mut theta = warm.to_vec();
    theta[r] = psi;
    if let Some(closed) = model.profile_nuisance(r, &theta) {
        let t = closed?;
        model.check_domain(&t)?;
        return Ok(t);
    }
    model.check_domain(&theta)?;
    if p == 1 {
        return Ok(theta);
    }
    let idx: Vec<usize> = (0..p).filter(|&a| a != r).collect();
    let mut ll = model.log_likelihood(&theta)?;
    for _ in 0..opts.max_iterations {
        let (u, info) = model.score_info(&theta)?;
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| info[(idx[i], idx[j])]);
        let us = DVector::from_fn(idx.len(), |i, _| u[idx[i]]);
        let norm = (0..idx.len())
            .map(|i| us[i].abs() / sub[(i, i)].sqrt())
            .fold(0.0, f64::max);
        if norm <= INNER_TOL {
            return Ok(theta);
        }
        let step = SpdFactor::new(&sub)?.solve(&us);
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..=opts.step_halvings {
            let mut cand = theta.clone();
            for (i, &a) in idx.iter().enumerate() {
                cand[a] += scale * step[i];
            }
            if let Ok(l) = model.log_likelihood(&cand) {
                if l >= ll {
                    theta = cand;
                    ll = l;
                    moved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let (u, info) = model.score_info(&theta)?;
    let norm = idx
        .iter()
        .map(|&a| u[a].abs() / info[(a, a)].sqrt())
        .fold(0.0, f64::max);
    // a stalled line search still counts if the score is small
    if norm <= INNER_TOL.sqrt() {
        Ok(theta)
    } else {
        Err(Error::InnerConvergence {
            component: model.labels()[r].clone(),
            value: psi,
        })
    }
}

/// `U_P`, the median shift and `kappa2` for component `r` at `psi`.
pub fn profile_score(
    model: &dyn Model,
    r: usize,
    psi: f64,
    warm: &[f64],
    opts: &FitOptions,
) -> Result<ProfileScore> {
    let theta = constrained_mle(model, r, psi, warm, opts)?;
    let bundle = model.cumulants(&theta)?;
    let pc = profile_cumulants(&bundle, r)?;
    Ok(ProfileScore {
        u_p: bundle.score[r],
        median_shift: pc.median_shift(),
        kappa2: pc.kappa2,
        theta,
    })
}

/// Standardised profile score along component `r`, remembering the last
/// constrained fit as the warm start for the next call.
pub(crate) struct ProfilePath<'a> {
    model: &'a dyn Model,
    r: usize,
    opts: &'a FitOptions,
    median: bool,
    warm: RefCell<Vec<f64>>,
    pub(crate) trace: RefCell<Vec<TraceEntry>>,
}

impl<'a> ProfilePath<'a> {
    pub(crate) fn new(
        model: &'a dyn Model,
        r: usize,
        start: Vec<f64>,
        opts: &'a FitOptions,
        median: bool,
    ) -> Self {
        Self {
            model,
            r,
            opts,
            median,
            warm: RefCell::new(start),
            trace: RefCell::new(Vec::new()),
        }
    }

    /// `S(psi)`: the (modified) profile score divided by `sqrt(kappa2)`.
    pub(crate) fn statistic(&self, psi: f64) -> Result<f64> {
        let warm = self.warm.borrow().clone();
        let ps = profile_score(self.model, self.r, psi, &warm, self.opts)?;
        let u = if self.median { ps.modified() } else { ps.u_p };
        let s = u / ps.kappa2.sqrt();
        if !s.is_finite() {
            return Err(Error::NonPositiveVariance {
                component: self.r,
                value: ps.kappa2,
            });
        }
        self.trace.borrow_mut().push(TraceEntry {
            theta: ps.theta.clone(),
            adjusted_score_norm: s.abs(),
        });
        *self.warm.borrow_mut() = ps.theta;
        Ok(s)
    }

    pub(crate) fn warm(&self) -> Vec<f64> {
        self.warm.borrow().clone()
    }

    /// Walks from `from` in direction `dir` with steps `step`, doubling,
    /// until `statistic - target` changes sign. Failed evaluations halve the
    /// step back toward the last good point. Returns the bracket, or `None`
    /// when the search runs out of steps or admissible points.
    pub(crate) fn bracket(
        &self,
        from: f64,
        f_from: f64,
        target: f64,
        dir: f64,
        step: f64,
        max_steps: usize,
        doubling: bool,
    ) -> Option<(f64, f64)> {
        let (mut a, mut fa) = (from, f_from - target);
        let mut h = step;
        let mut taken = 0;
        let mut retreats = 0;
        while taken < max_steps {
            let b = a + dir * h;
            match self.statistic(b) {
                Ok(s) => {
                    let fb = s - target;
                    if fb == 0.0 || fb.signum() != fa.signum() {
                        return Some(if a < b { (a, b) } else { (b, a) });
                    }
                    a = b;
                    fa = fb;
                    taken += 1;
                    if doubling {
                        h *= 2.0;
                    }
                }
                Err(_) => {
                    retreats += 1;
                    if retreats > MAX_RETREATS {
                        return None;
                    }
                    h *= 0.5;
                }
            }
        }
        None
    }
}

/// Median bias-reduced estimate of component `r` from the modified profile
/// score, with the nuisance block at its constrained maximum likelihood value.
///
/// The search starts from the joint median bias-reduced estimate. When no
/// sign change is found the estimate is reported as an infinite boundary value.
pub fn profile_median_fit(model: &dyn Model, r: usize, opts: &FitOptions) -> Result<FitResult> {
    check_r(model, r)?;
    opts.validate()?;
    let p = model.dim();
    let start = match fit(model, Method::MedianBr, opts) {
        Ok(j) if j.all_finite() && model.check_domain(&j.estimates).is_ok() => j.estimates,
        _ => opts.start.clone().unwrap_or_else(|| model.default_start()),
    };
    let path = ProfilePath::new(model, r, start.clone(), opts, true);
    let psi0 = start[r];
    let s0 = path.statistic(psi0)?;
    let se0 = {
        let th = path.warm();
        let b = model.cumulants(&th)?;
        1.0 / profile_cumulants(&b, r)?.kappa2.sqrt()
    };
    let step = if se0.is_finite() && se0 > 0.0 {
        2.0 * se0
    } else {
        1.0
    };

    let mut finite = vec![true; p];
    let (psi, converged) = if s0 == 0.0 {
        (psi0, true)
    } else {
        let dir = s0.signum();
        match path.bracket(psi0, s0, 0.0, dir, step, MAX_OUTER_STEPS, true) {
            Some((lo, hi)) => {
                let root = try_find_root(|x| path.statistic(x), lo, hi, DEFAULT_ROOT_TOL)?;
                (root, true)
            }
            None => {
                finite[r] = false;
                (f64::INFINITY.copysign(dir), true)
            }
        }
    };

    let mut trace = path.trace.into_inner();
    if !finite[r] {
        let mut estimates = start;
        estimates[r] = psi;
        let mut vcov = DMatrix::zeros(p, p);
        vcov.fill_diagonal(f64::NAN);
        vcov[(r, r)] = f64::INFINITY;
        let mut std_errors = vec![f64::NAN; p];
        std_errors[r] = f64::INFINITY;
        return Ok(FitResult {
            method: Method::MedianBrProfile,
            labels: model.labels(),
            estimates,
            std_errors,
            vcov,
            iterations: trace.len(),
            converged,
            finite,
            trace,
            log_likelihood: f64::NAN,
            profile_component: Some(r),
        });
    }

    let warm = path.warm.borrow().clone();
    let theta = constrained_mle(model, r, psi, &warm, opts)?;
    let ps = profile_score(model, r, psi, &theta, opts)?;
    trace.push(TraceEntry {
        theta: theta.clone(),
        adjusted_score_norm: ps.modified().abs() / ps.kappa2.sqrt(),
    });
    let (std_errors, vcov) = variance(model, &theta, &finite)?;
    Ok(FitResult {
        method: Method::MedianBrProfile,
        labels: model.labels(),
        log_likelihood: model.log_likelihood(&theta)?,
        estimates: theta,
        std_errors,
        vcov,
        iterations: trace.len(),
        converged,
        finite,
        trace,
        profile_component: Some(r),
    })
}
