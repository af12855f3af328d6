//! The model plug-in contract.
//!
//! Every model exposes its log-likelihood, score, expected information and the
//! third-order cumulant tensors that the adjustment machinery consumes.
//!
//! Tensor index convention, used everywhere in the crate:
//!
//! * `nu3[r][s][t] = E(U_r U_s U_t)`, fully symmetric;
//! * `numix[r][s][t] = E(U_r U_st)`, where `U_st` is the second derivative of
//!   the log-likelihood; the first index is the score component and the
//!   tensor is symmetric in its last two indices. A quantity written
//!   `E(U_rs U_t)` is stored at `numix[t][r][s]`.

use std::collections::BTreeMap;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter vector in the model's own component order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "parameter vector must have at least one component",
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                component: format!("theta[{i}]"),
                value: values[i],
            });
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Sparse three-index tensor with deterministic (lexicographic) entry order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tensor3 {
    dim: usize,
    entries: Vec<([usize; 3], f64)>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, r: usize, s: usize, t: usize) -> f64 {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&[r, s, t]))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Nonzero entries in lexicographic index order.
    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.1.abs()).fold(0.0, f64::max)
    }

    /// Every entry equals all of its index permutations within `tol` (relative to the largest entry).
    pub fn is_fully_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.iter().all(|([r, s, t], v)| {
            [[r, t, s], [s, r, t], [s, t, r], [t, r, s], [t, s, r]]
                .iter()
                .all(|&[a, b, c]| (self.get(a, b, c) - v).abs() <= tol * scale)
        })
    }

    pub fn is_symmetric_last2(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.iter()
            .all(|([r, s, t], v)| (self.get(r, t, s) - v).abs() <= tol * scale)
    }
}

/// Accumulates tensor entries, densely for small dimensions and in an ordered
/// map otherwise. Entry order in the finished tensor is independent of the
/// order of `add` calls.
#[derive(Debug, Clone)]
pub enum TensorBuilder {
    Dense {
        dim: usize,
        values: Vec<f64>,
    },
    Sparse {
        dim: usize,
        values: BTreeMap<[usize; 3], f64>,
    },
}

const DENSE_LIMIT: usize = 24;

impl TensorBuilder {
    pub fn new(dim: usize) -> Self {
        if dim <= DENSE_LIMIT {
            TensorBuilder::Dense {
                dim,
                values: vec![0.0; dim * dim * dim],
            }
        } else {
            TensorBuilder::Sparse {
                dim,
                values: BTreeMap::new(),
            }
        }
    }

    #[inline]
    pub fn add(&mut self, r: usize, s: usize, t: usize, v: f64) {
        match self {
            TensorBuilder::Dense { dim, values } => values[(r * *dim + s) * *dim + t] += v,
            TensorBuilder::Sparse { values, .. } => *values.entry([r, s, t]).or_insert(0.0) += v,
        }
    }

    /// Adds `v` at every distinct permutation of `(r, s, t)`.
    pub fn add_symmetric(&mut self, r: usize, s: usize, t: usize, v: f64) {
        let mut perms = vec![
            [r, s, t],
            [r, t, s],
            [s, r, t],
            [s, t, r],
            [t, r, s],
            [t, s, r],
        ];
        perms.sort_unstable();
        perms.dedup();
        for [a, b, c] in perms {
            self.add(a, b, c, v);
        }
    }

    /// Adds `v` at `(r, s, t)` and, when `s != t`, at `(r, t, s)`.
    pub fn add_symmetric_last2(&mut self, r: usize, s: usize, t: usize, v: f64) {
        self.add(r, s, t, v);
        if s != t {
            self.add(r, t, s, v);
        }
    }

    pub fn finish(self) -> Tensor3 {
        match self {
            TensorBuilder::Dense { dim, values } => {
                let mut entries = Vec::new();
                for (i, &v) in values.iter().enumerate() {
                    if v != 0.0 {
                        let t = i % dim;
                        let s = (i / dim) % dim;
                        let r = i / (dim * dim);
                        entries.push(([r, s, t], v));
                    }
                }
                Tensor3 { dim, entries }
            }
            TensorBuilder::Sparse { dim, values } => Tensor3 {
                dim,
                entries: values.into_iter().filter(|e| e.1 != 0.0).collect(),
            },
        }
    }
}

/// Score, expected information and third-order cumulant tensors at one point.
#[derive(Debug, Clone)]
pub struct CumulantBundle {
    pub score: DVector<f64>,
    pub info: DMatrix<f64>,
    /// `E(U_r U_s U_t)`
    pub nu3: Tensor3,
    /// `E(U_r U_st)`
    pub numix: Tensor3,
}

impl CumulantBundle {
    pub fn dim(&self) -> usize {
        self.score.len()
    }

    /// Checks the structural invariants: finite entries, symmetric information,
    /// a fully symmetric `nu3` and a `numix` symmetric in its last two indices.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let p = self.dim();
        if self.info.nrows() != p
            || self.info.ncols() != p
            || self.nu3.dim() != p
            || self.numix.dim() != p
        {
            return Err(Error::invalid("cumulant bundle dimensions disagree"));
        }
        let finite = self.score.iter().all(|v| v.is_finite())
            && self.info.iter().all(|v| v.is_finite())
            && self.nu3.iter().all(|e| e.1.is_finite())
            && self.numix.iter().all(|e| e.1.is_finite());
        if !finite {
            return Err(Error::invalid("cumulant bundle has non-finite entries"));
        }
        let scale = self.info.amax().max(1.0);
        for i in 0..p {
            for j in 0..i {
                if (self.info[(i, j)] - self.info[(j, i)]).abs() > tol * scale {
                    return Err(Error::invalid("information matrix is not symmetric"));
                }
            }
        }
        if !self.nu3.is_fully_symmetric(tol) {
            return Err(Error::invalid("third cumulant tensor is not symmetric"));
        }
        if !self.numix.is_symmetric_last2(tol) {
            return Err(Error::invalid(
                "mixed cumulant tensor is not symmetric in its last two indices",
            ));
        }
        Ok(())
    }
}

/// A parametric model with the expected quantities needed by the solvers.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    /// Component names, in parameter order.
    fn labels(&self) -> Vec<String>;

    /// Rejects parameter values outside the model domain; the default only
    /// requires finiteness.
    fn check_domain(&self, theta: &[f64]) -> Result<()> {
        check_finite(&self.labels(), theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> Result<f64>;

    fn score(&self, theta: &[f64]) -> Result<DVector<f64>>;

    /// Score and expected information, without the third-order tensors.
    fn score_info(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let b = self.cumulants(theta)?;
        Ok((b.score, b.info))
    }

    fn cumulants(&self, theta: &[f64]) -> Result<CumulantBundle>;

    fn default_start(&self) -> Vec<f64>;

    /// Signs of the maximum likelihood estimate when the data are known to put
    /// it at infinity in every component.
    fn mle_at_infinity(&self) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form constrained maximum likelihood estimate of the remaining
    /// components with `theta[r]` held fixed, when the model has one.
    fn profile_nuisance(&self, _r: usize, _theta: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// A model that can draw a new dataset of the same design at a given parameter.
pub trait Simulate: Model {
    fn simulate(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<Box<dyn Simulate>>;
}

pub(crate) fn check_finite(labels: &[String], theta: &[f64]) -> Result<()> {
    if theta.len() != labels.len() {
        return Err(Error::invalid(format!(
            "expected {} parameters, got {}",
            labels.len(),
            theta.len()
        )));
    }
    for (l, &v) in labels.iter().zip(theta) {
        if !v.is_finite() {
            return Err(Error::Domain {
                component: l.clone(),
                value: v,
            });
        }
    }
    Ok(())
}

pub(crate) fn require_positive(label: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            component: label.to_string(),
            value: v,
        })
    }
}

/// Cumulant bundle at a validated parameter point.
pub fn cumulant_bundle(model: &dyn Model, theta: &[f64]) -> Result<CumulantBundle> {
    model.check_domain(theta)?;
    model.cumulants(theta)
}

/// Log-likelihood at a validated parameter point.
pub fn log_likelihood(model: &dyn Model, theta: &[f64]) -> Result<f64> {
    model.check_domain(theta)?;
    model.log_likelihood(theta)
}

/// Working coordinate for one component of a reparameterized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    Identity,
    /// `omega = log(theta)`
    Log,
    /// `omega = sqrt(theta)`
    Sqrt,
}

impl Coordinate {
    /// Original parameter and its first two derivatives with respect to `omega`.
    fn inverse(self, omega: f64) -> (f64, f64, f64) {
        match self {
            Coordinate::Identity => (omega, 1.0, 0.0),
            Coordinate::Log => {
                let e = omega.exp();
                (e, e, e)
            }
            Coordinate::Sqrt => (omega * omega, 2.0 * omega, 2.0),
        }
    }

    pub fn to_working(self, theta: f64) -> f64 {
        match self {
            Coordinate::Identity => theta,
            Coordinate::Log => theta.ln(),
            Coordinate::Sqrt => theta.sqrt(),
        }
    }

    pub fn to_original(self, omega: f64) -> f64 {
        self.inverse(omega).0
    }
}

/// Componentwise reparameterization `theta_r = h_r(omega_r)` of another model.
pub struct Reparameterized<M> {
    inner: M,
    coords: Vec<Coordinate>,
}

impl<M: Model> Reparameterized<M> {
    pub fn new(inner: M, coords: Vec<Coordinate>) -> Result<Self> {
        if coords.len() != inner.dim() {
            return Err(Error::invalid("one coordinate per component is required"));
        }
        Ok(Self { inner, coords })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn to_original(&self, omega: &[f64]) -> Vec<f64> {
        omega
            .iter()
            .zip(&self.coords)
            .map(|(&w, c)| c.to_original(w))
            .collect()
    }

    pub fn to_working(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.coords)
            .map(|(&t, c)| c.to_working(t))
            .collect()
    }

    fn jets(&self, omega: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut theta = Vec::with_capacity(omega.len());
        let mut d1 = Vec::with_capacity(omega.len());
        let mut d2 = Vec::with_capacity(omega.len());
        for (&w, c) in omega.iter().zip(&self.coords) {
            let (t, a, b) = c.inverse(w);
            theta.push(t);
            d1.push(a);
            d2.push(b);
        }
        (theta, d1, d2)
    }
}

impl<M: Model> Model for Reparameterized<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn labels(&self) -> Vec<String> {
        self.inner
            .labels()
            .into_iter()
            .zip(&self.coords)
            .map(|(l, c)| match c {
                Coordinate::Identity => l,
                Coordinate::Log => format!("log({l})"),
                Coordinate::Sqrt => format!("sqrt({l})"),
            })
            .collect()
    }

    fn check_domain(&self, omega: &[f64]) -> Result<()> {
        check_finite(&self.labels(), omega)?;
        for (i, (&w, c)) in omega.iter().zip(&self.coords).enumerate() {
            if *c == Coordinate::Sqrt && w <= 0.0 {
                return Err(Error::Domain {
                    component: self.labels()[i].clone(),
                    value: w,
                });
            }
        }
        self.inner.check_domain(&self.to_original(omega))
    }

    fn log_likelihood(&self, omega: &[f64]) -> Result<f64> {
        self.inner.log_likelihood(&self.to_original(omega))
    }

    fn score(&self, omega: &[f64]) -> Result<DVector<f64>> {
        let (theta, d1, _) = self.jets(omega);
        let u = self.inner.score(&theta)?;
        Ok(DVector::from_fn(u.len(), |r, _| u[r] * d1[r]))
    }

    fn score_info(&self, omega: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (theta, d1, _) = self.jets(omega);
        let (u, i) = self.inner.score_info(&theta)?;
        let p = u.len();
        Ok((
            DVector::from_fn(p, |r, _| u[r] * d1[r]),
            DMatrix::from_fn(p, p, |r, s| i[(r, s)] * d1[r] * d1[s]),
        ))
    }

    fn cumulants(&self, omega: &[f64]) -> Result<CumulantBundle> {
        let (theta, d1, d2) = self.jets(omega);
        let b = self.inner.cumulants(&theta)?;
        let p = b.dim();
        let score = DVector::from_fn(p, |r, _| b.score[r] * d1[r]);
        let info = DMatrix::from_fn(p, p, |r, s| b.info[(r, s)] * d1[r] * d1[s]);
        let mut nu3 = TensorBuilder::new(p);
        for ([r, s, t], v) in b.nu3.iter() {
            nu3.add(r, s, t, v * d1[r] * d1[s] * d1[t]);
        }
        // U^w_st = h'_s h'_t U_st + delta_st h''_s U_s
        let mut numix = TensorBuilder::new(p);
        for ([r, s, t], v) in b.numix.iter() {
            numix.add(r, s, t, v * d1[r] * d1[s] * d1[t]);
        }
        for s in 0..p {
            if d2[s] != 0.0 {
                for r in 0..p {
                    let v = b.info[(r, s)];
                    if v != 0.0 {
                        numix.add(r, s, s, d1[r] * d2[s] * v);
                    }
                }
            }
        }
        Ok(CumulantBundle {
            score,
            info,
            nu3: nu3.finish(),
            numix: numix.finish(),
        })
    }

    fn default_start(&self) -> Vec<f64> {
        self.to_working(&self.inner.default_start())
    }

    fn mle_at_infinity(&self) -> Option<Vec<f64>> {
        self.inner.mle_at_infinity()
    }

    fn profile_nuisance(&self, r: usize, omega: &[f64]) -> Option<Result<Vec<f64>>> {
        self.inner
            .profile_nuisance(r, &self.to_original(omega))
            .map(|res| res.map(|theta| self.to_working(&theta)))
    }
}
