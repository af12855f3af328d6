//! Dense symmetric positive-definite solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes `a` using its lower triangle. A non-positive pivot is reported
    /// with its index.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("cholesky: matrix is not square"));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularInformation { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        let mut e = DVector::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.set_column(j, &col);
        }
        // symmetrize against rounding
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Smallest matrix dimension for which the arrow factorization is considered.
const ARROW_MIN_DIM: usize = 16;

/// Number of leading rows/columns outside which `a` is diagonal: the smallest
/// `h` with `a[i][j] == 0` for all `i != j`, `i, j >= h`.
pub fn arrow_head(a: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let mut h = 0;
    for j in 0..n {
        for i in (j + 1)..n {
            if a[(i, j)] != 0.0 || a[(j, i)] != 0.0 {
                h = h.max(j + 1);
                break;
            }
        }
    }
    h
}

/// Factorization of an SPD matrix with leading dense block `A` (h x h),
/// coupling `B` (h x t) and diagonal trailing block `D`, via the Schur
/// complement `S = A - B D^{-1} B^T`.
#[derive(Debug, Clone)]
pub struct ArrowFactor {
    h: usize,
    b: DMatrix<f64>,
    d: DVector<f64>,
    schur: Cholesky,
}

impl ArrowFactor {
    pub fn new(a: &DMatrix<f64>, h: usize) -> Result<Self> {
        let n = a.nrows();
        let t = n - h;
        let d = DVector::from_fn(t, |i, _| a[(h + i, h + i)]);
        if let Some(i) = d.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::SingularInformation { pivot: h + i });
        }
        let b = a.view((0, h), (h, t)).into_owned();
        let mut s = a.view((0, 0), (h, h)).into_owned();
        for i in 0..h {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..t {
                    acc += b[(i, k)] * b[(j, k)] / d[k];
                }
                s[(i, j)] -= acc;
                s[(j, i)] = s[(i, j)];
            }
        }
        let schur = Cholesky::new(&s)?;
        Ok(Self { h, b, d, schur })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (h, t) = (self.h, self.d.len());
        let y = DVector::from_fn(t, |k, _| rhs[h + k] / self.d[k]);
        let head = DVector::from_fn(h, |i, _| rhs[i]) - &self.b * &y;
        let xh = self.schur.solve(&head);
        let bt_xh = self.b.transpose() * &xh;
        let mut x = DVector::zeros(h + t);
        x.rows_mut(0, h).copy_from(&xh);
        for k in 0..t {
            x[h + k] = (rhs[h + k] - bt_xh[k]) / self.d[k];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let (h, t) = (self.h, self.d.len());
        let n = h + t;
        let s_inv = self.schur.inverse();
        // C = D^{-1} B^T (t x h)
        let c = DMatrix::from_fn(t, h, |k, i| self.b[(i, k)] / self.d[k]);
        let c_sinv = &c * &s_inv;
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((0, 0), (h, h)).copy_from(&s_inv);
        for k in 0..t {
            for i in 0..h {
                g[(h + k, i)] = -c_sinv[(k, i)];
                g[(i, h + k)] = -c_sinv[(k, i)];
            }
        }
        for k in 0..t {
            for l in 0..=k {
                let mut v = 0.0;
                for i in 0..h {
                    v += c_sinv[(k, i)] * c[(l, i)];
                }
                if k == l {
                    v += 1.0 / self.d[k];
                }
                g[(h + k, h + l)] = v;
                g[(h + l, h + k)] = v;
            }
        }
        g
    }

    pub fn log_det(&self) -> f64 {
        self.schur.log_det() + self.d.iter().map(|v| v.ln()).sum::<f64>()
    }
}

/// SPD factorization that uses [`ArrowFactor`] when the matrix has a small
/// dense head and a diagonal remainder, and [`Cholesky`] otherwise.
#[derive(Debug, Clone)]
pub enum SpdFactor {
    Dense(Cholesky),
    Arrow(ArrowFactor),
}

impl SpdFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("spd factor: matrix is not square"));
        }
        if n >= ARROW_MIN_DIM {
            let h = arrow_head(a);
            if 4 * h <= n {
                return Ok(SpdFactor::Arrow(ArrowFactor::new(a, h)?));
            }
        }
        Ok(SpdFactor::Dense(Cholesky::new(a)?))
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Dense(c) => c.solve(b),
            SpdFactor::Arrow(f) => f.solve(b),
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        match self {
            SpdFactor::Dense(c) => c.inverse(),
            SpdFactor::Arrow(f) => f.inverse(),
        }
    }

    pub fn log_det(&self) -> f64 {
        match self {
            SpdFactor::Dense(c) => c.log_det(),
            SpdFactor::Arrow(f) => f.log_det(),
        }
    }
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::invalid("solve_spd: dimension mismatch"));
    }
    Ok(SpdFactor::new(a)?.solve(b))
}

pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(SpdFactor::new(a)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_systems() {
        let x = solve_spd(
            &DMatrix::identity(2, 2),
            &DVector::from_vec(vec![3.0, -1.0]),
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[3.0, -1.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let x = solve_spd(&d, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x = solve_spd(&a, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn non_pd_reports_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        assert_eq!(
            solve_spd(&a, &DVector::zeros(3)).unwrap_err(),
            Error::SingularInformation { pivot: 2 }
        );
    }

    #[test]
    fn random_residual_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = rng.random_range(1..=20);
            let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let a = g.transpose() * &g + DMatrix::identity(p, p);
            let b = DVector::<f64>::from_fn(p, |_, _| rng.random_range(-10.0..10.0));
            let x = solve_spd(&a, &b).unwrap();
            let r = (&a * &x - &b).amax();
            assert!(r <= 1e-8 * (1.0 + b.amax()));
        }
    }

    fn random_arrow(rng: &mut ChaCha8Rng, h: usize, t: usize) -> DMatrix<f64> {
        let n = h + t;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let g = DMatrix::<f64>::from_fn(h, h, |_, _| rng.random_range(-1.0..1.0));
        a.view_mut((0, 0), (h, h)).copy_from(&(g.transpose() * &g));
        for k in 0..t {
            a[(h + k, h + k)] = rng.random_range(1.0..3.0);
            for i in 0..h {
                let v = rng.random_range(-0.2..0.2);
                a[(i, h + k)] = v;
                a[(h + k, i)] = v;
            }
        }
        for i in 0..h {
            a[(i, i)] += 1.0 + t as f64 * 0.1;
        }
        a
    }

    #[test]
    fn arrow_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(h, t) in &[(1, 40), (2, 30), (0, 20), (3, 60)] {
            let a = random_arrow(&mut rng, h, t);
            assert_eq!(arrow_head(&a), h);
            let f = SpdFactor::new(&a).unwrap();
            assert!(matches!(f, SpdFactor::Arrow(_)));
            let c = Cholesky::new(&a).unwrap();
            let b = DVector::<f64>::from_fn(h + t, |_, _| rng.random_range(-5.0..5.0));
            assert!((f.solve(&b) - c.solve(&b)).amax() < 1e-12);
            assert!((f.inverse() - c.inverse()).amax() < 1e-12);
            assert!((f.log_det() - c.log_det()).abs() < 1e-10);
        }
    }

    #[test]
    fn arrow_reports_bad_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = random_arrow(&mut rng, 1, 30);
        a[(7, 7)] = 0.0;
        assert_eq!(
            SpdFactor::new(&a).unwrap_err(),
            Error::SingularInformation { pivot: 7 }
        );
    }

    proptest! {
        #[test]
        fn inverse_is_inverse(vals in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let g = DMatrix::from_row_slice(4, 4, &vals);
            let a = g.transpose() * &g + DMatrix::identity(4, 4);
            let inv = spd_inverse(&a).unwrap();
            let e = (&a * &inv - DMatrix::<f64>::identity(4, 4)).amax();
            prop_assert!(e < 1e-10);
        }
    }
}
