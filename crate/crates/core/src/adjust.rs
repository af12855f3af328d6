//! Profile cumulants, the median adjustment and the Firth adjustment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::CumulantBundle;
use crate::numerics::SpdFactor;

/// Approximate cumulants of the profile score for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCumulants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    /// Regression coefficients of `U_r` on the remaining score components,
    /// in their original order with `r` skipped.
    pub gamma: DVector<f64>,
}

impl ProfileCumulants {
    /// `-kappa1 + kappa3 / (6 kappa2)`
    pub fn median_shift(&self) -> f64 {
        -self.kappa1 + self.kappa3 / (6.0 * self.kappa2)
    }
}

/// Componentwise median adjustment: `m_r = -kappa1_r + kappa3_r / (6 kappa2_r)`
/// and `m1_r = m_r / kappa2_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianAdjustment {
    pub m: DVector<f64>,
    pub m1: DVector<f64>,
    pub kappa1: DVector<f64>,
    pub kappa2: DVector<f64>,
    pub kappa3: DVector<f64>,
}

fn check_component(bundle: &CumulantBundle, r: usize) -> Result<()> {
    if r >= bundle.dim() {
        return Err(Error::invalid(format!(
            "component {r} out of range for a {}-parameter model",
            bundle.dim()
        )));
    }
    Ok(())
}

/// Profile cumulants for component `r`, with the nuisance inverse formed from
/// the `(p-1) x (p-1)` information sub-block.
pub fn profile_cumulants(bundle: &CumulantBundle, r: usize) -> Result<ProfileCumulants> {
    check_component(bundle, r)?;
    let p = bundle.dim();
    let info = &bundle.info;
    let others: Vec<usize> = (0..p).filter(|&a| a != r).collect();
    let q = others.len();

    let (gamma, nuis_inv) = if q == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let sub = DMatrix::from_fn(q, q, |i, j| info[(others[i], others[j])]);
        let chol = SpdFactor::new(&sub).map_err(|e| match e {
            Error::SingularInformation { pivot } => Error::SingularInformation {
                pivot: others[pivot],
            },
            e => e,
        })?;
        let cross = DVector::from_fn(q, |i, _| info[(others[i], r)]);
        (chol.solve(&cross), chol.inverse())
    };

    // weights of the efficient score U_r - gamma_a U_a
    let mut w = vec![0.0; p];
    let mut pos = vec![usize::MAX; p];
    w[r] = 1.0;
    for (i, &a) in others.iter().enumerate() {
        w[a] = -gamma[i];
        pos[a] = i;
    }

    let kappa2 = info[(r, r)]
        - others
            .iter()
            .enumerate()
            .map(|(i, &a)| gamma[i] * info[(r, a)])
            .sum::<f64>();
    if !(kappa2 > 0.0) {
        return Err(Error::NonPositiveVariance {
            component: r,
            value: kappa2,
        });
    }
    let kappa3 = contract3(bundle, &w);
    let mut kappa1 = 0.0;
    for ([s, a, b], v) in bundle.nu3.iter().chain(bundle.numix.iter()) {
        if a != r && b != r && w[s] != 0.0 {
            kappa1 += nuis_inv[(pos[a], pos[b])] * w[s] * v;
        }
    }
    Ok(ProfileCumulants {
        kappa1: -0.5 * kappa1,
        kappa2,
        kappa3,
        gamma,
    })
}

fn contract3(bundle: &CumulantBundle, w: &[f64]) -> f64 {
    bundle
        .nu3
        .iter()
        .map(|([s, t, u], v)| w[s] * w[t] * w[u] * v)
        .sum()
}

/// Median adjustment for every component.
///
/// Uses one full inverse `G = i^{-1}`: the efficient-score weights are
/// `G_sr / G_rr`, `kappa2_r = 1 / G_rr` and the nuisance inverse is the
/// rank-one downdate `G_ab - G_ar G_rb / G_rr`.
pub fn median_adjustment(bundle: &CumulantBundle) -> Result<MedianAdjustment> {
    let p = bundle.dim();
    let g = SpdFactor::new(&bundle.info)?.inverse();
    let mut kappa1 = DVector::zeros(p);
    let mut kappa2 = DVector::zeros(p);
    let mut kappa3 = DVector::zeros(p);
    let mut w = vec![0.0; p];
    for r in 0..p {
        let grr = g[(r, r)];
        if !(grr > 0.0) {
            return Err(Error::NonPositiveVariance {
                component: r,
                value: 1.0 / grr,
            });
        }
        for (s, ws) in w.iter_mut().enumerate() {
            *ws = g[(s, r)] / grr;
        }
        w[r] = 1.0;
        kappa2[r] = 1.0 / grr;
        kappa3[r] = contract3(bundle, &w);
        let mut k1 = 0.0;
        for ([s, a, b], v) in bundle.nu3.iter().chain(bundle.numix.iter()) {
            if a != r && b != r && w[s] != 0.0 {
                let nab = g[(a, b)] - g[(a, r)] * g[(r, b)] / grr;
                k1 += nab * w[s] * v;
            }
        }
        kappa1[r] = -0.5 * k1;
    }
    let m = DVector::from_fn(p, |r, _| -kappa1[r] + kappa3[r] / (6.0 * kappa2[r]));
    let m1 = DVector::from_fn(p, |r, _| m[r] / kappa2[r]);
    Ok(MedianAdjustment {
        m,
        m1,
        kappa1,
        kappa2,
        kappa3,
    })
}

/// Firth's adjustment `A_r = 1/2 sum_{s,t} i^{st} (nu_{r,s,t} + nu_{r,st})`.
pub fn firth_adjustment(bundle: &CumulantBundle) -> Result<DVector<f64>> {
    let g = SpdFactor::new(&bundle.info)?.inverse();
    let mut a = DVector::zeros(bundle.dim());
    for ([r, s, t], v) in bundle.nu3.iter().chain(bundle.numix.iter()) {
        a[r] += 0.5 * g[(s, t)] * v;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TensorBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bundle(rng: &mut ChaCha8Rng, p: usize) -> CumulantBundle {
        let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let info = g.transpose() * &g + DMatrix::identity(p, p);
        let mut nu3 = TensorBuilder::new(p);
        let mut numix = TensorBuilder::new(p);
        for r in 0..p {
            for s in r..p {
                for t in s..p {
                    nu3.add_symmetric(r, s, t, rng.random_range(-1.0..1.0));
                }
            }
            for s in 0..p {
                for t in s..p {
                    numix.add_symmetric_last2(r, s, t, rng.random_range(-1.0..1.0));
                }
            }
        }
        CumulantBundle {
            score: DVector::zeros(p),
            info,
            nu3: nu3.finish(),
            numix: numix.finish(),
        }
    }

    /// Direct transcription of the profile cumulant formulas with explicit
    /// index loops and a separately inverted nuisance block.
    fn naive(b: &CumulantBundle, r: usize) -> (f64, f64, f64) {
        let p = b.dim();
        let o: Vec<usize> = (0..p).filter(|&a| a != r).collect();
        let q = o.len();
        let sub = DMatrix::from_fn(q, q, |i, j| b.info[(o[i], o[j])]);
        let nu = sub.try_inverse().unwrap();
        let gam: Vec<f64> = (0..q)
            .map(|i| (0..q).map(|j| nu[(i, j)] * b.info[(r, o[j])]).sum())
            .collect();
        let n3 = |x: usize, y: usize, z: usize| b.nu3.get(x, y, z);
        let nm = |x: usize, y: usize, z: usize| b.numix.get(x, y, z);
        let mut k1 = 0.0;
        for i in 0..q {
            for j in 0..q {
                let (a, bb) = (o[i], o[j]);
                let mut t1 = nm(r, a, bb);
                let mut t2 = n3(r, a, bb);
                for k in 0..q {
                    t1 -= gam[k] * nm(o[k], a, bb);
                    t2 -= gam[k] * n3(a, bb, o[k]);
                }
                k1 += nu[(i, j)] * (t1 + t2);
            }
        }
        let k2 = b.info[(r, r)] - (0..q).map(|i| gam[i] * b.info[(r, o[i])]).sum::<f64>();
        let mut k3 = n3(r, r, r);
        for i in 0..q {
            k3 -= 3.0 * gam[i] * n3(r, r, o[i]);
            for j in 0..q {
                k3 += 3.0 * gam[i] * gam[j] * n3(r, o[i], o[j]);
                for k in 0..q {
                    k3 -= gam[i] * gam[j] * gam[k] * n3(o[i], o[j], o[k]);
                }
            }
        }
        (-0.5 * k1, k2, k3)
    }

    #[test]
    fn matches_direct_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = rng.random_range(2..=6);
            let b = random_bundle(&mut rng, p);
            let all = median_adjustment(&b).unwrap();
            for r in 0..p {
                let pc = profile_cumulants(&b, r).unwrap();
                let (k1, k2, k3) = naive(&b, r);
                let tol = 1e-9 * (1.0 + k1.abs() + k3.abs());
                assert!((pc.kappa1 - k1).abs() < tol);
                assert!((pc.kappa2 - k2).abs() < 1e-9 * k2);
                assert!((pc.kappa3 - k3).abs() < tol);
                assert!((all.kappa1[r] - k1).abs() < tol);
                assert!((all.kappa2[r] - k2).abs() < 1e-9 * k2);
                assert!((all.kappa3[r] - k3).abs() < tol);
                assert!(
                    (all.m1[r] * all.kappa2[r] - all.m[r]).abs()
                        <= 2.0 * f64::EPSILON * all.m[r].abs()
                );
            }
        }
    }

    #[test]
    fn kappa2_is_inverse_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = rng.random_range(1..=8);
            let b = random_bundle(&mut rng, p);
            let g = b.info.clone().try_inverse().unwrap();
            for r in 0..p {
                let k2 = profile_cumulants(&b, r).unwrap().kappa2;
                assert!((k2 * g[(r, r)] - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scalar_case() {
        let mut nu3 = TensorBuilder::new(1);
        nu3.add(0, 0, 0, 2.5);
        let mut numix = TensorBuilder::new(1);
        numix.add(0, 0, 0, -1.0);
        let b = CumulantBundle {
            score: DVector::from_element(1, 0.3),
            info: DMatrix::from_element(1, 1, 4.0),
            nu3: nu3.finish(),
            numix: numix.finish(),
        };
        let pc = profile_cumulants(&b, 0).unwrap();
        assert_eq!((pc.kappa1, pc.kappa2, pc.kappa3), (0.0, 4.0, 2.5));
        assert_eq!(pc.gamma.len(), 0);
        let m = median_adjustment(&b).unwrap();
        assert!((m.m[0] - 2.5 / 24.0).abs() < 1e-15);
        let f = firth_adjustment(&b).unwrap();
        assert!((f[0] - (2.5 - 1.0) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_parameters() {
        // info diagonal: gamma = 0 and kappa1 = -1/2 nu^{ab}(nu_{r,ab} + nu_{r,a,b})
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b = random_bundle(&mut rng, 3);
        b.info = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 5.0]));
        let pc = profile_cumulants(&b, 0).unwrap();
        assert!(pc.gamma.iter().all(|&g| g == 0.0));
        assert_eq!(pc.kappa2, 2.0);
        assert_eq!(pc.kappa3, b.nu3.get(0, 0, 0));
        let expect = -0.5
            * ((b.numix.get(0, 1, 1) + b.nu3.get(0, 1, 1)) / 3.0
                + (b.numix.get(0, 2, 2) + b.nu3.get(0, 2, 2)) / 5.0);
        assert!((pc.kappa1 - expect).abs() < 1e-14);
    }

    #[test]
    fn singular_nuisance_block() {
        let b = CumulantBundle {
            score: DVector::zeros(3),
            info: DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]),
            nu3: TensorBuilder::new(3).finish(),
            numix: TensorBuilder::new(3).finish(),
        };
        assert!(matches!(
            profile_cumulants(&b, 0),
            Err(Error::SingularInformation { pivot: 2 })
        ));
        assert!(median_adjustment(&b).is_err());
        assert!(firth_adjustment(&b).is_err());
        assert!(profile_cumulants(&b, 3).is_err());
    }
}
