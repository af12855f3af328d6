//! Checks shared by the property tests and the acceptance run. Each returns
//! a short summary on success and a description of the first violation
//! otherwise. No bundled data sets are used.

#![allow(dead_code)]

use medscore::adjust::{median_adjustment, profile_cumulants};
use medscore::model::{Coordinate, Model, Reparameterized};
use medscore::models::{
    BetaLink, BetaRegDesign, BetaRegModel, BinaryDesign, BinaryLink, BinaryModel, GammaStrataModel,
    MatchedTablesDesign, MatchedTablesModel, NormalModel, SkewNormalModel,
};
use medscore::numerics::{spd_inverse, trigamma, QuadratureSettings};
use medscore::sim::{builtin, run_simulation_with_threads};
use medscore::solve::{adjusted_score, fit, insensitivity_matrix, FitOptions, Method};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub struct Fixture {
    pub name: &'static str,
    pub model: Box<dyn Model>,
    pub theta: Vec<f64>,
}

fn binary(link: BinaryLink) -> BinaryModel {
    let x: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            let u = i as f64 / 11.0;
            vec![1.0, 2.0 * u - 1.0, (3.0 * u).sin()]
        })
        .collect();
    let successes = vec![0., 1., 0., 2., 1., 1., 3., 2., 1., 3., 2., 3.];
    BinaryModel::new(BinaryDesign {
        x,
        successes,
        trials: vec![3.0; 12],
        link,
        labels: vec!["a".into(), "b".into(), "c".into()],
    })
    .unwrap()
}

fn beta_data() -> BetaRegDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 25;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![1.0, i as f64 / n as f64 - 0.5])
        .collect();
    let y = x
        .iter()
        .map(|r| {
            let mu = 1.0 / (1.0 + (-(0.3 + 1.2 * r[1]) as f64).exp());
            (mu + 0.15 * (rng.random::<f64>() - 0.5)).clamp(0.02, 0.98)
        })
        .collect();
    BetaRegDesign {
        y,
        x,
        link: BetaLink::Logit,
        labels: vec!["b0".into(), "b1".into()],
    }
}

pub fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
        .collect::<Vec<f64>>()
        .into_iter()
        .map(|z: f64| 0.7 + 1.3 * z)
        .collect()
}

/// One instance of every model family at an interior parameter value.
pub fn fixtures() -> Vec<Fixture> {
    let y = normal_sample(9, 3);
    let skew = vec![0.3, 1.2, -0.4, 2.1, 0.8, 0.05, 1.7, 0.6, -0.1, 1.1];
    let gamma = vec![
        vec![1.2, 0.7, 2.3, 1.9],
        vec![0.4, 0.9, 0.6, 1.4],
        vec![3.1, 2.2, 4.0, 2.7],
    ];
    let tables = MatchedTablesDesign {
        cases: vec![1.0, 0.0, 1.0, 1.0, 0.0],
        controls: vec![1.0, 2.0, 0.0, 3.0, 1.0],
        m: 3,
    };
    vec![
        Fixture {
            name: "normal, known mean",
            model: Box::new(NormalModel::known_mean(y.clone(), 0.5).unwrap()),
            theta: vec![1.7],
        },
        Fixture {
            name: "normal",
            model: Box::new(NormalModel::unknown_mean(y).unwrap()),
            theta: vec![0.4, 1.3],
        },
        Fixture {
            name: "skew normal",
            model: Box::new(SkewNormalModel::new(skew, QuadratureSettings::default()).unwrap()),
            theta: vec![2.3],
        },
        Fixture {
            name: "binary logit",
            model: Box::new(binary(BinaryLink::Logit)),
            theta: vec![0.2, 1.1, -0.6],
        },
        Fixture {
            name: "binary probit",
            model: Box::new(binary(BinaryLink::Probit)),
            theta: vec![-0.1, 0.7, 0.4],
        },
        Fixture {
            name: "beta regression",
            model: Box::new(BetaRegModel::new(beta_data()).unwrap()),
            theta: vec![0.3, 1.1, 40.0],
        },
        Fixture {
            name: "gamma strata",
            model: Box::new(GammaStrataModel::new(gamma).unwrap()),
            theta: vec![2.4, 1.5, 2.8, 0.9],
        },
        Fixture {
            name: "matched tables",
            model: Box::new(MatchedTablesModel::new(tables).unwrap()),
            theta: vec![0.8, -0.3, 0.2, -1.0, 0.5, 0.1],
        },
    ]
}

/// Central differences of the log-likelihood against the analytic score.
pub fn gradient_matches_score() -> Check {
    let mut worst: f64 = 0.0;
    for f in fixtures() {
        let u = f
            .model
            .score(&f.theta)
            .map_err(|e| format!("{}: {e}", f.name))?;
        for r in 0..f.theta.len() {
            let h = 1e-5 * f.theta[r].abs().max(1.0);
            let mut up = f.theta.clone();
            let mut dn = f.theta.clone();
            up[r] += h;
            dn[r] -= h;
            let fd = (f.model.log_likelihood(&up).unwrap() - f.model.log_likelihood(&dn).unwrap())
                / (2.0 * h);
            let rel = (fd - u[r]).abs() / u[r].abs().max(1.0);
            worst = worst.max(rel);
            if rel > 1e-5 {
                return Err(format!(
                    "{}: component {r}: score {} vs difference {fd}",
                    f.name, u[r]
                ));
            }
        }
    }
    Ok(format!("max relative discrepancy {worst:.1e}"))
}

/// `nu3` fully symmetric, `numix` symmetric in its last two indices.
pub fn tensor_symmetries() -> Check {
    for f in fixtures() {
        let b = f
            .model
            .cumulants(&f.theta)
            .map_err(|e| format!("{}: {e}", f.name))?;
        let scale = b.nu3.max_abs().max(b.numix.max_abs()).max(1.0);
        if !b.nu3.is_fully_symmetric(1e-12 * scale) {
            return Err(format!("{}: nu3 is not symmetric", f.name));
        }
        if !b.numix.is_symmetric_last2(1e-12 * scale) {
            return Err(format!(
                "{}: numix is not symmetric in its last two indices",
                f.name
            ));
        }
        b.check_invariants(1e-10 * scale)
            .map_err(|e| format!("{}: {e}", f.name))?;
    }
    Ok("all families".into())
}

/// `kappa2_r = 1 / [i^{-1}]_rr`.
pub fn kappa2_is_partial_information() -> Check {
    let mut worst: f64 = 0.0;
    for f in fixtures() {
        let b = f
            .model
            .cumulants(&f.theta)
            .map_err(|e| format!("{}: {e}", f.name))?;
        let inv = spd_inverse(&b.info).map_err(|e| e.to_string())?;
        for r in 0..b.dim() {
            let k2 = profile_cumulants(&b, r).map_err(|e| e.to_string())?.kappa2;
            let want = 1.0 / inv[(r, r)];
            let rel = (k2 - want).abs() / want.abs();
            worst = worst.max(rel);
            if rel > 1e-8 {
                return Err(format!("{}: component {r}: kappa2 {k2} vs {want}", f.name));
            }
        }
    }
    Ok(format!("max relative discrepancy {worst:.1e}"))
}

/// Expected cumulants of a small grouped binomial design against a direct
/// sum over all 96 outcomes, with `U_st` from differences of the score.
pub fn binary_cumulants_match_enumeration() -> Check {
    for link in [BinaryLink::Logit, BinaryLink::Probit] {
        let x = vec![
            vec![1.0, -0.8],
            vec![1.0, 0.1],
            vec![1.0, 0.9],
            vec![1.0, 1.6],
        ];
        let trials = [2u32, 1, 3, 3];
        let theta = [0.3, -0.7];
        let base = BinaryModel::new(BinaryDesign {
            x: x.clone(),
            successes: vec![0.0; 4],
            trials: trials.iter().map(|&m| m as f64).collect(),
            link,
            labels: vec!["a".into(), "b".into()],
        })
        .unwrap();
        let b = base.cumulants(&theta).unwrap();
        let p = 2;
        let mut info = [[0.0; 2]; 2];
        let mut nu3 = [[[0.0; 2]; 2]; 2];
        let mut numix = [[[0.0; 2]; 2]; 2];
        let mut total = 0.0;
        let mut y = [0u32; 4];
        loop {
            let mut prob = 1.0;
            for i in 0..4 {
                let eta = x[i][0] * theta[0] + x[i][1] * theta[1];
                let pi = match link {
                    BinaryLink::Logit => 1.0 / (1.0 + (-eta).exp()),
                    BinaryLink::Probit => medscore::numerics::norm_cdf(eta),
                };
                let (m, k) = (trials[i], y[i]);
                let choose = (1..=k).fold(1.0, |c, j| c * (m - k + j) as f64 / j as f64);
                prob *= choose * pi.powi(k as i32) * (1.0 - pi).powi((m - k) as i32);
            }
            total += prob;
            let model = base
                .with_successes(y.iter().map(|&v| v as f64).collect())
                .unwrap();
            let u = model.score(&theta).unwrap();
            let h = 1e-5;
            let mut hess = [[0.0; 2]; 2];
            for s in 0..p {
                let mut up = theta;
                let mut dn = theta;
                up[s] += h;
                dn[s] -= h;
                let (a, c) = (model.score(&up).unwrap(), model.score(&dn).unwrap());
                for t in 0..p {
                    hess[t][s] = (a[t] - c[t]) / (2.0 * h);
                }
            }
            for r in 0..p {
                for s in 0..p {
                    info[r][s] += prob * u[r] * u[s];
                    for t in 0..p {
                        nu3[r][s][t] += prob * u[r] * u[s] * u[t];
                        numix[r][s][t] += prob * u[r] * hess[s][t];
                    }
                }
            }
            let mut i = 0;
            while i < 4 && y[i] == trials[i] {
                y[i] = 0;
                i += 1;
            }
            if i == 4 {
                break;
            }
            y[i] += 1;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("{link:?}: outcome probabilities sum to {total}"));
        }
        for r in 0..p {
            for s in 0..p {
                if (b.info[(r, s)] - info[r][s]).abs() > 1e-10 {
                    return Err(format!(
                        "{link:?}: info[{r}][{s}] {} vs {}",
                        b.info[(r, s)],
                        info[r][s]
                    ));
                }
                for t in 0..p {
                    if (b.nu3.get(r, s, t) - nu3[r][s][t]).abs() > 1e-10 {
                        return Err(format!("{link:?}: nu3[{r}][{s}][{t}]"));
                    }
                    if (b.numix.get(r, s, t) - numix[r][s][t]).abs() > 1e-6 {
                        return Err(format!(
                            "{link:?}: numix[{r}][{s}][{t}] {} vs {}",
                            b.numix.get(r, s, t),
                            numix[r][s][t]
                        ));
                    }
                }
            }
        }
    }
    Ok("logit and probit".into())
}

/// `kappa2` of the gamma shape at any rates: with `nu_psipsi = m q psi'(psi)`,
/// `nu_psia = -m / lambda_a` and `nu_aa = m psi / lambda_a^2` the partial
/// information is `m q psi'(psi) - m q / psi`.
pub fn gamma_kappa2_closed_form() -> Check {
    let (q, m) = (4usize, 3usize);
    let y: Vec<Vec<f64>> = (0..q)
        .map(|a| (0..m).map(|j| 0.5 + (a * m + j) as f64 * 0.37).collect())
        .collect();
    let model = GammaStrataModel::new(y).unwrap();
    for psi in [0.6, 2.0, 7.5] {
        let theta: Vec<f64> = std::iter::once(psi)
            .chain((0..q).map(|a| 0.4 + a as f64))
            .collect();
        let b = model.cumulants(&theta).unwrap();
        let k2 = profile_cumulants(&b, 0).unwrap().kappa2;
        let want = (m * q) as f64 * (trigamma(psi).unwrap() - 1.0 / psi);
        if (k2 - want).abs() > 1e-10 * want.abs() {
            return Err(format!("psi = {psi}: {k2} vs {want}"));
        }
    }
    Ok("three shape values".into())
}

/// In a one-parameter canonical family the median-modified score is the
/// derivative of `l + log(i) / 6`.
pub fn penalty_equivalence() -> Check {
    let model = BinaryModel::new(BinaryDesign {
        x: vec![vec![-1.0], vec![-0.5], vec![0.3], vec![1.2], vec![2.0]],
        successes: vec![1.0, 0.0, 2.0, 1.0, 4.0],
        trials: vec![3.0, 2.0, 4.0, 1.0, 5.0],
        link: BinaryLink::Logit,
        labels: vec!["theta".into()],
    })
    .unwrap();
    let log_info = |th: f64| model.information(&[th])[(0, 0)].ln();
    let mut worst: f64 = 0.0;
    for th in [-1.5, -0.2, 0.0, 0.4, 1.3] {
        let a = adjusted_score(&model, Method::MedianBr, &[th]).unwrap();
        let h = 1e-5;
        let penalty = (log_info(th + h) - log_info(th - h)) / (2.0 * h) / 6.0;
        let want = a.score[0] + penalty;
        let err = (a.adjusted[0] - want).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("theta = {th}: {} vs {want}", a.adjusted[0]));
        }
    }
    Ok(format!("max discrepancy {worst:.1e}"))
}

/// Median adjustment vanishes for the logit model at `beta = 0`.
pub fn logit_zero_adjustment() -> Check {
    let model = binary(BinaryLink::Logit);
    let b = model.cumulants(&[0.0, 0.0, 0.0]).unwrap();
    let m = median_adjustment(&b).unwrap();
    let worst = m.m.amax();
    if worst > 1e-12 {
        return Err(format!("adjustment {worst}"));
    }
    Ok(format!("max |M| {worst:.1e}"))
}

fn fit_ok(model: &dyn Model, method: Method) -> Result<Vec<f64>, String> {
    let f = fit(model, method, &FitOptions::default()).map_err(|e| e.to_string())?;
    if !f.converged {
        return Err(format!("{method} fit did not converge"));
    }
    Ok(f.estimates)
}

/// `sqrt` of the variance estimate equals the estimate in the `sqrt` scale,
/// and componentwise `exp` of the `log(phi)` fit equals the `phi` fit.
pub fn equivariance() -> Check {
    let y = normal_sample(12, 5);
    let direct = fit_ok(
        &NormalModel::known_mean(y.clone(), 0.0).unwrap(),
        Method::MedianBr,
    )?[0];
    let sq = Reparameterized::new(
        NormalModel::known_mean(y, 0.0).unwrap(),
        vec![Coordinate::Sqrt],
    )
    .unwrap();
    let omega = fit_ok(&sq, Method::MedianBr)?[0];
    let e1 = (omega - direct.sqrt()).abs() / direct.sqrt();
    if e1 > 1e-6 {
        return Err(format!("sqrt scale: {omega} vs {}", direct.sqrt()));
    }

    let plain = fit_ok(&BetaRegModel::new(beta_data()).unwrap(), Method::MedianBr)?;
    let logged = Reparameterized::new(
        BetaRegModel::new(beta_data()).unwrap(),
        vec![Coordinate::Identity, Coordinate::Identity, Coordinate::Log],
    )
    .unwrap();
    let w = fit_ok(&logged, Method::MedianBr)?;
    let back = logged.to_original(&w);
    let mut e2: f64 = 0.0;
    for (a, b) in back.iter().zip(&plain) {
        e2 = e2.max((a - b).abs() / b.abs().max(1.0));
    }
    if e2 > 1e-6 {
        return Err(format!("log(phi) scale: {back:?} vs {plain:?}"));
    }
    Ok(format!("max relative discrepancy {:.1e}", e1.max(e2)))
}

/// At the median bias-reduced estimate, `H = A i` is diagonal with
/// diagonal `1 / [i^{-1}]_rr`.
pub fn insensitivity_is_diagonal() -> Check {
    let mut worst: f64 = 0.0;
    for f in fixtures() {
        let est =
            fit_ok(f.model.as_ref(), Method::MedianBr).map_err(|e| format!("{}: {e}", f.name))?;
        let (_, info) = f.model.score_info(&est).map_err(|e| e.to_string())?;
        let h = insensitivity_matrix(&info).map_err(|e| e.to_string())?;
        let inv = spd_inverse(&info).map_err(|e| e.to_string())?;
        for r in 0..h.nrows() {
            let d = h[(r, r)];
            if ((d - 1.0 / inv[(r, r)]) / d).abs() > 1e-6 {
                return Err(format!("{}: H[{r}][{r}] = {d}", f.name));
            }
            for s in 0..h.ncols() {
                if s != r {
                    let rel = (h[(r, s)] / d).abs();
                    worst = worst.max(rel);
                    if rel > 1e-6 {
                        return Err(format!("{}: H[{r}][{s}] / H[{r}][{r}] = {rel}", f.name));
                    }
                }
            }
        }
    }
    Ok(format!("max relative off-diagonal {worst:.1e}"))
}

/// The modified IRLS update and the generic modified scoring step agree.
pub fn irls_matches_scoring() -> Check {
    let mut worst: f64 = 0.0;
    for link in [BinaryLink::Logit, BinaryLink::Probit] {
        let model = binary(link);
        let mut beta = vec![0.0; 3];
        for _ in 0..6 {
            let a = adjusted_score(&model, Method::MedianBr, &beta).map_err(|e| e.to_string())?;
            let b = model.cumulants(&beta).map_err(|e| e.to_string())?;
            let m1 = median_adjustment(&b).map_err(|e| e.to_string())?.m1;
            let irls = model.irls_step(&beta, &m1).map_err(|e| e.to_string())?;
            let generic = DVector::from_column_slice(&beta) + &a.step;
            let err = (irls - &generic).amax();
            worst = worst.max(err);
            if err > 1e-10 {
                return Err(format!("{link:?}: iterates differ by {err}"));
            }
            beta = generic.iter().copied().collect();
        }
    }
    Ok(format!("max difference {worst:.1e}"))
}

/// A study summarised with 1, 3 and 8 worker threads gives identical bits.
pub fn simulation_determinism() -> Check {
    for name in ["endometrial", "gamma-strata", "skew-normal"] {
        let mut cfg = builtin(name).map_err(|e| e.to_string())?;
        cfg.replications = 24;
        cfg.seed = 9;
        let runs: Vec<String> = [1, 3, 8]
            .iter()
            .map(|&t| {
                run_simulation_with_threads(&cfg, Some(t))
                    .map(|s| format!("{s:?}"))
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        if runs.iter().any(|r| r != &runs[0]) {
            return Err(format!("{name}: summaries differ across thread counts"));
        }
    }
    Ok("three studies, 1/3/8 threads".into())
}
