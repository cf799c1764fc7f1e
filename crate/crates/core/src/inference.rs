//! Orthogonalized semiparametric inference: cross-fitting, doubly robust
//! (AIPW) treatment-effect estimation with sandwich variance, CATE
//! pseudo-outcomes, efficient scores for the location-scale linear model,
//! and a finite-difference orthogonality probe.

use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{self, matrix, special::sigmoid, Matrix, RngStream};

/// One observation (covariates, binary treatment, outcome).
#[derive(Debug, Clone)]
pub struct Observation {
    pub x: Vec<f64>,
    pub a: u8,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, a: u8, y: f64) -> Self {
        Observation { x, a, y }
    }
}

/// Balanced random partition of {0..n} into K folds.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    /// assignment[i] = fold id of observation i
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn complement_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != fold).collect()
    }
}

pub fn fold_split(n: usize, k: usize, rng: &mut RngStream) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut assignment = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { n, k, assignment })
}

/// Fitted nuisance functions: outcome regressions for both arms and the
/// propensity. Rc so perturbed copies can wrap the originals.
#[derive(Clone)]
pub struct FittedNuisance {
    pub mu0: Rc<dyn Fn(&[f64]) -> f64>,
    pub mu1: Rc<dyn Fn(&[f64]) -> f64>,
    pub e: Rc<dyn Fn(&[f64]) -> f64>,
}

impl FittedNuisance {
    /// Adds eps * h to the chosen component (propensity perturbations are
    /// kept inside (0,1) by the caller's clipping).
    pub fn perturb(&self, component: NuisanceComponent, h: Rc<dyn Fn(&[f64]) -> f64>, eps: f64) -> FittedNuisance {
        let mut out = self.clone();
        match component {
            NuisanceComponent::Mu0 => {
                let base = self.mu0.clone();
                out.mu0 = Rc::new(move |x| base(x) + eps * h(x));
            }
            NuisanceComponent::Mu1 => {
                let base = self.mu1.clone();
                out.mu1 = Rc::new(move |x| base(x) + eps * h(x));
            }
            NuisanceComponent::Propensity => {
                let base = self.e.clone();
                out.e = Rc::new(move |x| base(x) + eps * h(x));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceComponent {
    Mu0,
    Mu1,
    Propensity,
}

/// Learners produce fold-complement nuisances; the interface only ever sees
/// the rows it may train on, which enforces cross-fit independence.
pub trait NuisanceLearner {
    fn fit(&self, data: &[Observation], rng: &mut RngStream) -> Result<FittedNuisance>;
}

impl<F> NuisanceLearner for F
where
    F: Fn(&[Observation], &mut RngStream) -> Result<FittedNuisance>,
{
    fn fit(&self, data: &[Observation], rng: &mut RngStream) -> Result<FittedNuisance> {
        self(data, rng)
    }
}

/// OLS with intercept; returns the coefficient vector (intercept first).
pub fn ols(xs: &[&[f64]], ys: &[f64]) -> Result<Vec<f64>> {
    let p = xs[0].len() + 1;
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for (row, &y) in xs.iter().zip(ys) {
        let mut phi = Vec::with_capacity(p);
        phi.push(1.0);
        phi.extend_from_slice(row);
        for i in 0..p {
            for j in 0..p {
                gram.set(i, j, gram.get(i, j) + phi[i] * phi[j]);
            }
            rhs[i] += phi[i] * y;
        }
    }
    let f = matrix::cholesky(&gram).map_err(|_| Error::SingularDesign)?;
    matrix::solve_spd(&f, &rhs)
}

fn predict_linear(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + num::dot(&beta[1..], x)
}

/// Logistic regression by Newton-Raphson with step halving.
pub fn logistic_fit(xs: &[&[f64]], labels: &[u8]) -> Result<Vec<f64>> {
    let p = xs[0].len() + 1;
    let n = xs.len();
    let mut beta = vec![0.0; p];
    let loglik = |b: &[f64]| -> f64 {
        xs.iter()
            .zip(labels)
            .map(|(x, &a)| {
                let eta = b[0] + num::dot(&b[1..], x);
                let logp = -crate::num::special::log_sum_exp(&[0.0, -eta]);
                let log1mp = -crate::num::special::log_sum_exp(&[0.0, eta]);
                if a == 1 {
                    logp
                } else {
                    log1mp
                }
            })
            .sum()
    };
    let mut ll = loglik(&beta);
    for _ in 0..30 {
        let mut grad = vec![0.0; p];
        let mut hess = Matrix::zeros(p, p);
        for (x, &a) in xs.iter().zip(labels) {
            let mut phi = Vec::with_capacity(p);
            phi.push(1.0);
            phi.extend_from_slice(x);
            let pr = sigmoid(num::dot(&beta, &phi));
            let w = (pr * (1.0 - pr)).max(1e-10);
            for i in 0..p {
                grad[i] += (a as f64 - pr) * phi[i];
                for j in 0..p {
                    hess.set(i, j, hess.get(i, j) + w * phi[i] * phi[j]);
                }
            }
        }
        if num::norm2(&grad) < 1e-9 * n as f64 {
            break;
        }
        let f = matrix::cholesky(&hess).map_err(|_| Error::SingularDesign)?;
        let step = matrix::solve_spd(&f, &grad)?;
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let cand: Vec<f64> =
                beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_ll = loglik(&cand);
            if cand_ll >= ll - 1e-12 {
                beta = cand;
                ll = cand_ll;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(beta)
}

/// Linear outcome regressions per arm plus a logistic propensity.
pub fn linear_learner() -> impl NuisanceLearner {
    |data: &[Observation], _rng: &mut RngStream| -> Result<FittedNuisance> {
        let fit_arm = |arm: u8| -> Result<Vec<f64>> {
            let xs: Vec<&[f64]> =
                data.iter().filter(|o| o.a == arm).map(|o| o.x.as_slice()).collect();
            let ys: Vec<f64> = data.iter().filter(|o| o.a == arm).map(|o| o.y).collect();
            if xs.is_empty() {
                return Err(Error::SingularDesign);
            }
            ols(&xs, &ys)
        };
        let b0 = fit_arm(0)?;
        let b1 = fit_arm(1)?;
        let xs: Vec<&[f64]> = data.iter().map(|o| o.x.as_slice()).collect();
        let labels: Vec<u8> = data.iter().map(|o| o.a).collect();
        let be = logistic_fit(&xs, &labels)?;
        Ok(FittedNuisance {
            mu0: Rc::new(move |x| predict_linear(&b0, x)),
            mu1: Rc::new(move |x| predict_linear(&b1, x)),
            e: Rc::new(move |x| sigmoid(be[0] + num::dot(&be[1..], x))),
        })
    }
}

/// Linear outcome regressions with the propensity pinned to a known value
/// (randomized designs).
pub fn linear_learner_known_e(e0: f64) -> impl NuisanceLearner {
    move |data: &[Observation], _rng: &mut RngStream| -> Result<FittedNuisance> {
        let fit_arm = |arm: u8| -> Result<Vec<f64>> {
            let xs: Vec<&[f64]> =
                data.iter().filter(|o| o.a == arm).map(|o| o.x.as_slice()).collect();
            let ys: Vec<f64> = data.iter().filter(|o| o.a == arm).map(|o| o.y).collect();
            if xs.is_empty() {
                return Err(Error::SingularDesign);
            }
            ols(&xs, &ys)
        };
        let b0 = fit_arm(0)?;
        let b1 = fit_arm(1)?;
        Ok(FittedNuisance {
            mu0: Rc::new(move |x| predict_linear(&b0, x)),
            mu1: Rc::new(move |x| predict_linear(&b1, x)),
            e: Rc::new(move |_| e0),
        })
    }
}

fn clip_propensity(e: f64, clip: f64) -> f64 {
    e.clamp(clip, 1.0 - clip)
}

/// Doubly robust score
/// {mu1(x) - mu0(x)} + a (y - mu1(x))/e(x) - (1-a)(y - mu0(x))/(1 - e(x)) - psi,
/// with the propensity clipped to [clip, 1-clip].
pub fn aipw_score(o: &Observation, psi: f64, nu: &FittedNuisance, clip: f64) -> f64 {
    aipw_uncentered(o, nu, clip) - psi
}

/// The psi-free part of the AIPW score.
pub fn aipw_uncentered(o: &Observation, nu: &FittedNuisance, clip: f64) -> f64 {
    let m0 = (nu.mu0)(&o.x);
    let m1 = (nu.mu1)(&o.x);
    let e = clip_propensity((nu.e)(&o.x), clip);
    let a = o.a as f64;
    (m1 - m0) + a * (o.y - m1) / e - (1.0 - a) * (o.y - m0) / (1.0 - e)
}

/// Cross-fitted ATE estimate with sandwich standard error.
#[derive(Debug, Clone, Serialize)]
pub struct AteReport {
    pub psi_hat: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub fold_means: Vec<f64>,
}

/// Cross-fitted AIPW: nuisances trained per fold on the complement,
/// evaluated on the held-out fold, solved in closed form (the score is
/// linear in psi), with SE = sd(scores)/sqrt(n).
pub fn ate_crossfit<L: NuisanceLearner>(
    data: &[Observation],
    k: usize,
    learner: &L,
    clip: f64,
    rng: &mut RngStream,
) -> Result<AteReport> {
    let n = data.len();
    let plan = fold_split(n, k, rng)?;
    let mut contributions = vec![0.0; n];
    let mut fold_means = Vec::with_capacity(k);
    for fold in 0..k {
        let train_idx = plan.complement_indices(fold);
        let has0 = train_idx.iter().any(|&i| data[i].a == 0);
        let has1 = train_idx.iter().any(|&i| data[i].a == 1);
        if !has0 {
            return Err(Error::ArmMissing { fold, arm: 0 });
        }
        if !has1 {
            return Err(Error::ArmMissing { fold, arm: 1 });
        }
        let train: Vec<Observation> = train_idx.iter().map(|&i| data[i].clone()).collect();
        let mut fold_rng = rng.substream(fold as u64 + 1);
        let nu = learner.fit(&train, &mut fold_rng)?;
        let idx = plan.fold_indices(fold);
        let mut acc = 0.0;
        for &i in &idx {
            let v = aipw_uncentered(&data[i], &nu, clip);
            contributions[i] = v;
            acc += v;
        }
        fold_means.push(acc / idx.len() as f64);
    }
    let psi_hat = num::mean(&contributions);
    let scores: Vec<f64> = contributions.iter().map(|c| c - psi_hat).collect();
    let se = (num::variance(&scores) / n as f64).sqrt();
    Ok(AteReport {
        psi_hat,
        se,
        ci95: (psi_hat - 1.96 * se, psi_hat + 1.96 * se),
        fold_means,
    })
}

/// AIPW pseudo-outcomes: E[ytilde | X = x] equals the CATE tau(x) under the
/// true nuisances, so a second-stage regression of ytilde on x estimates tau.
pub fn cate_pseudo_outcomes(
    data: &[Observation],
    nu: &FittedNuisance,
    clip: f64,
) -> Vec<(Vec<f64>, f64)> {
    data.iter().map(|o| (o.x.clone(), aipw_uncentered(o, nu, clip))).collect()
}

/// IPW means: m1 = mean(a y / e), m0 = mean((1-a) y / (1-e)).
pub fn ipw_means<E>(data: &[Observation], e: E, clip: f64) -> (f64, f64)
where
    E: Fn(&[f64]) -> f64,
{
    let n = data.len() as f64;
    let mut m1 = 0.0;
    let mut m0 = 0.0;
    for o in data {
        let ex = clip_propensity(e(&o.x), clip);
        if o.a == 1 {
            m1 += o.y / ex;
        } else {
            m0 += o.y / (1.0 - ex);
        }
    }
    (m1 / n, m0 / n)
}

/// Outcome-regression mean: average of mu_a over the sample covariates.
pub fn gformula_mean<M>(data: &[Observation], mu_a: M) -> f64
where
    M: Fn(&[f64]) -> f64,
{
    num::mean(&data.iter().map(|o| mu_a(&o.x)).collect::<Vec<_>>())
}

/// Projection coefficients of the residual score onto span{e, e^2 - 1}:
/// c = mu3 / (mu4 - 1 - mu3^2), b = -(mu4 - 1) / (mu4 - 1 - mu3^2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EffScoreCoef {
    pub mu3: f64,
    pub mu4: f64,
    pub b: f64,
    pub c: f64,
}

impl EffScoreCoef {
    pub fn from_moments(mu3: f64, mu4: f64) -> Result<EffScoreCoef> {
        let denom = mu4 - 1.0 - mu3 * mu3;
        if denom <= 1e-8 {
            return Err(Error::DegenerateMoments { value: denom });
        }
        Ok(EffScoreCoef { mu3, mu4, b: -(mu4 - 1.0) / denom, c: mu3 / denom })
    }

    /// Gaussian reference (mu3, mu4) = (0, 3): b = -1, c = 0.
    pub fn gaussian() -> EffScoreCoef {
        EffScoreCoef { mu3: 0.0, mu4: 3.0, b: -1.0, c: 0.0 }
    }

    /// Projected score s~(e) = b e + c (e^2 - 1).
    pub fn projected_score(&self, e: f64) -> f64 {
        self.b * e + self.c * (e * e - 1.0)
    }

    fn projected_score_deriv(&self, e: f64) -> f64 {
        self.b + 2.0 * self.c * e
    }
}

/// Third and fourth moments of the standardized residuals, mapped to the
/// projection coefficients.
pub fn residual_eff_coeffs(residuals: &[f64]) -> Result<EffScoreCoef> {
    if residuals.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: residuals.len() });
    }
    let m = num::mean(residuals);
    let sd = num::variance(residuals).sqrt();
    let std: Vec<f64> = residuals.iter().map(|r| (r - m) / sd).collect();
    let mu3 = num::mean(&std.iter().map(|e| e.powi(3)).collect::<Vec<_>>());
    let mu4 = num::mean(&std.iter().map(|e| e.powi(4)).collect::<Vec<_>>());
    EffScoreCoef::from_moments(mu3, mu4)
}

/// Efficient scores for the location-scale linear model at (beta, sigma^2):
/// psi_beta = -x s~(e)/sigma, psi_sigma2 = -(1 + e s~(e))/(2 sigma^2), with
/// e = (y - x'beta)/sigma.
pub fn efficient_scores_linreg(
    x: &[f64],
    y: f64,
    beta: &[f64],
    sigma2: f64,
    coef: &EffScoreCoef,
) -> (Vec<f64>, f64) {
    assert!(sigma2 > 0.0);
    let sigma = sigma2.sqrt();
    let e = (y - num::dot(x, beta)) / sigma;
    let s = coef.projected_score(e);
    let psi_beta = x.iter().map(|xi| -xi * s / sigma).collect();
    let psi_sigma2 = -(1.0 + e * s) / (2.0 * sigma2);
    (psi_beta, psi_sigma2)
}

/// Where the residual-moment nuisance comes from.
#[derive(Debug, Clone, Copy)]
pub enum MomentSource {
    /// estimate (mu3, mu4) on each fold complement
    EstimateFromResiduals,
    /// pin the moments (e.g. Gaussian (0,3) reduces the fit to OLS)
    Fixed { mu3: f64, mu4: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiparFit {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub beta_se: Vec<f64>,
}

/// Cross-fitted efficient estimating equations for the linear model with
/// unknown error law. Moments are learned on each fold complement; the
/// pooled equation (observation i uses its fold's coefficients) is solved by
/// damped Newton from the OLS start, and the variance is the sandwich.
pub fn semiparam_linreg_fit(
    xs: &[Vec<f64>],
    ys: &[f64],
    k: usize,
    moments: MomentSource,
    rng: &mut RngStream,
) -> Result<SemiparFit> {
    let n = xs.len();
    let p = xs[0].len();
    let plan = fold_split(n, k, rng)?;

    // OLS start on the full sample
    let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
    let beta_full = ols_no_intercept(&refs, ys)?;
    let mut sigma2 = {
        let ss: f64 = (0..n).map(|i| (ys[i] - num::dot(&xs[i], &beta_full)).powi(2)).sum();
        ss / n as f64
    };
    let mut beta = beta_full;

    // per-fold projection coefficients from complement residuals
    let mut fold_coefs = Vec::with_capacity(k);
    for fold in 0..k {
        let coef = match moments {
            MomentSource::Fixed { mu3, mu4 } => EffScoreCoef::from_moments(mu3, mu4)?,
            MomentSource::EstimateFromResiduals => {
                let idx = plan.complement_indices(fold);
                let cx: Vec<&[f64]> = idx.iter().map(|&i| xs[i].as_slice()).collect();
                let cy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
                let b = ols_no_intercept(&cx, &cy)?;
                let resid: Vec<f64> =
                    idx.iter().map(|&i| ys[i] - num::dot(&xs[i], &b)).collect();
                residual_eff_coeffs(&resid)?
            }
        };
        fold_coefs.push(coef);
    }

    // pooled estimating equations F(beta, sigma) = 0
    let eval_f = |beta: &[f64], sigma: f64| -> Vec<f64> {
        let mut f = vec![0.0; p + 1];
        for i in 0..n {
            let coef = &fold_coefs[plan.assignment[i]];
            let e = (ys[i] - num::dot(&xs[i], beta)) / sigma;
            let s = coef.projected_score(e);
            for j in 0..p {
                f[j] += xs[i][j] * s;
            }
            f[p] += 1.0 + e * s;
        }
        f
    };

    let mut sigma = sigma2.sqrt();
    let mut f = eval_f(&beta, sigma);
    let mut fnorm = num::norm2(&f);
    for _ in 0..60 {
        if fnorm < 1e-9 * n as f64 {
            break;
        }
        // analytic Jacobian in (beta, sigma)
        let mut jac = Matrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let coef = &fold_coefs[plan.assignment[i]];
            let e = (ys[i] - num::dot(&xs[i], &beta)) / sigma;
            let s = coef.projected_score(e);
            let sp = coef.projected_score_deriv(e);
            for j in 0..p {
                for l in 0..p {
                    jac.set(j, l, jac.get(j, l) - xs[i][j] * sp * xs[i][l] / sigma);
                }
                jac.set(j, p, jac.get(j, p) - xs[i][j] * sp * e / sigma);
                jac.set(p, j, jac.get(p, j) - (s + e * sp) * xs[i][j] / sigma);
            }
            jac.set(p, p, jac.get(p, p) - (s + e * sp) * e / sigma);
        }
        // Newton step: solve J d = -F (J need not be SPD; use normal equations)
        let jt = jac.transpose();
        let jtj = jt.matmul(&jac);
        let jtf = jt.matvec(&f);
        let step = matrix::ridge_solve(&jtj, &jtf).map_err(|_| Error::SingularDesign)?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand_beta: Vec<f64> =
                (0..p).map(|j| beta[j] - scale * step[j]).collect();
            let cand_sigma = (sigma - scale * step[p]).max(1e-6);
            let cand_f = eval_f(&cand_beta, cand_sigma);
            let cand_norm = num::norm2(&cand_f);
            if cand_norm < fnorm {
                beta = cand_beta;
                sigma = cand_sigma;
                f = cand_f;
                fnorm = cand_norm;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    sigma2 = sigma * sigma;

    // sandwich variance on the stacked efficient scores in theta = (beta, sigma2)
    let psi_at = |theta: &[f64], i: usize| -> Vec<f64> {
        let (b, s2) = (&theta[..p], theta[p].max(1e-12));
        let coef = &fold_coefs[plan.assignment[i]];
        let (pb, ps) = efficient_scores_linreg(&xs[i], ys[i], b, s2, coef);
        let mut v = pb;
        v.push(ps);
        v
    };
    let mut theta: Vec<f64> = beta.clone();
    theta.push(sigma2);
    let q = p + 1;
    let mut v_mat = Matrix::zeros(q, q);
    for i in 0..n {
        let psi = psi_at(&theta, i);
        for r in 0..q {
            for c in 0..q {
                v_mat.set(r, c, v_mat.get(r, c) + psi[r] * psi[c] / n as f64);
            }
        }
    }
    // J by central differences of the mean score
    let mut j_mat = Matrix::zeros(q, q);
    let h = 1e-5;
    for c in 0..q {
        let mut tp = theta.clone();
        tp[c] += h;
        let mut tm = theta.clone();
        tm[c] -= h;
        let mut col = vec![0.0; q];
        for i in 0..n {
            let pp = psi_at(&tp, i);
            let pm = psi_at(&tm, i);
            for r in 0..q {
                col[r] += (pp[r] - pm[r]) / (2.0 * h * n as f64);
            }
        }
        for r in 0..q {
            j_mat.set(r, c, -col[r]);
        }
    }
    let jt = j_mat.transpose();
    let jtj = jt.matmul(&j_mat);
    // J^{-1} V J^{-T} / n computed column by column through the normal equations
    let mut jinv_v = Matrix::zeros(q, q);
    for c in 0..q {
        let col: Vec<f64> = (0..q).map(|r| v_mat.get(r, c)).collect();
        let sol =
            matrix::ridge_solve(&jtj, &jt.matvec(&col)).map_err(|_| Error::SingularDesign)?;
        for r in 0..q {
            jinv_v.set(r, c, sol[r]);
        }
    }
    let mut cov = Matrix::zeros(q, q);
    for r in 0..q {
        let row: Vec<f64> = (0..q).map(|c| jinv_v.get(r, c)).collect();
        let sol =
            matrix::ridge_solve(&jtj, &jt.matvec(&row)).map_err(|_| Error::SingularDesign)?;
        for c in 0..q {
            cov.set(r, c, sol[c] / n as f64);
        }
    }
    let beta_se: Vec<f64> = (0..p).map(|j| cov.get(j, j).max(0.0).sqrt()).collect();

    Ok(SemiparFit { beta, sigma2, beta_se })
}

/// OLS without intercept (the semiparametric model carries its own design).
pub fn ols_no_intercept(xs: &[&[f64]], ys: &[f64]) -> Result<Vec<f64>> {
    let p = xs[0].len();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for (row, &y) in xs.iter().zip(ys) {
        for i in 0..p {
            for j in 0..p {
                gram.set(i, j, gram.get(i, j) + row[i] * row[j]);
            }
            rhs[i] += row[i] * y;
        }
    }
    let f = matrix::cholesky(&gram).map_err(|_| Error::SingularDesign)?;
    matrix::solve_spd(&f, &rhs)
}

/// Fits the mean moment against a symmetric epsilon grid by least squares
/// (quadratic) and returns the linear coefficient: the first-order
/// directional derivative of the moment in the perturbed nuisance direction.
pub fn orthogonality_fd_check<M>(moment_at_eps: M, eps_grid: &[f64]) -> f64
where
    M: Fn(f64) -> f64,
{
    assert!(eps_grid.len() >= 3, "need at least 3 grid points");
    let mean_eps = num::mean(eps_grid);
    assert!(mean_eps.abs() < 1e-12, "grid must be symmetric around 0");
    let ys: Vec<f64> = eps_grid.iter().map(|&e| moment_at_eps(e)).collect();
    let (_, c1, _) = num::quadratic_fit(eps_grid, &ys);
    c1
}

/// Mean AIPW moment over the sample at the given nuisance.
pub fn mean_aipw_moment(data: &[Observation], nu: &FittedNuisance, clip: f64, psi: f64) -> f64 {
    num::mean(&data.iter().map(|o| aipw_score(o, psi, nu, clip)).collect::<Vec<_>>())
}

/// Mean plug-in outcome-regression moment: mean(mu1 - mu0) - psi.
pub fn mean_gformula_moment(data: &[Observation], nu: &FittedNuisance, psi: f64) -> f64 {
    num::mean(&data.iter().map(|o| (nu.mu1)(&o.x) - (nu.mu0)(&o.x) - psi).collect::<Vec<_>>())
}

/// Mean plug-in IPW moment: mean(a y/e - (1-a) y/(1-e)) - psi.
pub fn mean_ipw_moment(data: &[Observation], nu: &FittedNuisance, clip: f64, psi: f64) -> f64 {
    let vals: Vec<f64> = data
        .iter()
        .map(|o| {
            let e = clip_propensity((nu.e)(&o.x), clip);
            let a = o.a as f64;
            a * o.y / e - (1.0 - a) * o.y / (1.0 - e) - psi
        })
        .collect();
    num::mean(&vals)
}
