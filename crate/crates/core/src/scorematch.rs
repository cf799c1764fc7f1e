//! Score-matching estimators and Stein-identity machinery: the quartic
//! exponential-family example, regularized precision-matrix estimation for
//! Gaussian graphical models (with a penalized-likelihood baseline),
//! stochastic divergence estimation, and shrinkage-risk evaluation.

use crate::error::{Error, Result};
use crate::mlp::{self, Activation, Mlp, TrainConfig};
use crate::num::{self, matrix, Matrix, RngStream};

/// Parameters of the unnormalized density exp(t1 x + t2 x^2 + t3 x^4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticTheta {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

/// Model score s(x) = t1 + 2 t2 x + 4 t3 x^3 (the normalizer drops out).
pub fn quartic_score(theta: &QuarticTheta, x: f64) -> f64 {
    theta.t1 + 2.0 * theta.t2 * x + 4.0 * theta.t3 * x.powi(3)
}

/// Empirical score-matching objective for the quartic model:
/// mean of 1/2 s(x)^2 + 2 t2 + 12 t3 x^2.
pub fn quartic_sm_objective(theta: &QuarticTheta, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let total: f64 = samples
        .iter()
        .map(|&x| {
            let s = quartic_score(theta, x);
            0.5 * s * s + 2.0 * theta.t2 + 12.0 * theta.t3 * x * x
        })
        .sum();
    Ok(total / samples.len() as f64)
}

/// Exact minimizer of the quartic objective via the 3x3 normal equations.
///
/// With features phi(x) = (1, 2x, 4x^3), the objective is
/// 1/2 theta' E[phi phi'] theta + theta' (0, 2, 12 E[x^2]),
/// so the minimizer solves E[phi phi'] theta = -(0, 2, 12 E[x^2]).
pub fn quartic_sm_fit(samples: &[f64]) -> Result<QuarticTheta> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len() as f64;
    let mut m = Matrix::zeros(3, 3);
    let mut c = [0.0_f64; 3];
    for &x in samples {
        let phi = [1.0, 2.0 * x, 4.0 * x.powi(3)];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, m.get(i, j) + phi[i] * phi[j] / n);
            }
        }
        c[1] += 2.0 / n;
        c[2] += 12.0 * x * x / n;
    }
    let f = matrix::cholesky(&m).map_err(|_| Error::SingularSystem)?;
    let rhs = [-c[0], -c[1], -c[2]];
    let theta = matrix::solve_spd(&f, &rhs)?;
    Ok(QuarticTheta { t1: theta[0], t2: theta[1], t3: theta[2] })
}

/// Regularized score-matching problem for a Gaussian graphical model.
#[derive(Debug, Clone)]
pub struct GgmProblem {
    /// sample covariance (1/n, centered)
    pub s: Matrix,
    /// l1 weight on off-diagonal entries
    pub lambda: f64,
    /// ridge weight
    pub rho: f64,
    /// iteration cap
    pub max_iters: usize,
}

impl GgmProblem {
    pub fn new(s: Matrix, lambda: f64, rho: f64) -> Self {
        GgmProblem { s, lambda, rho, max_iters: 500 }
    }
}

/// Estimated precision matrix together with the positivity shift applied to
/// the output and the objective trace of the fit.
#[derive(Debug, Clone)]
pub struct GgmEstimate {
    /// symmetric estimate as returned (shift already added to the diagonal)
    pub k: Matrix,
    /// nonnegative diagonal shift that made the minimum eigenvalue positive
    pub shift: f64,
    pub objective_history: Vec<f64>,
}

/// Ridge + l1 score-matching objective:
/// 1/2 tr(KSK) - tr(K) + (rho/2)||K||_F^2 + lambda sum_{i != j} |K_ij|.
pub fn ggm_sm_objective(k: &Matrix, p: &GgmProblem) -> Result<f64> {
    if k.rows() != p.s.rows() || !k.is_square() {
        return Err(Error::DimensionMismatch { expected: p.s.rows(), got: k.rows() });
    }
    let m = p.s.matmul(k);
    // tr(KSK) = <SK, K> elementwise for symmetric S, K
    let tr_ksk: f64 = m.data().iter().zip(k.data()).map(|(a, b)| a * b).sum();
    let tr_k = k.trace();
    let fro2: f64 = k.data().iter().map(|v| v * v).sum();
    let mut l1_off = 0.0;
    let d = k.rows();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                l1_off += k.get(i, j).abs();
            }
        }
    }
    Ok(0.5 * tr_ksk - tr_k + 0.5 * p.rho * fro2 + p.lambda * l1_off)
}

fn soft_threshold_offdiag(k: &mut Matrix, t: f64) {
    if t <= 0.0 {
        return;
    }
    let d = k.rows();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let v = k.get(i, j);
                k.set(i, j, v.signum() * (v.abs() - t).max(0.0));
            }
        }
    }
}

fn spectral_norm_or_frobenius(s: &Matrix) -> f64 {
    matrix::op_norm_sym(s).unwrap_or_else(|_| s.frobenius_norm())
}

/// Armijo-free proximal gradient for the ridge + l1 objective with fixed
/// step 0.9/(||S||_2 + rho): soft-threshold off-diagonals, symmetrize, and
/// shift the output positive definite at the end.
pub fn ggm_sm_prox_fit(p: &GgmProblem) -> GgmEstimate {
    let d = p.s.rows();
    let eta = 0.9 / (spectral_norm_or_frobenius(&p.s) + p.rho);
    let mut k = Matrix::identity(d);
    let mut history = Vec::with_capacity(p.max_iters + 1);
    history.push(ggm_sm_objective(&k, p).expect("dimensions agree"));

    for _ in 0..p.max_iters {
        let m = p.s.matmul(&k);
        // grad of the smooth part: 1/2 (SK + KS) - I + rho K, with KS = (SK)^T
        let mut g = m.add(&m.transpose()).scale(0.5);
        for i in 0..d {
            g.set(i, i, g.get(i, i) - 1.0);
        }
        let mut next = k.sub(&g.add(&k.scale(p.rho)).scale(eta));
        soft_threshold_offdiag(&mut next, eta * p.lambda);
        next.symmetrize();
        let step = next.sub(&k).frobenius_norm();
        k = next;
        history.push(ggm_sm_objective(&k, p).expect("dimensions agree"));
        if step < 1e-9 {
            break;
        }
    }

    let (lambda_min, _) = matrix::eig_extremes(&k).unwrap_or((0.0, 0.0));
    let shift = if lambda_min <= 0.0 { lambda_min.abs() + 1e-8 } else { 0.0 };
    let k_out = if shift > 0.0 { k.add_scaled_identity(shift) } else { k };
    GgmEstimate { k: k_out, shift, objective_history: history }
}

/// Penalized-likelihood objective tr(SK) - log det K + alpha ||K||_{1,off}.
pub fn glasso_objective(k: &Matrix, s: &Matrix, alpha: f64) -> Result<f64> {
    let f = matrix::cholesky(k)?;
    let tr_sk: f64 = s.data().iter().zip(k.data()).map(|(a, b)| a * b).sum();
    let mut l1_off = 0.0;
    let d = k.rows();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                l1_off += k.get(i, j).abs();
            }
        }
    }
    Ok(tr_sk - matrix::logdet_spd(&f) + alpha * l1_off)
}

/// Proximal-gradient graphical lasso with step halving: the iterate stays
/// positive definite (Cholesky gate) and the objective never increases.
pub fn glasso_fit(s: &Matrix, alpha: f64, iters: usize) -> GgmEstimate {
    let d = s.rows();
    let mut k = Matrix::zeros(d, d);
    for i in 0..d {
        k.set(i, i, 1.0 / (s.get(i, i) + alpha).max(1e-8));
    }
    let mut obj = glasso_objective(&k, s, alpha).expect("diagonal start is PD");
    let mut history = vec![obj];
    let mut eta = 1.0 / spectral_norm_or_frobenius(s).max(1e-8);

    for _ in 0..iters {
        let f = matrix::cholesky(&k).expect("iterate stays PD");
        let k_inv = matrix::inverse_spd(&f);
        let grad = s.sub(&k_inv);
        let mut accepted = false;
        let mut step = eta * 1.5;
        for _ in 0..40 {
            let mut cand = k.sub(&grad.scale(step));
            soft_threshold_offdiag(&mut cand, step * alpha);
            cand.symmetrize();
            if let Ok(cand_obj) = glasso_objective(&cand, s, alpha) {
                if cand_obj <= obj + 1e-12 {
                    let delta = cand.sub(&k).frobenius_norm();
                    k = cand;
                    obj = cand_obj;
                    eta = step;
                    history.push(obj);
                    accepted = true;
                    if delta < 1e-7 * k.frobenius_norm().max(1.0) {
                        return GgmEstimate { k, shift: 0.0, objective_history: history };
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    GgmEstimate { k, shift: 0.0, objective_history: history }
}

/// Hutchinson estimate of the divergence of a vector field at x:
/// average over Rademacher probes of eps^T (d field / dx) eps, with the
/// Jacobian-vector products taken by central differences (h = 1e-5).
pub fn hutchinson_divergence<F>(
    field: F,
    x: &[f64],
    probes: usize,
    rng: &mut RngStream,
) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(probes >= 1);
    let h = 1e-5;
    let d = x.len();
    let mut total = 0.0;
    let mut xp = vec![0.0; d];
    let mut xm = vec![0.0; d];
    for _ in 0..probes {
        let eps: Vec<f64> = (0..d).map(|_| rng.rademacher()).collect();
        for i in 0..d {
            xp[i] = x[i] + h * eps[i];
            xm[i] = x[i] - h * eps[i];
        }
        let fp = field(&xp);
        let fm = field(&xm);
        let mut quad = 0.0;
        for i in 0..d {
            quad += eps[i] * (fp[i] - fm[i]) / (2.0 * h);
        }
        total += quad;
    }
    total / probes as f64
}

/// Coordinate-wise central-difference divergence (used by Stein residuals).
pub fn fd_divergence<F>(field: &F, x: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let d = x.len();
    let mut div = 0.0;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        div += (field(&xp)[i] - field(&xm)[i]) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    div
}

/// Sample mean and standard error of the Stein residual
/// s_p(X)^T f(X) + div f(X) over the sample; zero in expectation when the
/// sample follows p.
pub fn stein_residual<S, F>(score: S, f: F, samples: &[Vec<f64>]) -> Result<(f64, f64)>
where
    S: Fn(&[f64]) -> Vec<f64>,
    F: Fn(&[f64]) -> Vec<f64>,
{
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let vals: Vec<f64> = samples
        .iter()
        .map(|x| {
            let s = score(x);
            let fx = f(x);
            num::dot(&s, &fx) + fd_divergence(&f, x, 1e-5)
        })
        .collect();
    let mean = num::mean(&vals);
    let se = if vals.len() > 1 { num::stderr_mean(&vals) } else { 0.0 };
    Ok((mean, se))
}

/// Shrinkage term g used in the risk identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shrinkage {
    /// g = 0 (the plain estimator X, risk exactly d)
    None,
    /// g(x) = -(d-2) x / ||x||^2
    JamesStein,
}

/// Two Monte Carlo evaluations of the risk of X + g(X) for estimating mu
/// under N(mu, I): the direct squared error, and the identity
/// d + E[2 div g + ||g||^2] that never touches mu.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    pub direct: f64,
    pub direct_se: f64,
    pub stein: f64,
    pub stein_se: f64,
}

pub fn shrinkage_risk(
    d: usize,
    mu: &[f64],
    shrink: Shrinkage,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<RiskEstimate> {
    if shrink == Shrinkage::JamesStein && d < 3 {
        return Err(Error::DimensionTooSmall { got: d });
    }
    if mu.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mu.len() });
    }
    let c = (d as f64 - 2.0).max(0.0);
    let mut direct = Vec::with_capacity(n_mc);
    let mut stein = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let x: Vec<f64> = mu.iter().map(|m| m + rng.normal()).collect();
        let r2 = num::dot(&x, &x);
        let (g, div_g, g2) = match shrink {
            Shrinkage::None => (vec![0.0; d], 0.0, 0.0),
            Shrinkage::JamesStein => {
                // div g = -(d-2)^2/||x||^2, ||g||^2 = (d-2)^2/||x||^2
                let g: Vec<f64> = x.iter().map(|xi| -c * xi / r2).collect();
                (g, -c * c / r2, c * c / r2)
            }
        };
        let err: f64 = (0..d).map(|i| (x[i] + g[i] - mu[i]).powi(2)).sum();
        direct.push(err);
        stein.push(d as f64 + 2.0 * div_g + g2);
    }
    Ok(RiskEstimate {
        direct: num::mean(&direct),
        direct_se: num::stderr_mean(&direct),
        stein: num::mean(&stein),
        stein_se: num::stderr_mean(&stein),
    })
}

/// Risk of the James-Stein estimator, evaluated both directly and through
/// the divergence identity.
pub fn james_stein_risk(
    d: usize,
    mu: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<RiskEstimate> {
    shrinkage_risk(d, mu, Shrinkage::JamesStein, n_mc, rng)
}

/// Denoising score matching at a single noise level: perturb y = x + sigma xi
/// and regress a score net on the target (x - y)/sigma^2. The trained net
/// estimates the score of the sigma-smoothed density.
pub fn dsm_fit(
    samples: &[Vec<f64>],
    sigma: f64,
    hidden: &[usize],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Mlp> {
    assert!(sigma > 0.0);
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = samples[0].len();
    let data: Vec<(Vec<f64>, Vec<f64>)> = samples
        .iter()
        .map(|x| {
            let noise: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let y: Vec<f64> = x.iter().zip(&noise).map(|(xi, n)| xi + sigma * n).collect();
            let target: Vec<f64> = noise.iter().map(|n| -n / sigma).collect();
            (y, target)
        })
        .collect();
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(d);
    mlp::train(&data, &sizes, Activation::Tanh, cfg, rng)
}
