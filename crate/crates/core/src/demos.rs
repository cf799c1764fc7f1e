//! Benchmark generators and study recipes shared by the command-line runner
//! and the verification suite. Every generator's formula is committed here.

use crate::diagnostics::w1_1d;
use crate::error::Result;
use crate::flow::{
    cfm_train, conditional_cfm_train, sensitivity_ratio, CfmConfig, FlowModel, OdeConfig, Scheme,
};
use crate::inference::{ols, Observation};
use crate::missing::{
    chained_gaussian_impute, fm_impute_once, fm_imputer_train, mar_mask, rubin_combine,
    RubinResult,
};
use crate::mlp::{self, Activation, Mlp, TrainConfig};
use crate::num::special::sigmoid;
use crate::num::{self, Matrix, RngStream};
use crate::scorematch::{ggm_sm_prox_fit, glasso_fit, GgmProblem};

/// Two-cluster 1-D mixture: 0.5 N(-2, 0.5^2) + 0.5 N(2, 0.5^2).
pub fn two_cluster(n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.bernoulli(0.5) { 2.0 } else { -2.0 } + 0.5 * rng.normal())
        .collect()
}

// ---------------------------------------------------------------------------
// precision-matrix benchmark
// ---------------------------------------------------------------------------

/// Sparse precision matrix: off-diagonal entries +-value with probability
/// `sparsity` (upper triangle, mirrored), then a uniform diagonal shift that
/// moves the minimum eigenvalue up to `margin` (> 0).
pub fn sparse_precision(d: usize, sparsity: f64, value: f64, rng: &mut RngStream) -> Matrix {
    let margin = 0.25;
    let mut k = Matrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.bernoulli(sparsity) {
                let v = if rng.bernoulli(0.5) { value } else { -value };
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
    }
    let (lambda_min, _) = num::eig_extremes(&k).expect("symmetric by construction");
    k.add_scaled_identity(margin - lambda_min)
}

/// Draws n rows from N(0, K^{-1}): X = L^{-T} z with K = L L^T.
pub fn gaussian_from_precision(k: &Matrix, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let f = num::cholesky(k).expect("precision is PD by construction");
    let d = k.rows();
    let l = f.lower();
    (0..n)
        .map(|_| {
            let z = rng.normal_vec(d);
            let mut x = vec![0.0; d];
            for i in (0..d).rev() {
                let mut s = z[i];
                for j in (i + 1)..d {
                    s -= l.get(j, i) * x[j];
                }
                x[i] = s / l.get(i, i);
            }
            x
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GgmBenchConfig {
    pub d: usize,
    pub n: usize,
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub sm_iters: usize,
    pub glasso_iters: usize,
    pub sparsity: f64,
    pub edge_value: f64,
}

impl Default for GgmBenchConfig {
    fn default() -> Self {
        GgmBenchConfig {
            d: 200,
            n: 120,
            lambda: 0.04,
            rho: 0.40,
            alpha: 0.04,
            sm_iters: 400,
            glasso_iters: 150,
            sparsity: 0.02,
            edge_value: 0.3,
        }
    }
}

pub struct GgmRepResult {
    pub rmse_mle: f64,
    pub ct_mle: f64,
    pub rmse_sm: f64,
    pub ct_sm: f64,
}

fn entrywise_rmse(a: &Matrix, b: &Matrix) -> f64 {
    let d2 = (a.rows() * a.cols()) as f64;
    (a.sub(b).frobenius_norm().powi(2) / d2).sqrt()
}

/// One benchmark replicate: generate, fit both estimators, time them.
pub fn ggm_bench_replicate(cfg: &GgmBenchConfig, seed: u64, rep: u64) -> GgmRepResult {
    let mut rng = RngStream::new(seed, 10 + rep);
    let k_true = sparse_precision(cfg.d, cfg.sparsity, cfg.edge_value, &mut rng);
    let rows = gaussian_from_precision(&k_true, cfg.n, &mut rng);
    let s = num::sample_covariance(&rows);

    let t0 = std::time::Instant::now();
    let problem = GgmProblem {
        s: s.clone(),
        lambda: cfg.lambda,
        rho: cfg.rho,
        max_iters: cfg.sm_iters,
    };
    let est_sm = ggm_sm_prox_fit(&problem);
    let ct_sm = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let est_mle = glasso_fit(&s, cfg.alpha, cfg.glasso_iters);
    let ct_mle = t1.elapsed().as_secs_f64();

    GgmRepResult {
        rmse_mle: entrywise_rmse(&est_mle.k, &k_true),
        ct_mle,
        rmse_sm: entrywise_rmse(&est_sm.k, &k_true),
        ct_sm,
    }
}

// ---------------------------------------------------------------------------
// imputation demo
// ---------------------------------------------------------------------------

/// Standard deviation of the latent bimodal column below (offset 1.2, core
/// noise 0.3, symmetric weight): Var = 1.2^2 + 0.3^2 = 1.53.
pub const MI_X3_SD: f64 = 1.236931687685298; // sqrt(1.53)

/// Regression truths of the imputation demo on the unit-variance scale.
pub const MI_BETA: [f64; 4] = [0.0, 0.4971, 0.7892, 1.4505];

/// Residual scale of the analysis regression in the imputation demo.
pub const MI_SIGMA: f64 = 1.25;

/// MAR missingness weights on (X1, X2) tuned so P(M3 = 1) is about 0.359.
pub const MI_MASK_WEIGHTS: [f64; 2] = [0.7, -0.5];
pub const MI_MASK_INTERCEPT: f64 = -0.66;

/// Mode weight of the imputation demo at covariates (x1, x2).
pub fn mi_mode_weight(x1: f64, x2: f64) -> f64 {
    sigmoid(0.9 * x1 - 0.6 * x2)
}

/// One row of the imputation demo: X1, X2 ~ N(0,1) independently;
/// X3 = ((2D - 1) 1.2 + 0.3 Z)/sd with D ~ Bernoulli(sigmoid(0.9 X1 - 0.6 X2))
/// scaled to unit variance; Y = 0.4971 X1 + 0.7892 X2 + 1.4505 X3 + 1.25 eps.
pub fn mi_demo_row(rng: &mut RngStream) -> [f64; 4] {
    let x1 = rng.normal();
    let x2 = rng.normal();
    let w = mi_mode_weight(x1, x2);
    let mode = if rng.bernoulli(w) { 1.0 } else { -1.0 };
    let x3 = (mode * 1.2 + 0.3 * rng.normal()) / MI_X3_SD;
    let y = MI_BETA[0] + MI_BETA[1] * x1 + MI_BETA[2] * x2 + MI_BETA[3] * x3
        + MI_SIGMA * rng.normal();
    [x1, x2, x3, y]
}

/// Data matrix (X1, X2, X3, Y) for the imputation demo.
pub fn mi_demo_matrix(n: usize, rng: &mut RngStream) -> Matrix {
    let mut m = Matrix::zeros(n, 4);
    for i in 0..n {
        let row = mi_demo_row(rng);
        for j in 0..4 {
            m.set(i, j, row[j]);
        }
    }
    m
}

/// Complete-data analysis of the imputation demo: OLS of Y on (1, X1, X2, X3)
/// with the classical covariance estimate.
pub fn mi_analysis(completed: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = completed.rows();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![completed.get(i, 0), completed.get(i, 1), completed.get(i, 2)])
        .collect();
    let ys: Vec<f64> = (0..n).map(|i| completed.get(i, 3)).collect();
    let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
    let beta = ols(&refs, &ys)?;
    let p = 4;
    let mut gram = Matrix::zeros(p, p);
    let mut rss = 0.0;
    for i in 0..n {
        let phi = [1.0, xs[i][0], xs[i][1], xs[i][2]];
        for r in 0..p {
            for c in 0..p {
                gram.set(r, c, gram.get(r, c) + phi[r] * phi[c]);
            }
        }
        let pred = beta[0] + beta[1] * xs[i][0] + beta[2] * xs[i][1] + beta[3] * xs[i][2];
        rss += (ys[i] - pred).powi(2);
    }
    let sigma2 = rss / (n - p) as f64;
    let fct = num::cholesky(&gram)?;
    Ok((beta, num::inverse_spd(&fct).scale(sigma2)))
}

#[derive(Debug, Clone)]
pub struct MiStudyConfig {
    pub n: usize,
    pub imputations: usize,
    pub epochs: usize,
    pub ode_steps: usize,
}

impl Default for MiStudyConfig {
    fn default() -> Self {
        MiStudyConfig { n: 3000, imputations: 12, epochs: 60, ode_steps: 48 }
    }
}

pub struct MiOutcome {
    pub rate: f64,
    pub truth_missing: Vec<f64>,
    pub flow_pooled: Vec<f64>,
    pub chained_pooled: Vec<f64>,
    pub w1_flow: f64,
    pub w1_chained: f64,
    pub rmse_flow: f64,
    pub rmse_chained: f64,
    pub brier_flow: f64,
    pub brier_chained: f64,
    pub rubin_flow: RubinResult,
    pub rubin_chained: RubinResult,
    /// pooled flow-imputation mass in the (lower, upper) mode bins among
    /// missing rows whose true mode weight lies in [0.35, 0.65]
    pub flow_mode_mass: (f64, f64),
}

/// Runs the two-engine imputation study end to end.
pub fn run_mi_study(cfg: &MiStudyConfig, seed: u64) -> Result<MiOutcome> {
    let mut rng = RngStream::new(seed, 0);
    let full = mi_demo_matrix(cfg.n, &mut rng);
    let md = mar_mask(
        &full,
        2,
        &[0, 1],
        &MI_MASK_WEIGHTS,
        MI_MASK_INTERCEPT,
        &mut rng.substream(1),
    )?;
    let rate = md.missing_rate(2);
    let missing_rows = md.missing_rows_in(2);
    let truth_missing: Vec<f64> = missing_rows.iter().map(|&i| full.get(i, 2)).collect();

    let fm_cfg = CfmConfig {
        train: TrainConfig {
            epochs: cfg.epochs,
            batch_size: 128,
            step_size: 2e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let ode = OdeConfig::forward(cfg.ode_steps, Scheme::Euler);
    let model = fm_imputer_train(&md, &fm_cfg, &mut rng.substream(2))?;

    let m = missing_rows.len();
    let mut flow_pooled = Vec::with_capacity(m * cfg.imputations);
    let mut flow_means = vec![0.0; m];
    let mut flow_ests = Vec::new();
    let mut flow_vars = Vec::new();
    for k in 0..cfg.imputations {
        let mut draw_rng = rng.substream(1000 + k as u64);
        let fills = fm_impute_once(&md, &model, &ode, &mut draw_rng)?;
        for (pos, ((_, _), v)) in fills.iter().enumerate() {
            flow_pooled.push(*v);
            flow_means[pos] += v / cfg.imputations as f64;
        }
        let completed = md.completed_with(&fills);
        let (theta, v) = mi_analysis(&completed)?;
        flow_ests.push(theta);
        flow_vars.push(v);
    }

    let mut chained_pooled = Vec::with_capacity(m * cfg.imputations);
    let mut chained_means = vec![0.0; m];
    let mut chained_ests = Vec::new();
    let mut chained_vars = Vec::new();
    for k in 0..cfg.imputations {
        let mut draw_rng = rng.substream(2000 + k as u64);
        let completed = chained_gaussian_impute(&md, 5, &mut draw_rng)?;
        for (pos, &i) in missing_rows.iter().enumerate() {
            let v = completed.get(i, 2);
            chained_pooled.push(v);
            chained_means[pos] += v / cfg.imputations as f64;
        }
        let (theta, v) = mi_analysis(&completed)?;
        chained_ests.push(theta);
        chained_vars.push(v);
    }

    let rmse = |means: &[f64]| -> f64 {
        (means.iter().zip(&truth_missing).map(|(a, t)| (a - t) * (a - t)).sum::<f64>()
            / means.len() as f64)
            .sqrt()
    };
    let brier = |pooled: &[f64]| -> f64 {
        let k = cfg.imputations;
        let mut score = 0.0;
        for (pos, &t) in truth_missing.iter().enumerate() {
            let mut p_pos = 0.0;
            for draw in 0..k {
                if pooled[draw * m + pos] > 0.0 {
                    p_pos += 1.0 / k as f64;
                }
            }
            let label = if t > 0.0 { 1.0 } else { 0.0 };
            score += (p_pos - label) * (p_pos - label);
        }
        score / m as f64
    };

    let balanced: Vec<usize> = missing_rows
        .iter()
        .enumerate()
        .filter(|(_, &i)| {
            (0.35..=0.65).contains(&mi_mode_weight(full.get(i, 0), full.get(i, 1)))
        })
        .map(|(pos, _)| pos)
        .collect();
    let mut lower_mass = 0.0;
    let mut upper_mass = 0.0;
    let mut count = 0.0_f64;
    for draw in 0..cfg.imputations {
        for &pos in &balanced {
            if flow_pooled[draw * m + pos] < 0.0 {
                lower_mass += 1.0;
            } else {
                upper_mass += 1.0;
            }
            count += 1.0;
        }
    }

    Ok(MiOutcome {
        rate,
        w1_flow: w1_1d(&flow_pooled, &truth_missing)?,
        w1_chained: w1_1d(&chained_pooled, &truth_missing)?,
        rmse_flow: rmse(&flow_means),
        rmse_chained: rmse(&chained_means),
        brier_flow: brier(&flow_pooled),
        brier_chained: brier(&chained_pooled),
        rubin_flow: rubin_combine(&flow_ests, &flow_vars)?,
        rubin_chained: rubin_combine(&chained_ests, &chained_vars)?,
        truth_missing,
        flow_pooled,
        chained_pooled,
        flow_mode_mass: (lower_mass / count.max(1.0), upper_mass / count.max(1.0)),
    })
}

// ---------------------------------------------------------------------------
// causal interventional-distribution demo
// ---------------------------------------------------------------------------

/// Constant treatment shift of the causal demo.
pub const CAUSAL_TAU: f64 = 1.0;
/// Distributional-effect strength.
pub const CAUSAL_KAPPA: f64 = 1.6;

/// Nonlinear baseline mean (d = 10):
/// f(x) = sin(1.2 x1) + 0.6 (x2^2 - 1) + 0.5 x3 x4 + 0.3 cos(x5 x6)
///        - 0.2 x7 + 0.15 sin(x8 + x9).
pub fn causal_f(x: &[f64]) -> f64 {
    (1.2 * x[0]).sin() + 0.6 * (x[1] * x[1] - 1.0) + 0.5 * x[2] * x[3]
        + 0.3 * (x[4] * x[5]).cos()
        - 0.2 * x[6]
        + 0.15 * (x[7] + x[8]).sin()
}

/// Heteroskedastic scale
/// s(x, a) = (0.7 + 0.25 sigmoid(0.9 x2 - 0.6 x3) + 0.15 |x4|) exp(0.25 kappa a).
pub fn causal_scale(x: &[f64], a: f64) -> f64 {
    (0.7 + 0.25 * sigmoid(0.9 * x[1] - 0.6 * x[2]) + 0.15 * x[3].abs())
        * (0.25 * CAUSAL_KAPPA * a).exp()
}

/// Mixture weight of the heavy right-tail component:
/// p(x, a) = sigmoid(0.9 x1 - 0.7 x2 + 0.3 sin(x3) + 1.4 kappa a).
pub fn causal_tail_weight(x: &[f64], a: f64) -> f64 {
    sigmoid(0.9 * x[0] - 0.7 * x[1] + 0.3 * x[2].sin() + 1.4 * CAUSAL_KAPPA * a)
}

/// Error draw eps(x, a) = 0.75 xi + (0.15 + 0.9 Z) U with xi ~ N(0,1),
/// U ~ Exp(1) - 1, Z ~ Bernoulli(p(x, a)).
pub fn causal_error(x: &[f64], a: f64, rng: &mut RngStream) -> f64 {
    let z = rng.bernoulli(causal_tail_weight(x, a));
    let xi = rng.normal();
    let u = rng.exp1() - 1.0;
    0.75 * xi + (0.15 + if z { 0.9 } else { 0.0 }) * u
}

/// Potential outcome Y(a) = f(x) + tau a + s(x, a) eps(x, a).
pub fn causal_outcome(x: &[f64], a: f64, rng: &mut RngStream) -> f64 {
    causal_f(x) + CAUSAL_TAU * a + causal_scale(x, a) * causal_error(x, a, rng)
}

/// Propensity with comfortable overlap: e(x) = sigmoid(0.35 x1 - 0.3 x2 + 0.2 x3);
/// the linear index has sd ~ 0.5 so e stays within [0.1, 0.9] for essentially
/// every draw of X ~ N(0, I).
pub fn causal_propensity(x: &[f64]) -> f64 {
    sigmoid(0.35 * x[0] - 0.3 * x[1] + 0.2 * x[2])
}

/// Observational sample.
pub fn causal_sample(n: usize, d: usize, rng: &mut RngStream) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let x = rng.normal_vec(d);
            let a = u8::from(rng.bernoulli(causal_propensity(&x)));
            let y = causal_outcome(&x, a as f64, rng);
            Observation::new(x, a, y)
        })
        .collect()
}

/// Interventional draws from the true mechanism: X ~ N(0, I), Y(a).
pub fn causal_truth_draws(l: usize, d: usize, a: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..l)
        .map(|_| {
            let x = rng.normal_vec(d);
            causal_outcome(&x, a, rng)
        })
        .collect()
}

/// Randomized-design linear DGP for the ATE coverage study:
/// A ~ Bernoulli(1/2), Y = 1 + 0.8 x1 - 0.5 x2 + 0.3 x3 + tau A + 0.7 eps.
pub fn ate_coverage_sample(n: usize, tau: f64, rng: &mut RngStream) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let x = rng.normal_vec(3);
            let a = u8::from(rng.bernoulli(0.5));
            let mu = 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2];
            let y = mu + tau * a as f64 + 0.7 * rng.normal();
            Observation::new(x, a, y)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CausalDemoConfig {
    pub n: usize,
    pub d: usize,
    pub l_samples: usize,
    pub l_truth: usize,
    pub epochs_flow: usize,
    pub epochs_baseline: usize,
    pub ode_steps: usize,
}

impl Default for CausalDemoConfig {
    fn default() -> Self {
        CausalDemoConfig {
            n: 8000,
            d: 10,
            l_samples: 8000,
            l_truth: 40_000,
            epochs_flow: 120,
            epochs_baseline: 120,
            ode_steps: 24,
        }
    }
}

pub struct ArmEstimates {
    pub truth: Vec<f64>,
    pub baseline: Vec<f64>,
    pub flow: Vec<f64>,
}

pub struct CausalDemoResult {
    pub arms: [ArmEstimates; 2],
    pub n_train: usize,
    /// observed treated fraction of the training sample
    pub treated_fraction: f64,
}

impl CausalDemoResult {
    pub fn ate(&self, pick: fn(&ArmEstimates) -> &Vec<f64>) -> f64 {
        num::mean(pick(&self.arms[1])) - num::mean(pick(&self.arms[0]))
    }

    /// Standard error of an ATE estimate: Monte Carlo draws plus first-order
    /// estimation noise. The estimation term weights each arm's variance by
    /// the inverse arm frequency, since only n P(A = a) observations inform
    /// that arm's conditional law.
    pub fn ate_se(&self, pick: fn(&ArmEstimates) -> &Vec<f64>) -> f64 {
        let v1 = num::variance(pick(&self.arms[1]));
        let v0 = num::variance(pick(&self.arms[0]));
        let l1 = pick(&self.arms[1]).len() as f64;
        let l0 = pick(&self.arms[0]).len() as f64;
        let p = self.treated_fraction.clamp(0.05, 0.95);
        let est = (v1 / p + v0 / (1.0 - p)) / self.n_train as f64;
        (v1 / l1 + v0 / l0 + est).sqrt()
    }
}

/// Baseline estimator: per-arm mean regression and log-scale regression on
/// squared residuals, with ONE pooled bucket of standardized residuals
/// (Y - mu_a(X))/s_a(X) shared by both arms at draw time. The pooling is the
/// deliberate weak point: it erases treatment-dependent error shape.
pub struct ResidualBaseline {
    mu: [Mlp; 2],
    log_scale: [Mlp; 2],
    residuals: Vec<f64>,
}

impl ResidualBaseline {
    pub fn fit(data: &[Observation], epochs: usize, rng: &mut RngStream) -> Result<Self> {
        let d = data[0].x.len();
        let cfg = TrainConfig {
            epochs,
            batch_size: 64,
            step_size: 3e-3,
            ..Default::default()
        };
        let mut mu = Vec::new();
        let mut log_scale = Vec::new();
        let mut residuals = Vec::new();
        for arm in 0..2u8 {
            let rows: Vec<&Observation> = data.iter().filter(|o| o.a == arm).collect();
            let mean_data: Vec<(Vec<f64>, Vec<f64>)> =
                rows.iter().map(|o| (o.x.clone(), vec![o.y])).collect();
            let mu_net = mlp::train(
                &mean_data,
                &[d, 64, 64, 1],
                Activation::Tanh,
                &cfg,
                &mut rng.substream(10 + arm as u64),
            )?;
            let scale_data: Vec<(Vec<f64>, Vec<f64>)> = rows
                .iter()
                .map(|o| {
                    let r = o.y - mu_net.forward(&o.x)?[0];
                    Ok((o.x.clone(), vec![(r * r + 1e-6).ln()]))
                })
                .collect::<Result<_>>()?;
            let scale_net = mlp::train(
                &scale_data,
                &[d, 64, 1],
                Activation::Tanh,
                &cfg,
                &mut rng.substream(20 + arm as u64),
            )?;
            for o in &rows {
                let m = mu_net.forward(&o.x)?[0];
                let s = (scale_net.forward(&o.x)?[0] / 2.0).exp().max(1e-4);
                residuals.push((o.y - m) / s);
            }
            mu.push(mu_net);
            log_scale.push(scale_net);
        }
        Ok(ResidualBaseline {
            mu: [mu.remove(0), mu.remove(0)],
            log_scale: [log_scale.remove(0), log_scale.remove(0)],
            residuals,
        })
    }

    pub fn draw(&self, x: &[f64], arm: usize, rng: &mut RngStream) -> Result<f64> {
        let m = self.mu[arm].forward(x)?[0];
        let s = (self.log_scale[arm].forward(x)?[0] / 2.0).exp().max(1e-4);
        let eps = self.residuals[rng.below(self.residuals.len())];
        Ok(m + s * eps)
    }
}

/// Trains a conditional flow sampler for p(y | a, x) on the observational
/// sample. The condition vector is [2a - 1, x]: the symmetric treatment
/// feature keeps both arm responses inside one shared net.
pub fn causal_flow_sampler(
    data: &[Observation],
    epochs: usize,
    rng: &mut RngStream,
) -> Result<FlowModel> {
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = data
        .iter()
        .map(|o| {
            let mut c = Vec::with_capacity(o.x.len() + 1);
            c.push(2.0 * o.a as f64 - 1.0);
            c.extend_from_slice(&o.x);
            (c, vec![o.y])
        })
        .collect();
    let fm_cfg = CfmConfig {
        train: TrainConfig {
            epochs,
            batch_size: 64,
            step_size: 3e-3,
            ..Default::default()
        },
        hidden: vec![80, 80],
        ..Default::default()
    };
    conditional_cfm_train(&pairs, &fm_cfg, rng)
}

/// Full interventional-distribution comparison: truth benchmark, residual
/// baseline, and conditional flow sampler for both arms.
pub fn run_causal_demo(cfg: &CausalDemoConfig, seed: u64) -> Result<CausalDemoResult> {
    let mut rng = RngStream::new(seed, 0);
    let data = causal_sample(cfg.n, cfg.d, &mut rng);

    let mut truth_rng = rng.substream(1);
    let truth = [
        causal_truth_draws(cfg.l_truth, cfg.d, 0.0, &mut truth_rng),
        causal_truth_draws(cfg.l_truth, cfg.d, 1.0, &mut truth_rng),
    ];

    let mut base_rng = rng.substream(2);
    let baseline = ResidualBaseline::fit(&data, cfg.epochs_baseline, &mut base_rng)?;
    let mut base_draws = [Vec::new(), Vec::new()];
    for arm in 0..2 {
        let mut draw_rng = rng.substream(3 + arm as u64);
        for _ in 0..cfg.l_samples {
            let x = draw_rng.normal_vec(cfg.d);
            base_draws[arm].push(baseline.draw(&x, arm, &mut draw_rng)?);
        }
    }

    let mut flow_rng = rng.substream(5);
    let flow = causal_flow_sampler(&data, cfg.epochs_flow, &mut flow_rng)?;
    let ode = OdeConfig::forward(cfg.ode_steps, Scheme::Rk4);
    let mut flow_draws = [Vec::new(), Vec::new()];
    for arm in 0..2 {
        let mut draw_rng = rng.substream(7 + arm as u64);
        let conds: Vec<Vec<f64>> = (0..cfg.l_samples)
            .map(|_| {
                let mut c = Vec::with_capacity(cfg.d + 1);
                c.push(2.0 * arm as f64 - 1.0);
                c.extend(draw_rng.normal_vec(cfg.d));
                c
            })
            .collect();
        let ys = flow.sample_conditional_each(&conds, &ode, &mut draw_rng)?;
        flow_draws[arm] = ys.iter().map(|y| y[0]).collect();
    }

    let [b0, b1] = base_draws;
    let [f0, f1] = flow_draws;
    let [t0, t1] = truth;
    let treated = data.iter().filter(|o| o.a == 1).count() as f64 / data.len() as f64;
    Ok(CausalDemoResult {
        arms: [
            ArmEstimates { truth: t0, baseline: b0, flow: f0 },
            ArmEstimates { truth: t1, baseline: b1, flow: f1 },
        ],
        n_train: cfg.n,
        treated_fraction: treated,
    })
}

// ---------------------------------------------------------------------------
// stability map
// ---------------------------------------------------------------------------

/// 2-D blob-plus-outliers sample: centered Gaussian main mass with a small
/// fraction of far outliers at (4, 4).
pub fn outlier_blob(n: usize, outlier_frac: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            if rng.bernoulli(outlier_frac) {
                vec![4.0 + 0.2 * rng.normal(), 4.0 + 0.2 * rng.normal()]
            } else {
                vec![rng.normal() * 0.7, rng.normal() * 0.7]
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StabilityMapConfig {
    pub n: usize,
    pub outlier_frac: f64,
    pub epochs: usize,
    pub spectral_cap: f64,
    pub grid: usize,
    pub grid_halfwidth: f64,
    pub probes: usize,
    pub ode_steps: usize,
    pub delta: f64,
}

impl Default for StabilityMapConfig {
    fn default() -> Self {
        StabilityMapConfig {
            n: 1500,
            outlier_frac: 0.03,
            epochs: 40,
            spectral_cap: 1.0,
            grid: 12,
            grid_halfwidth: 2.5,
            probes: 5,
            ode_steps: 60,
            delta: 1e-3,
        }
    }
}

pub struct StabilityMap {
    /// (x, y, ratio_standard, ratio_clamped) per grid point
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub max_standard: f64,
    pub max_clamped: f64,
}

/// Trains unclamped and spectrally clamped velocity fields on outlier data
/// and maps the sensitivity ratio of both generation flows over a grid.
pub fn stability_map(cfg: &StabilityMapConfig, seed: u64) -> Result<StabilityMap> {
    let mut rng = RngStream::new(seed, 0);
    let data = outlier_blob(cfg.n, cfg.outlier_frac, &mut rng);

    let base_train = TrainConfig {
        epochs: cfg.epochs,
        batch_size: 128,
        step_size: 2e-3,
        ..Default::default()
    };
    let standard = cfm_train(
        &data,
        &CfmConfig { train: base_train.clone(), ..Default::default() },
        &mut rng.substream(1),
    )?;
    let clamped = cfm_train(
        &data,
        &CfmConfig {
            train: TrainConfig { spectral_cap: Some(cfg.spectral_cap), ..base_train },
            ..Default::default()
        },
        &mut rng.substream(2),
    )?;

    let ode = OdeConfig::forward(cfg.ode_steps, Scheme::Rk4);
    let mut rows = Vec::new();
    let mut max_std = 0.0_f64;
    let mut max_clamp = 0.0_f64;
    let h = cfg.grid_halfwidth;
    for gy in 0..cfg.grid {
        for gx in 0..cfg.grid {
            let x = -h + 2.0 * h * (gx as f64 + 0.5) / cfg.grid as f64;
            let y = -h + 2.0 * h * (gy as f64 + 0.5) / cfg.grid as f64;
            let cell = (gy * cfg.grid + gx) as u64;
            let r_std = sensitivity_ratio(
                standard.field(&[]),
                &[x, y],
                cfg.delta,
                &ode,
                cfg.probes,
                &mut rng.substream(100 + cell),
            )?;
            let r_clamp = sensitivity_ratio(
                clamped.field(&[]),
                &[x, y],
                cfg.delta,
                &ode,
                cfg.probes,
                &mut rng.substream(10_000 + cell),
            )?;
            max_std = max_std.max(r_std);
            max_clamp = max_clamp.max(r_clamp);
            rows.push((x, y, r_std, r_clamp));
        }
    }
    Ok(StabilityMap { rows, max_standard: max_std, max_clamped: max_clamp })
}
