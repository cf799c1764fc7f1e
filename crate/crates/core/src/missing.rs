//! Missing data: MAR mask generation, flow-based and chained-Gaussian
//! imputation engines, Rubin combination, and worst-case exponential-tilting
//! sensitivity analysis for the MNAR direction.

use crate::error::{Error, Result};
use crate::flow::{conditional_cfm_train, CfmConfig, FlowModel, OdeConfig};
use crate::num::{self, matrix, special, Matrix, RngStream};

/// Data matrix with a missingness mask (1 = missing). Masked cells hold NaN
/// so any learner that accidentally reads one poisons its output.
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    x: Matrix,
    mask: Vec<bool>,
}

impl MaskedDataset {
    pub fn new(x: Matrix, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), x.rows() * x.cols());
        let mut x = x;
        for (i, &m) in mask.iter().enumerate() {
            if m {
                x.data_mut()[i] = f64::NAN;
            }
        }
        MaskedDataset { x, mask }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d() + j]
    }

    /// Observed value; panics if the cell is masked.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(!self.is_missing(i, j), "read of masked cell ({i},{j})");
        self.x.get(i, j)
    }

    /// Columns that contain at least one missing cell.
    pub fn incomplete_columns(&self) -> Vec<usize> {
        (0..self.d())
            .filter(|&j| (0..self.n()).any(|i| self.is_missing(i, j)))
            .collect()
    }

    /// Rows with no missing cells.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| (0..self.d()).all(|j| !self.is_missing(i, j)))
            .collect()
    }

    pub fn missing_rows_in(&self, col: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_missing(i, col)).collect()
    }

    pub fn missing_rate(&self, col: usize) -> f64 {
        self.missing_rows_in(col).len() as f64 / self.n() as f64
    }

    /// Copy with masked cells filled from `fills`, keyed by (row, col).
    pub fn completed_with(&self, fills: &[((usize, usize), f64)]) -> Matrix {
        let mut out = self.x.clone();
        for &((i, j), v) in fills {
            out.set(i, j, v);
        }
        debug_assert!(out.all_finite(), "all masked cells must be filled");
        out
    }
}

/// Imposes MAR missingness on one column: P(M_j = 1 | x_obs) is logistic in
/// the listed fully observed columns.
pub fn mar_mask(
    x: &Matrix,
    target_col: usize,
    weight_cols: &[usize],
    weights: &[f64],
    intercept: f64,
    rng: &mut RngStream,
) -> Result<MaskedDataset> {
    let d = x.cols();
    if target_col >= d
        || weight_cols.len() != weights.len()
        || weight_cols.iter().any(|&c| c >= d || c == target_col)
    {
        return Err(Error::BadColumns);
    }
    let n = x.rows();
    let mut mask = vec![false; n * d];
    for i in 0..n {
        let lin: f64 = weight_cols
            .iter()
            .zip(weights)
            .map(|(&c, &w)| w * x.get(i, c))
            .sum::<f64>()
            + intercept;
        if rng.bernoulli(special::sigmoid(lin)) {
            mask[i * d + target_col] = true;
        }
    }
    Ok(MaskedDataset::new(x.clone(), mask))
}

/// Trains a conditional flow for the single incomplete column, conditioning
/// on all other columns, using only fully complete rows.
pub fn fm_imputer_train(
    md: &MaskedDataset,
    cfg: &CfmConfig,
    rng: &mut RngStream,
) -> Result<FlowModel> {
    let cols = md.incomplete_columns();
    assert_eq!(cols.len(), 1, "flow engine handles a single incomplete column");
    let target = cols[0];
    let complete = md.complete_rows();
    if complete.len() < 50 {
        return Err(Error::TooFewComplete { col: target, need: 50, got: complete.len() });
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = complete
        .iter()
        .map(|&i| {
            let cond: Vec<f64> =
                (0..md.d()).filter(|&j| j != target).map(|j| md.value(i, j)).collect();
            (cond, vec![md.value(i, target)])
        })
        .collect();
    conditional_cfm_train(&pairs, cfg, rng)
}

/// One set of flow-based imputations for the masked cells of the single
/// incomplete column.
pub fn fm_impute_once(
    md: &MaskedDataset,
    model: &FlowModel,
    ode: &OdeConfig,
    rng: &mut RngStream,
) -> Result<Vec<((usize, usize), f64)>> {
    let target = md.incomplete_columns()[0];
    let rows = md.missing_rows_in(target);
    let mut fills = Vec::with_capacity(rows.len());
    for &i in &rows {
        let cond: Vec<f64> =
            (0..md.d()).filter(|&j| j != target).map(|j| md.value(i, j)).collect();
        let draw = model.sample_conditional(&cond, 1, ode, rng)?;
        fills.push(((i, target), draw[0][0]));
    }
    Ok(fills)
}

/// Chained-equations imputation with Bayesian linear-Gaussian conditionals:
/// per incomplete column, regress on all other columns over rows where the
/// target is observed, draw (sigma^2, beta) from the normal-inverse-chi-squared
/// posterior, then draw the missing cells. `sweeps` full passes.
pub fn chained_gaussian_impute(
    md: &MaskedDataset,
    sweeps: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    let n = md.n();
    let d = md.d();
    let incomplete = md.incomplete_columns();
    for &j in &incomplete {
        let obs = n - md.missing_rows_in(j).len();
        if obs < 50 {
            return Err(Error::TooFewComplete { col: j, need: 50, got: obs });
        }
    }
    // start from column-mean fills
    let mut filled = md.x().clone();
    for &j in &incomplete {
        let obs: Vec<f64> = (0..n)
            .filter(|&i| !md.is_missing(i, j))
            .map(|i| md.value(i, j))
            .collect();
        let m = num::mean(&obs);
        for i in 0..n {
            if md.is_missing(i, j) {
                filled.set(i, j, m);
            }
        }
    }
    if incomplete.is_empty() {
        return Ok(filled);
    }

    for _ in 0..sweeps {
        for &j in &incomplete {
            let obs_rows: Vec<usize> = (0..n).filter(|&i| !md.is_missing(i, j)).collect();
            let p = d; // intercept + d-1 predictors
            let mut gram = Matrix::zeros(p, p);
            let mut rhs = vec![0.0; p];
            let phi_row = |fill: &Matrix, i: usize| -> Vec<f64> {
                let mut phi = Vec::with_capacity(p);
                phi.push(1.0);
                for c in 0..d {
                    if c != j {
                        phi.push(fill.get(i, c));
                    }
                }
                phi
            };
            for &i in &obs_rows {
                let phi = phi_row(&filled, i);
                let y = md.value(i, j);
                for r in 0..p {
                    for c in 0..p {
                        gram.set(r, c, gram.get(r, c) + phi[r] * phi[c]);
                    }
                    rhs[r] += phi[r] * y;
                }
            }
            let gram = gram.add_scaled_identity(1e-8);
            let fct = matrix::cholesky(&gram).map_err(|_| Error::SingularDesign)?;
            let beta_hat = matrix::solve_spd(&fct, &rhs)?;
            let mut rss = 0.0;
            for &i in &obs_rows {
                let phi = phi_row(&filled, i);
                rss += (md.value(i, j) - num::dot(&phi, &beta_hat)).powi(2);
            }
            let dof = (obs_rows.len() as f64 - p as f64).max(1.0);
            // sigma^2 | data ~ RSS / chi^2_dof
            let chi2: f64 = (0..dof as usize).map(|_| rng.normal().powi(2)).sum();
            let sigma2 = rss / chi2.max(1e-12);
            // beta | sigma^2 ~ N(beta_hat, sigma^2 (X'X)^{-1}); draw via the factor
            let z = rng.normal_vec(p);
            // solve L^T w = z so that w has covariance (X'X)^{-1}
            let l = fct.lower();
            let mut w = vec![0.0; p];
            for r in (0..p).rev() {
                let mut s = z[r];
                for c in (r + 1)..p {
                    s -= l.get(c, r) * w[c];
                }
                w[r] = s / l.get(r, r);
            }
            let beta_draw: Vec<f64> =
                (0..p).map(|r| beta_hat[r] + sigma2.sqrt() * w[r]).collect();
            for i in 0..n {
                if md.is_missing(i, j) {
                    let phi = phi_row(&filled, i);
                    let mean = num::dot(&phi, &beta_draw);
                    filled.set(i, j, mean + sigma2.sqrt() * rng.normal());
                }
            }
        }
    }
    Ok(filled)
}

impl MaskedDataset {
    pub fn x(&self) -> &Matrix {
        &self.x
    }
}

/// Rubin combination of K point estimates and their covariance estimates.
#[derive(Debug, Clone)]
pub struct RubinResult {
    pub theta_bar: Vec<f64>,
    pub within: Matrix,
    pub between: Matrix,
    pub total: Matrix,
    pub k: usize,
}

impl RubinResult {
    /// Standard errors from the diagonal of the total variance.
    pub fn se(&self) -> Vec<f64> {
        (0..self.theta_bar.len()).map(|j| self.total.get(j, j).max(0.0).sqrt()).collect()
    }
}

/// theta_bar = mean(theta_k); W = mean(V_k);
/// B = sum (theta_k - bar)(theta_k - bar)' / (K-1); T = W + (1 + 1/K) B.
pub fn rubin_combine(estimates: &[Vec<f64>], variances: &[Matrix]) -> Result<RubinResult> {
    let k = estimates.len();
    if k < 2 {
        return Err(Error::TooFewImputations { got: k });
    }
    assert_eq!(k, variances.len());
    let p = estimates[0].len();
    let mut theta_bar = vec![0.0; p];
    for est in estimates {
        assert_eq!(est.len(), p);
        for j in 0..p {
            theta_bar[j] += est[j] / k as f64;
        }
    }
    let mut within = Matrix::zeros(p, p);
    for v in variances {
        assert_eq!((v.rows(), v.cols()), (p, p));
        within = within.add(&v.scale(1.0 / k as f64));
    }
    let mut between = Matrix::zeros(p, p);
    for est in estimates {
        for r in 0..p {
            for c in 0..p {
                let v = between.get(r, c)
                    + (est[r] - theta_bar[r]) * (est[c] - theta_bar[c]) / (k as f64 - 1.0);
                between.set(r, c, v);
            }
        }
    }
    let total = within.add(&between.scale(1.0 + 1.0 / k as f64));
    Ok(RubinResult { theta_bar, within, between, total, k })
}

/// Which imputation engine the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeEngine {
    Flow,
    Chained,
}

/// Complete-data analysis: maps a completed matrix to an estimate and its
/// covariance estimate.
pub trait CompleteDataAnalysis {
    fn analyze(&self, completed: &Matrix) -> Result<(Vec<f64>, Matrix)>;
}

impl<F> CompleteDataAnalysis for F
where
    F: Fn(&Matrix) -> Result<(Vec<f64>, Matrix)>,
{
    fn analyze(&self, completed: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        self(completed)
    }
}

/// K_imp imputations -> per-dataset analysis -> Rubin combination.
/// The flow engine is trained once and sampled per imputation; the chained
/// engine re-draws its posterior parameters per imputation.
pub fn mi_pipeline<A: CompleteDataAnalysis>(
    md: &MaskedDataset,
    engine: ImputeEngine,
    k_imp: usize,
    analysis: &A,
    cfm: &CfmConfig,
    ode: &OdeConfig,
    rng: &mut RngStream,
) -> Result<RubinResult> {
    if k_imp < 2 {
        return Err(Error::TooFewImputations { got: k_imp });
    }
    if md.incomplete_columns().is_empty() {
        let (theta, v) = analysis.analyze(md.x())?;
        // no missingness: B = 0, T = W; synthesize the K=identical case
        let ests = vec![theta; 2];
        let vars = vec![v; 2];
        return rubin_combine(&ests, &vars);
    }
    let mut estimates = Vec::with_capacity(k_imp);
    let mut variances = Vec::with_capacity(k_imp);
    match engine {
        ImputeEngine::Flow => {
            let model = fm_imputer_train(md, cfm, rng)?;
            for k in 0..k_imp {
                let mut draw_rng = rng.substream(1000 + k as u64);
                let fills = fm_impute_once(md, &model, ode, &mut draw_rng)?;
                let completed = md.completed_with(&fills);
                let (theta, v) = analysis.analyze(&completed)?;
                estimates.push(theta);
                variances.push(v);
            }
        }
        ImputeEngine::Chained => {
            for k in 0..k_imp {
                let mut draw_rng = rng.substream(2000 + k as u64);
                let completed = chained_gaussian_impute(md, 5, &mut draw_rng)?;
                let (theta, v) = analysis.analyze(&completed)?;
                estimates.push(theta);
                variances.push(v);
            }
        }
    }
    rubin_combine(&estimates, &variances)
}

/// Log normalizer A(eta) = log E exp(eta l) and tilted mean A'(eta) over a
/// Monte Carlo sample of l values, evaluated in log space.
pub fn tilt_log_normalizer(ell: &[f64], eta: f64) -> (f64, f64) {
    assert!(!ell.is_empty());
    let n = ell.len() as f64;
    let terms: Vec<f64> = ell.iter().map(|&l| eta * l).collect();
    let lse = special::log_sum_exp(&terms);
    let a = lse - n.ln();
    // A'(eta) = E[l e^{eta l}] / E[e^{eta l}]
    let mut num_acc = 0.0;
    for (&l, &t) in ell.iter().zip(&terms) {
        num_acc += l * (t - lse).exp();
    }
    (a, num_acc)
}

/// Worst-case tilt solution on a KL ball of radius rho.
#[derive(Debug, Clone, Copy)]
pub struct TiltSolution {
    pub eta: f64,
    pub log_normalizer: f64,
    pub kl: f64,
}

/// Solves eta A'(eta) - A(eta) = rho for eta >= 0 by bisection; the left side
/// is the KL divergence of the tilted law from the nominal one and is
/// nondecreasing in eta by convexity of A.
pub fn solve_tilt(ell: &[f64], rho: f64) -> Result<TiltSolution> {
    assert!(rho >= 0.0);
    if rho == 0.0 {
        let (a, _) = tilt_log_normalizer(ell, 0.0);
        return Ok(TiltSolution { eta: 0.0, log_normalizer: a, kl: 0.0 });
    }
    let sd = num::variance(ell).sqrt();
    if sd < 1e-12 {
        return Err(Error::NoSolutionInBracket { cap: f64::INFINITY });
    }
    let cap = 50.0 / sd;
    let kl_at = |eta: f64| -> f64 {
        let (a, ap) = tilt_log_normalizer(ell, eta);
        eta * ap - a
    };
    if kl_at(cap) < rho {
        return Err(Error::NoSolutionInBracket { cap });
    }
    let (mut lo, mut hi) = (0.0, cap);
    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        eta = 0.5 * (lo + hi);
        let kl = kl_at(eta);
        if (kl - rho).abs() < 1e-8 {
            break;
        }
        if kl < rho {
            lo = eta;
        } else {
            hi = eta;
        }
    }
    // convexity of A makes the KL nondecreasing in eta; spot-check on the
    // solved bracket
    let mut prev = 0.0;
    for step in 1..=5 {
        let kl = kl_at(eta * step as f64 / 5.0);
        debug_assert!(kl >= prev - 1e-9, "KL decreased along the bracket");
        prev = kl;
    }
    let (a, ap) = tilt_log_normalizer(ell, eta);
    Ok(TiltSolution { eta, log_normalizer: a, kl: eta * ap - a })
}
