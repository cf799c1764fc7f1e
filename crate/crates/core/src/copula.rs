//! Rank-based pseudo-observations, unit-cube transforms, and flow copulas:
//! dependence learned as a transport in logit/probit space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{cfm_train, CfmConfig, FlowModel, OdeConfig};
use crate::num::{special, Matrix, RngStream};

/// Rank-based pseudo-observations (R - 1/2)/n, clipped into [eps, 1-eps].
#[derive(Debug, Clone)]
pub struct PseudoObs {
    pub u: Matrix,
    pub clip: f64,
}

/// Average ranks (ties averaged), mapped to (r - 1/2)/n per column, clipped.
pub fn ranks_to_pseudo(x: &Matrix, eps: f64) -> Result<PseudoObs> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let d = x.cols();
    let mut u = Matrix::zeros(n, d);
    for j in 0..d {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| x.get(a, j).partial_cmp(&x.get(b, j)).unwrap());
        // average ranks over tie runs (1-based ranks)
        let mut pos = 0;
        while pos < n {
            let mut end = pos;
            while end + 1 < n && x.get(idx[end + 1], j) == x.get(idx[pos], j) {
                end += 1;
            }
            let avg_rank = (pos + 1 + end + 1) as f64 / 2.0;
            let val = ((avg_rank - 0.5) / n as f64).clamp(eps, 1.0 - eps);
            for &i in &idx[pos..=end] {
                u.set(i, j, val);
            }
            pos = end + 1;
        }
    }
    Ok(PseudoObs { u, clip: eps })
}

/// Default clip for pseudo-observations: 1/(2n).
pub fn default_clip(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// Map from the unit cube to R^d used before flow training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitTransform {
    Logit,
    Probit,
}

impl UnitTransform {
    pub fn forward(&self, u: f64) -> Result<f64> {
        if !(0.0 < u && u < 1.0) {
            return Err(Error::OutOfUnitInterval { value: u });
        }
        Ok(match self {
            UnitTransform::Logit => (u / (1.0 - u)).ln(),
            UnitTransform::Probit => special::normal_inv_cdf(u),
        })
    }

    pub fn inverse(&self, z: f64) -> f64 {
        match self {
            UnitTransform::Logit => special::sigmoid(z),
            UnitTransform::Probit => special::normal_cdf(z),
        }
    }

    pub fn forward_vec(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter().map(|&v| self.forward(v)).collect()
    }

    pub fn inverse_vec(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.inverse(v)).collect()
    }
}

/// Componentwise logit map.
pub fn logit_map(u: &[f64]) -> Result<Vec<f64>> {
    UnitTransform::Logit.forward_vec(u)
}

/// Componentwise probit map.
pub fn probit_map(u: &[f64]) -> Result<Vec<f64>> {
    UnitTransform::Probit.forward_vec(u)
}

/// Copula sampler: a flow trained on transformed pseudo-observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaModel {
    pub flow: FlowModel,
    pub transform: UnitTransform,
    pub clip: f64,
}

/// Trains a flow copula: pseudo-observations -> z-space -> flow matching.
pub fn flow_copula_train(
    x: &Matrix,
    transform: UnitTransform,
    cfg: &CfmConfig,
    rng: &mut RngStream,
) -> Result<CopulaModel> {
    let n = x.rows();
    if n < 100 {
        return Err(Error::TooFewRows { need: 100, got: n });
    }
    let eps = default_clip(n);
    let pseudo = ranks_to_pseudo(x, eps)?;
    let mut z_rows = Vec::with_capacity(n);
    for i in 0..n {
        z_rows.push(transform.forward_vec(pseudo.u.row(i))?);
    }
    let flow = cfm_train(&z_rows, cfg, rng)?;
    Ok(CopulaModel { flow, transform, clip: eps })
}

impl CopulaModel {
    /// Draws n rows in (0,1)^d: base noise -> learned ODE -> inverse
    /// transform -> clip.
    pub fn sample(&self, n: usize, ode: &OdeConfig, rng: &mut RngStream) -> Result<Matrix> {
        let d = self.flow.state_dim();
        let mut out = Matrix::zeros(n, d);
        let draws = self.flow.sample(n, ode, rng)?;
        for (i, z) in draws.iter().enumerate() {
            for (j, &zj) in z.iter().enumerate() {
                let u = self.transform.inverse(zj).clamp(self.clip, 1.0 - self.clip);
                out.set(i, j, u);
            }
        }
        Ok(out)
    }
}

/// Kendall's tau over all pairs: (concordant - discordant) / (n choose 2),
/// with tied pairs contributing zero.
pub fn kendall_tau(u: &Matrix) -> Result<f64> {
    assert_eq!(u.cols(), 2, "kendall_tau expects two columns");
    let n = u.rows();
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let mut net = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = u.get(i, 0) - u.get(j, 0);
            let dy = u.get(i, 1) - u.get(j, 1);
            let prod = dx * dy;
            if prod > 0.0 {
                net += 1;
            } else if prod < 0.0 {
                net -= 1;
            }
        }
    }
    Ok(net as f64 / (n * (n - 1) / 2) as f64)
}
