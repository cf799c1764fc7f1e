//! Probability paths, conditional flow matching, and ODE sampling.
//!
//! Training pairs a base draw with a data point (independent, exact
//! assignment, or entropic coupling), interpolates linearly, and regresses a
//! velocity net onto the pairwise difference vector. Sampling integrates the
//! learned field from base noise.

pub mod coupling;
pub mod ode;

pub use coupling::{ot_assignment, sinkhorn, CouplingKind, CouplingPlan};
pub use ode::{
    euler_maruyama, gaussian_pushforward, logdensity_along_flow, ode_integrate, ou_moments,
    probability_flow_velocity, sensitivity_ratio, Direction, OdeConfig, Scheme,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Activation, AdamState, Mlp, TrainConfig};
use crate::num::RngStream;

/// One point on a linear probability path.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub x_t: Vec<f64>,
    /// teacher velocity (the pairwise difference x1 - x0)
    pub u: Vec<f64>,
    pub x1: Vec<f64>,
}

/// x_t = (1-t) x0 + t x1 with teacher velocity u = x1 - x0.
pub fn linear_path(x0: &[f64], x1: &[f64], t: f64) -> Result<PathSample> {
    if x0.len() != x1.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), got: x1.len() });
    }
    assert!((0.0..=1.0).contains(&t), "t must lie in [0,1]");
    let x_t = x0.iter().zip(x1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    let u = x1.iter().zip(x0).map(|(b, a)| b - a).collect();
    Ok(PathSample { t, x_t, u, x1: x1.to_vec() })
}

/// Time features fed to the velocity net: raw t plus one sin/cos pair.
fn time_features(t: f64) -> [f64; 3] {
    let w = 2.0 * std::f64::consts::PI * t;
    [t, w.sin(), w.cos()]
}

const TIME_FEATURES: usize = 3;
/// Training never draws t above this, keeping away from the path endpoint
/// where the conditional form of the target blows up.
const T_MAX: f64 = 1.0 - 1e-3;

/// Velocity model v(t, x | c) backed by an [`Mlp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowModel {
    net: Mlp,
    state_dim: usize,
    condition_dim: usize,
    /// bridge-noise scale on the training path (0 = pure linear path)
    path_noise: f64,
}

impl FlowModel {
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn condition_dim(&self) -> usize {
        self.condition_dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Evaluates v(t, x | c). `condition` must be empty when the model is
    /// unconditional.
    pub fn velocity(&self, t: f64, x: &[f64], condition: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.state_dim);
        debug_assert_eq!(condition.len(), self.condition_dim);
        let mut input = Vec::with_capacity(TIME_FEATURES + self.state_dim + self.condition_dim);
        input.extend_from_slice(&time_features(t));
        input.extend_from_slice(x);
        input.extend_from_slice(condition);
        self.net.forward(&input).expect("input assembled to the net dimension")
    }

    /// The x-field at fixed condition, for the ODE integrators.
    pub fn field<'a>(&'a self, condition: &'a [f64]) -> impl Fn(f64, &[f64]) -> Vec<f64> + 'a {
        move |t, x| self.velocity(t, x, condition)
    }

    /// Draws n samples by integrating from standard normal base noise.
    pub fn sample(&self, n: usize, cfg: &OdeConfig, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
        self.sample_conditional_each(&vec![vec![]; n], cfg, rng)
    }

    /// Draws one sample per provided condition row.
    pub fn sample_conditional_each(
        &self,
        conditions: &[Vec<f64>],
        cfg: &OdeConfig,
        rng: &mut RngStream,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(conditions.len());
        for c in conditions {
            let x0 = rng.normal_vec(self.state_dim);
            out.push(ode_integrate(self.field(c), &x0, cfg)?);
        }
        Ok(out)
    }

    /// Draws n samples at one fixed condition.
    pub fn sample_conditional(
        &self,
        condition: &[f64],
        n: usize,
        cfg: &OdeConfig,
        rng: &mut RngStream,
    ) -> Result<Vec<Vec<f64>>> {
        self.sample_conditional_each(&vec![condition.to_vec(); n], cfg, rng)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("flow model serializes")
    }

    pub fn from_json(s: &str) -> Result<FlowModel> {
        let m: FlowModel = serde_json::from_str(s).map_err(|e| Error::ModelIo(e.to_string()))?;
        let expected = TIME_FEATURES + m.state_dim + m.condition_dim;
        if m.net.input_dim() != expected || m.net.output_dim() != m.state_dim {
            return Err(Error::ModelIo("net dimensions inconsistent with model dims".into()));
        }
        Ok(m)
    }
}

/// Flow-matching training configuration.
#[derive(Debug, Clone)]
pub struct CfmConfig {
    pub train: TrainConfig,
    pub coupling: CouplingKind,
    /// entropic regularization when `coupling == Entropic`
    pub sinkhorn_eps: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub path_noise: f64,
}

impl Default for CfmConfig {
    fn default() -> Self {
        CfmConfig {
            train: TrainConfig::default(),
            coupling: CouplingKind::Independent,
            sinkhorn_eps: 0.05,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            path_noise: 0.0,
        }
    }
}

/// Builds the (input, target) pairs for one coupled minibatch.
/// x1 rows come from data, x0 rows from the base; `sigma[i]` pairs data row i
/// with base row sigma[i].
fn batch_rows(
    x1: &[&[f64]],
    x0: &[Vec<f64>],
    sigma: &[usize],
    conditions: Option<&[&[f64]]>,
    path_noise: f64,
    rng: &mut RngStream,
    out: &mut Vec<(Vec<f64>, Vec<f64>)>,
) {
    out.clear();
    let d = x0[0].len();
    for (i, x1i) in x1.iter().enumerate() {
        let x0i = &x0[sigma[i]];
        let t = rng.uniform_range(0.0, T_MAX);
        let mut x_t: Vec<f64> = x0i.iter().zip(*x1i).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        if path_noise > 0.0 {
            let s = path_noise * (t * (1.0 - t)).sqrt();
            for v in x_t.iter_mut() {
                *v += s * rng.normal();
            }
        }
        let u: Vec<f64> = x1i.iter().zip(x0i).map(|(b, a)| b - a).collect();
        let mut input =
            Vec::with_capacity(TIME_FEATURES + d + conditions.map_or(0, |c| c[i].len()));
        input.extend_from_slice(&time_features(t));
        input.extend_from_slice(&x_t);
        if let Some(cs) = conditions {
            input.extend_from_slice(cs[i]);
        }
        out.push((input, u));
    }
}

fn pair_batch(
    x1: &[&[f64]],
    x0: &[Vec<f64>],
    coupling: CouplingKind,
    sinkhorn_eps: f64,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let m = x1.len();
    match coupling {
        CouplingKind::Independent => Ok((0..m).collect()),
        CouplingKind::Assignment => {
            let x1_owned: Vec<Vec<f64>> = x1.iter().map(|r| r.to_vec()).collect();
            let c = coupling::squared_cost(&x1_owned, x0);
            Ok(ot_assignment(&c)?.permutation.unwrap())
        }
        CouplingKind::Entropic => {
            let x1_owned: Vec<Vec<f64>> = x1.iter().map(|r| r.to_vec()).collect();
            let c = coupling::squared_cost(&x1_owned, x0);
            let plan = sinkhorn(&c, sinkhorn_eps, 500)?;
            let p = plan.plan.unwrap();
            let mut sigma = Vec::with_capacity(m);
            for i in 0..m {
                sigma.push(rng.categorical(p.row(i)));
            }
            Ok(sigma)
        }
    }
}

/// Trains an unconditional velocity field transporting N(0, I) base noise to
/// the data distribution. Returns the model and per-epoch mean training loss.
pub fn cfm_train_tracked(
    data: &[Vec<f64>],
    cfg: &CfmConfig,
    rng: &mut RngStream,
) -> Result<(FlowModel, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = data[0].len();
    train_flow(&data.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), None, d, 0, cfg, rng)
}

/// As [`cfm_train_tracked`], dropping the loss history.
pub fn cfm_train(data: &[Vec<f64>], cfg: &CfmConfig, rng: &mut RngStream) -> Result<FlowModel> {
    Ok(cfm_train_tracked(data, cfg, rng)?.0)
}

/// Trains a conditional velocity field: sampling at fixed c approximates
/// p(y | c). Pairing within a minibatch is always independent (each value
/// keeps its own condition).
pub fn conditional_cfm_train(
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &CfmConfig,
    rng: &mut RngStream,
) -> Result<FlowModel> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let cond_dim = pairs[0].0.len();
    let d = pairs[0].1.len();
    let values: Vec<&[f64]> = pairs.iter().map(|(_, y)| y.as_slice()).collect();
    let conds: Vec<&[f64]> = pairs.iter().map(|(c, _)| c.as_slice()).collect();
    Ok(train_flow(&values, Some(&conds), d, cond_dim, cfg, rng)?.0)
}

fn train_flow(
    values: &[&[f64]],
    conditions: Option<&[&[f64]]>,
    state_dim: usize,
    condition_dim: usize,
    cfg: &CfmConfig,
    rng: &mut RngStream,
) -> Result<(FlowModel, Vec<f64>)> {
    let n = values.len();
    let input_dim = TIME_FEATURES + state_dim + condition_dim;
    let mut sizes = vec![input_dim];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(state_dim);
    let mut net = Mlp::new(&sizes, cfg.activation, rng);
    let mut params = net.params();
    let mut adam = AdamState::new(params.len());

    let bs = cfg.train.batch_size.max(1).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.train.epochs + 1);
    let mut batch: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(bs);

    // pre-training loss over one epoch of freshly coupled batches; entry 0 of
    // the history
    {
        let mut total = 0.0;
        let mut count = 0.0;
        for chunk in order.chunks(bs) {
            let x1: Vec<&[f64]> = chunk.iter().map(|&i| values[i]).collect();
            let conds: Option<Vec<&[f64]>> =
                conditions.map(|cs| chunk.iter().map(|&i| cs[i]).collect());
            let x0: Vec<Vec<f64>> = (0..x1.len()).map(|_| rng.normal_vec(state_dim)).collect();
            let sigma = if conditions.is_some() {
                (0..x1.len()).collect()
            } else {
                pair_batch(&x1, &x0, cfg.coupling, cfg.sinkhorn_eps, rng)?
            };
            batch_rows(&x1, &x0, &sigma, conds.as_deref(), cfg.path_noise, rng, &mut batch);
            total += net.loss_grad(&batch)?.0;
            count += 1.0;
        }
        epoch_losses.push(total / count);
    }

    for epoch in 0..cfg.train.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut count = 0.0;
        for chunk in order.chunks(bs) {
            let x1: Vec<&[f64]> = chunk.iter().map(|&i| values[i]).collect();
            let conds: Option<Vec<&[f64]>> =
                conditions.map(|cs| chunk.iter().map(|&i| cs[i]).collect());
            let x0: Vec<Vec<f64>> = (0..x1.len()).map(|_| rng.normal_vec(state_dim)).collect();
            // conditional training keeps each value with its condition
            let sigma = if conditions.is_some() {
                (0..x1.len()).collect()
            } else {
                pair_batch(&x1, &x0, cfg.coupling, cfg.sinkhorn_eps, rng)?
            };
            batch_rows(&x1, &x0, &sigma, conds.as_deref(), cfg.path_noise, rng, &mut batch);

            net.set_params(&params);
            let (loss, mut grad) = net.loss_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if cfg.train.weight_decay > 0.0 {
                for (g, p) in grad.iter_mut().zip(&params) {
                    *g += 2.0 * cfg.train.weight_decay * p;
                }
            }
            let lr = cfg.train.step_size * cfg.train.lr_schedule.factor(epoch, cfg.train.epochs);
            adam.step(&mut params, &grad, lr);
            total += loss;
            count += 1.0;
        }
        epoch_losses.push(total / count);
        if let Some(cap) = cfg.train.spectral_cap {
            net.set_params(&params);
            net = net.spectral_clamp(cap);
            params = net.params();
        }
    }
    net.set_params(&params);
    if let Some(cap) = cfg.train.spectral_cap {
        net = net.spectral_clamp(cap);
    }
    Ok((FlowModel { net, state_dim, condition_dim, path_noise: cfg.path_noise }, epoch_losses))
}

/// Collects teacher-signal tuples (t, x_t, u) for coupled minibatches of
/// 1-D data, used to compare couplings by binned signal variance.
pub fn teacher_signal_1d(
    data: &[f64],
    coupling: CouplingKind,
    batch: usize,
    batches: usize,
    rng: &mut RngStream,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::with_capacity(batch * batches);
    let n = data.len();
    for _ in 0..batches {
        let x1: Vec<Vec<f64>> = (0..batch).map(|_| vec![data[rng.below(n)]]).collect();
        let x0: Vec<Vec<f64>> = (0..batch).map(|_| vec![rng.normal()]).collect();
        let refs: Vec<&[f64]> = x1.iter().map(|r| r.as_slice()).collect();
        let sigma = pair_batch(&refs, &x0, coupling, 0.05, rng)?;
        for i in 0..batch {
            let t = rng.uniform_range(0.0, T_MAX);
            let (a, b) = (x0[sigma[i]][0], x1[i][0]);
            out.push((t, (1.0 - t) * a + t * b, b - a));
        }
    }
    Ok(out)
}

/// Per-bin variance of the teacher signal u over a (t, x_t) grid.
/// Returns (bin id, count, variance) for bins with at least `min_count`
/// members.
pub fn binned_signal_variance(
    tuples: &[(f64, f64, f64)],
    t_bins: usize,
    x_bins: usize,
    x_lo: f64,
    x_hi: f64,
    min_count: usize,
) -> Vec<(usize, usize, f64)> {
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); t_bins * x_bins];
    for &(t, x, u) in tuples {
        let ti = ((t * t_bins as f64) as usize).min(t_bins - 1);
        if x < x_lo || x >= x_hi {
            continue;
        }
        let xi = (((x - x_lo) / (x_hi - x_lo) * x_bins as f64) as usize).min(x_bins - 1);
        groups[ti * x_bins + xi].push(u);
    }
    groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.len() >= min_count)
        .map(|(id, g)| (id, g.len(), crate::num::variance(g)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::w1_1d;

    #[test]
    fn linear_path_cases() {
        let p = linear_path(&[0.0], &[1.0], 0.5).unwrap();
        assert_eq!(p.x_t, vec![0.5]);
        assert_eq!(p.u, vec![1.0]);

        let p0 = linear_path(&[2.0, -1.0], &[0.5, 3.0], 0.0).unwrap();
        assert_eq!(p0.x_t, vec![2.0, -1.0]);
        let p1 = linear_path(&[2.0, -1.0], &[0.5, 3.0], 1.0).unwrap();
        assert_eq!(p1.x_t, vec![0.5, 3.0]);

        assert!(linear_path(&[0.0], &[1.0, 2.0], 0.3).is_err());
    }

    #[test]
    fn conditional_target_identity() {
        // (x1 - x_t)/(1-t) equals x1 - x0 identically for t < 1
        let mut rng = RngStream::new(3, 9);
        for _ in 0..50 {
            let x0 = rng.normal_vec(3);
            let x1 = rng.normal_vec(3);
            let t = rng.uniform_range(0.0, 0.999);
            let p = linear_path(&x0, &x1, t).unwrap();
            for j in 0..3 {
                let cond = (p.x1[j] - p.x_t[j]) / (1.0 - t);
                assert!((cond - p.u[j]).abs() < 1e-9 / (1.0 - t));
            }
        }
    }

    #[test]
    fn cfm_learns_shifted_gaussian() {
        let mut rng = RngStream::new(1201, 0);
        let n = 4000;
        let data: Vec<Vec<f64>> = (0..n).map(|_| vec![2.0 + rng.normal()]).collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 80,
                batch_size: 64,
                step_size: 3e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let (model, losses) = cfm_train_tracked(&data, &cfg, &mut rng).unwrap();
        assert!(
            losses.last().unwrap() < &(losses[0] * 0.5),
            "loss did not halve: {} -> {}",
            losses[0],
            losses.last().unwrap()
        );
        let samples =
            model.sample(4000, &OdeConfig::forward(100, Scheme::Rk4), &mut rng).unwrap();
        let xs: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let mean = crate::num::mean(&xs);
        let sd = crate::num::variance(&xs).sqrt();
        assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn cfm_identity_transport() {
        let mut rng = RngStream::new(1202, 0);
        let n = 3000;
        let data: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal()]).collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 25,
                batch_size: 128,
                step_size: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = cfm_train(&data, &cfg, &mut rng).unwrap();
        let generated: Vec<f64> = model
            .sample(4000, &OdeConfig::forward(50, Scheme::Rk4), &mut rng)
            .unwrap()
            .iter()
            .map(|s| s[0])
            .collect();
        let base: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        let w1 = w1_1d(&generated, &base).unwrap();
        assert!(w1 < 0.08, "W1 {w1}");
    }

    #[test]
    fn ot_coupling_reduces_binned_variance() {
        let mut rng = RngStream::new(1203, 0);
        let n = 2000;
        let data: Vec<f64> = (0..n)
            .map(|_| if rng.bernoulli(0.5) { 2.0 } else { -2.0 } + 0.5 * rng.normal())
            .collect();
        let ind = teacher_signal_1d(&data, CouplingKind::Independent, 64, 150, &mut rng).unwrap();
        let ot = teacher_signal_1d(&data, CouplingKind::Assignment, 64, 150, &mut rng).unwrap();
        let vi = binned_signal_variance(&ind, 8, 16, -4.0, 4.0, 12);
        let vo = binned_signal_variance(&ot, 8, 16, -4.0, 4.0, 12);
        let mut lower = 0;
        let mut total = 0;
        for (id, _, var_i) in &vi {
            if let Some((_, _, var_o)) = vo.iter().find(|(jd, _, _)| jd == id) {
                total += 1;
                if var_o < var_i {
                    lower += 1;
                }
            }
        }
        assert!(total > 20, "too few occupied bins: {total}");
        let frac = lower as f64 / total as f64;
        assert!(frac >= 0.7, "OT lower on only {frac:.2} of {total} bins");
    }

    #[test]
    fn conditional_cfm_tracks_conditional_mean() {
        let mut rng = RngStream::new(1204, 0);
        let n = 4000;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|_| {
                let c = rng.uniform_range(-1.0, 1.0);
                (vec![c], vec![c + 0.5 * rng.normal()])
            })
            .collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 40,
                batch_size: 128,
                step_size: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = conditional_cfm_train(&pairs, &cfg, &mut rng).unwrap();
        let ode = OdeConfig::forward(60, Scheme::Rk4);
        for &c in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let draws = model.sample_conditional(&[c], 1500, &ode, &mut rng).unwrap();
            let m = crate::num::mean(&draws.iter().map(|d| d[0]).collect::<Vec<_>>());
            assert!((m - c).abs() < 0.1, "c={c}: mean {m}");
        }
    }

    #[test]
    fn conditional_cfm_degenerate_map() {
        let mut rng = RngStream::new(1205, 0);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..3000)
            .map(|_| {
                let c = rng.uniform_range(-1.0, 1.0);
                (vec![c], vec![c])
            })
            .collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 40,
                batch_size: 128,
                step_size: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = conditional_cfm_train(&pairs, &cfg, &mut rng).unwrap();
        let ode = OdeConfig::forward(60, Scheme::Rk4);
        for &c in &[-0.8, 0.0, 0.6] {
            let draws = model.sample_conditional(&[c], 400, &ode, &mut rng).unwrap();
            let m = crate::num::mean(&draws.iter().map(|d| d[0]).collect::<Vec<_>>());
            assert!((m - c).abs() < 0.1, "c={c}: mean {m}");
        }
    }

    #[test]
    fn conditional_cfm_preserves_bimodality() {
        let mut rng = RngStream::new(1206, 0);
        let n = 4000;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|_| {
                let c = rng.uniform_range(-1.5, 1.5);
                let w = crate::num::special::sigmoid(1.2 * c);
                let mode = if rng.bernoulli(w) { 1.0 } else { -1.0 };
                (vec![c], vec![mode + 0.25 * rng.normal()])
            })
            .collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 50,
                batch_size: 128,
                step_size: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = conditional_cfm_train(&pairs, &cfg, &mut rng).unwrap();
        // at c=0 the true weight is exactly 0.5; both modes must appear
        let draws = model
            .sample_conditional(&[0.0], 2000, &OdeConfig::forward(60, Scheme::Rk4), &mut rng)
            .unwrap();
        let upper = draws.iter().filter(|d| d[0] > 0.4).count() as f64 / draws.len() as f64;
        let lower = draws.iter().filter(|d| d[0] < -0.4).count() as f64 / draws.len() as f64;
        assert!(upper >= 0.2, "upper-mode mass {upper}");
        assert!(lower >= 0.2, "lower-mode mass {lower}");
    }

    #[test]
    fn flow_model_json_round_trip() {
        let mut rng = RngStream::new(1207, 0);
        let data: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.normal()]).collect();
        let cfg = CfmConfig {
            train: TrainConfig { epochs: 2, ..Default::default() },
            ..Default::default()
        };
        let model = cfm_train(&data, &cfg, &mut rng).unwrap();
        let loaded = FlowModel::from_json(&model.to_json()).unwrap();
        let a = model.velocity(0.3, &[0.5], &[]);
        let b = loaded.velocity(0.3, &[0.5], &[]);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn trained_field_round_trips_through_reverse_integration() {
        let mut rng = RngStream::new(1208, 0);
        let data: Vec<Vec<f64>> = (0..2000).map(|_| vec![1.0 + 0.7 * rng.normal()]).collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 25,
                batch_size: 128,
                step_size: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = cfm_train(&data, &cfg, &mut rng).unwrap();
        let field = model.field(&[]);
        let fwd = OdeConfig::forward(200, Scheme::Rk4);
        let rev = OdeConfig::reverse(200, Scheme::Rk4);
        for _ in 0..20 {
            let x0 = vec![rng.normal()];
            let x1 = ode_integrate(&field, &x0, &fwd).unwrap();
            let back = ode_integrate(&field, &x1, &rev).unwrap();
            assert!((back[0] - x0[0]).abs() < 1e-2, "{} vs {}", back[0], x0[0]);
        }
    }

    #[test]
    fn pushforward_matches_empirical_cdf_for_linear_field() {
        // dx/dt = ax in 1-D pushes N(0,1) to N(0, e^{2a}); the empirical CDF
        // of pushed samples must match within KS distance 0.02 at n = 1e4.
        let mut rng = RngStream::new(1209, 0);
        let a = -0.4;
        let cfg = OdeConfig::forward(60, Scheme::Rk4);
        let n = 10_000;
        let mut pushed: Vec<f64> = (0..n)
            .map(|_| {
                ode_integrate(|_t, x: &[f64]| vec![a * x[0]], &[rng.normal()], &cfg).unwrap()[0]
            })
            .collect();
        pushed.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let sd = a.exp();
        let mut ks = 0.0_f64;
        for (i, x) in pushed.iter().enumerate() {
            let f = crate::num::special::normal_cdf(x / sd);
            let e_lo = i as f64 / n as f64;
            let e_hi = (i + 1) as f64 / n as f64;
            ks = ks.max((f - e_lo).abs()).max((f - e_hi).abs());
        }
        assert!(ks < 0.02, "KS {ks}");
    }
}
