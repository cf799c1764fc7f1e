//! Feed-forward approximator with analytic gradients.
//!
//! One network type serves as velocity field, score model, and regression
//! learner. Backprop is hand-rolled (the only architectures here are small
//! dense stacks), the optimizer is Adam, and spectral clamping bounds the
//! per-layer operator norms for Lipschitz control of learned fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Matrix, RngStream};

/// Activation applied between affine layers (never on the output layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    /// softplus: log(1 + e^x), a smooth 1-Lipschitz ramp
    SmoothRelu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::SmoothRelu => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::SmoothRelu => crate::num::special::sigmoid(x),
        }
    }

    /// Lipschitz constant (both activations are 1-Lipschitz).
    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    /// out x in, row-major
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn weight_matrix(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.w.clone())
    }
}

/// Multi-layer perceptron with affine output layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer>,
}

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    Constant,
    /// full rate for the first 60% of epochs, x0.25 until 85%, x0.05 after;
    /// sharpens the endpoint without touching early exploration
    StepDecay,
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::StepDecay => {
                let frac = (epoch as f64 + 0.5) / total.max(1) as f64;
                if frac < 0.6 {
                    1.0
                } else if frac < 0.85 {
                    0.25
                } else {
                    0.05
                }
            }
        }
    }
}

/// Training hyperparameters for [`train`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub step_size: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// L2 penalty weight on all parameters.
    pub weight_decay: f64,
    /// When set, every layer operator norm is clamped to this cap after each
    /// epoch and once more after training.
    pub spectral_cap: Option<f64>,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: 1e-2,
            batch_size: 64,
            epochs: 100,
            weight_decay: 0.0,
            spectral_cap: None,
            lr_schedule: LrSchedule::StepDecay,
        }
    }
}

impl Mlp {
    /// Fresh network with the given layer sizes, e.g. `[3, 64, 64, 1]`.
    /// Weights are scaled Gaussian (1/sqrt(fan_in)), biases zero.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut RngStream) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out).map(|_| scale * rng.normal()).collect();
            layers.push(Layer { rows: fan_out, cols: fan_in, w, b: vec![0.0; fan_out] });
        }
        Mlp { sizes: sizes.to_vec(), activation, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Builds a single-layer network from explicit weights (tests, oracles).
    pub fn from_weights(sizes: &[usize], activation: Activation, params: &[f64]) -> Self {
        let mut rng = RngStream::new(0, 0);
        let mut m = Mlp::new(sizes, activation, &mut rng);
        m.set_params(params);
        m
    }

    /// Flattens all parameters (per layer: weights row-major, then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
    }

    /// Forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut a = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = l.b.clone();
            for i in 0..l.rows {
                let row = &l.w[i * l.cols..(i + 1) * l.cols];
                z[i] += crate::num::dot(row, &a);
            }
            if k < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Mean over the batch of the squared-error loss `||f(x) - y||^2`,
    /// together with the gradient in flattened parameter order.
    pub fn loss_grad(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let nl = self.layers.len();
        let mut grad_w: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
        let mut loss = 0.0;

        // reusable buffers: pre-activations z_k and activations a_k
        for (input, target) in batch {
            if input.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: input.len(),
                });
            }
            if target.len() != self.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.output_dim(),
                    got: target.len(),
                });
            }
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(nl + 1);
            let mut pre: Vec<Vec<f64>> = Vec::with_capacity(nl);
            acts.push(input.clone());
            for (k, l) in self.layers.iter().enumerate() {
                let a = &acts[k];
                let mut z = l.b.clone();
                for i in 0..l.rows {
                    let row = &l.w[i * l.cols..(i + 1) * l.cols];
                    z[i] += crate::num::dot(row, a);
                }
                let out = if k < nl - 1 {
                    z.iter().map(|&v| self.activation.apply(v)).collect()
                } else {
                    z.clone()
                };
                pre.push(z);
                acts.push(out);
            }
            let y_hat = &acts[nl];
            let mut delta: Vec<f64> =
                y_hat.iter().zip(target).map(|(yh, y)| 2.0 * (yh - y)).collect();
            loss += y_hat.iter().zip(target).map(|(yh, y)| (yh - y) * (yh - y)).sum::<f64>();

            for k in (0..nl).rev() {
                let l = &self.layers[k];
                let a_prev = &acts[k];
                for i in 0..l.rows {
                    grad_b[k][i] += delta[i];
                    let g_row = &mut grad_w[k][i * l.cols..(i + 1) * l.cols];
                    for j in 0..l.cols {
                        g_row[j] += delta[i] * a_prev[j];
                    }
                }
                if k > 0 {
                    let mut next = vec![0.0; l.cols];
                    for i in 0..l.rows {
                        let row = &l.w[i * l.cols..(i + 1) * l.cols];
                        for j in 0..l.cols {
                            next[j] += delta[i] * row[j];
                        }
                    }
                    for j in 0..l.cols {
                        next[j] *= self.activation.derivative(pre[k - 1][j]);
                    }
                    delta = next;
                }
            }
        }

        let inv = 1.0 / batch.len() as f64;
        loss *= inv;
        let mut grad = Vec::with_capacity(self.param_count());
        for k in 0..nl {
            grad.extend(grad_w[k].iter().map(|g| g * inv));
            grad.extend(grad_b[k].iter().map(|g| g * inv));
        }
        Ok((loss, grad))
    }

    /// Product of per-layer operator norms times the activation Lipschitz
    /// constant raised to the number of hidden activations.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        let mut bound = 1.0;
        for l in &self.layers {
            bound *= operator_norm(&l.weight_matrix());
        }
        bound * self.activation.lipschitz().powi(self.layers.len() as i32 - 1)
    }

    /// Rescales any layer whose operator norm exceeds `cap`; layers already
    /// below the cap are untouched.
    pub fn spectral_clamp(&self, cap: f64) -> Mlp {
        assert!(cap > 0.0);
        let mut out = self.clone();
        for l in &mut out.layers {
            let norm = operator_norm(&Matrix::from_vec(l.rows, l.cols, l.w.clone()));
            if norm > cap {
                let s = cap / norm;
                l.w.iter_mut().for_each(|v| *v *= s);
            }
        }
        out
    }

    /// Serializes to a flat JSON document (sizes, activation, weights).
    /// serde_json emits shortest round-trip decimals, so load(save(m)) == m
    /// bitwise.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mlp serializes")
    }

    pub fn from_json(s: &str) -> Result<Mlp> {
        let m: Mlp = serde_json::from_str(s).map_err(|e| Error::ModelIo(e.to_string()))?;
        if m.sizes.len() < 2 || m.layers.len() != m.sizes.len() - 1 {
            return Err(Error::ModelIo("inconsistent layer sizes".into()));
        }
        for (k, l) in m.layers.iter().enumerate() {
            if l.rows != m.sizes[k + 1] || l.cols != m.sizes[k] || l.w.len() != l.rows * l.cols {
                return Err(Error::ModelIo("layer shape mismatch".into()));
            }
            if !l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()) {
                return Err(Error::ModelIo("non-finite parameter".into()));
            }
        }
        Ok(m)
    }
}

/// Largest singular value of a (possibly rectangular) matrix via power
/// iteration on W^T W.
pub fn operator_norm(w: &Matrix) -> f64 {
    let (r, c) = (w.rows(), w.cols());
    if r == 0 || c == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..c).map(|j| 1.0 + (j as f64 * 0.7).sin()).collect();
    let nv = crate::num::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    for _ in 0..200 {
        // u = W v; v' = W^T u
        let u = w.matvec(&v);
        let mut vt = vec![0.0; c];
        for i in 0..r {
            let row = w.row(i);
            for j in 0..c {
                vt[j] += row[j] * u[i];
            }
        }
        let n = crate::num::norm2(&vt);
        if n == 0.0 {
            return 0.0;
        }
        vt.iter_mut().for_each(|x| *x /= n);
        let new_sigma = crate::num::norm2(&w.matvec(&vt));
        if (new_sigma - sigma).abs() <= 1e-12 * new_sigma.max(1.0) {
            return new_sigma;
        }
        sigma = new_sigma;
        v = vt;
    }
    sigma
}

/// Adam state for one parameter vector (decay 0.9/0.999, epsilon 1e-8).
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Minibatch training with Adam; returns the trained model.
pub fn train(
    data: &[(Vec<f64>, Vec<f64>)],
    sizes: &[usize],
    activation: Activation,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Mlp> {
    Ok(train_tracked(data, sizes, activation, cfg, rng)?.0)
}

/// As [`train`], additionally returning the mean training loss per epoch.
pub fn train_tracked(
    data: &[(Vec<f64>, Vec<f64>)],
    sizes: &[usize],
    activation: Activation,
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<(Mlp, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let model = Mlp::new(sizes, activation, rng);
    let losses = train_existing(model.clone(), data, cfg, rng).map(|(m, l)| (m, l))?;
    Ok(losses)
}

/// Continues training an existing model (used by the flow trainers, which
/// build their own batches).
pub fn train_existing(
    mut model: Mlp,
    data: &[(Vec<f64>, Vec<f64>)],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<(Mlp, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = data.len();
    let bs = cfg.batch_size.max(1).min(n);
    let mut params = model.params();
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(bs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(bs) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            model.set_params(&params);
            let (loss, mut grad) = model.loss_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if cfg.weight_decay > 0.0 {
                for (g, p) in grad.iter_mut().zip(&params) {
                    *g += 2.0 * cfg.weight_decay * p;
                }
            }
            adam.step(&mut params, &grad, cfg.step_size * cfg.lr_schedule.factor(epoch, cfg.epochs));
            epoch_loss += loss;
            batches += 1.0;
        }
        epoch_losses.push(epoch_loss / batches);
        if let Some(cap) = cfg.spectral_cap {
            model.set_params(&params);
            model = model.spectral_clamp(cap);
            params = model.params();
        }
    }
    model.set_params(&params);
    if let Some(cap) = cfg.spectral_cap {
        model = model.spectral_clamp(cap);
    }
    Ok((model, epoch_losses))
}
