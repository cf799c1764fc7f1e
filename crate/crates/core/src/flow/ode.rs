//! Fixed-grid ODE/SDE integration, log-density transport, and the linear
//! closed forms used as oracles.

use crate::error::{Error, Result};
use crate::num::{matrix, Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Fixed time grid t_k = k/K on [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub steps: usize,
    pub scheme: Scheme,
    pub direction: Direction,
}

impl OdeConfig {
    pub fn new(steps: usize, scheme: Scheme, direction: Direction) -> Self {
        assert!(steps >= 1, "need at least one step");
        OdeConfig { steps, scheme, direction }
    }

    pub fn forward(steps: usize, scheme: Scheme) -> Self {
        Self::new(steps, scheme, Direction::Forward)
    }

    pub fn reverse(steps: usize, scheme: Scheme) -> Self {
        Self::new(steps, scheme, Direction::Reverse)
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Integrates dx/dt = v(t, x) over [0,1] (or [1,0] in reverse) on the fixed
/// grid, returning the terminal state.
pub fn ode_integrate<F>(field: F, x0: &[f64], cfg: &OdeConfig) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let (x, _) = integrate_augmented(field, |_, _| 0.0, x0, 0.0, cfg)?;
    Ok(x)
}

/// As [`ode_integrate`], returning the full trajectory (t_k, x_k) including
/// both endpoints.
pub fn ode_integrate_path<F>(
    field: F,
    x0: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let k = cfg.steps;
    let mut out = Vec::with_capacity(k + 1);
    let t_at = |step: usize| match cfg.direction {
        Direction::Forward => step as f64 / k as f64,
        Direction::Reverse => 1.0 - step as f64 / k as f64,
    };
    let mut x = x0.to_vec();
    out.push((t_at(0), x.clone()));
    for step in 0..k {
        let single = OdeConfig { steps: 1, scheme: cfg.scheme, direction: cfg.direction };
        let shifted = |t: f64, y: &[f64]| {
            // map the unit-interval single step onto [t_k, t_{k+1}]
            let tt = match cfg.direction {
                Direction::Forward => t_at(step) + t / k as f64,
                Direction::Reverse => t_at(step) - (1.0 - t) / k as f64,
            };
            field(tt, y).iter().map(|v| v / k as f64).collect()
        };
        x = ode_integrate(shifted, &x, &single)?;
        out.push((t_at(step + 1), x.clone()));
    }
    Ok(out)
}

/// Integrates the state together with the log-density correction
/// d(log rho)/dt = -div v(t, x) along the trajectory, using the same scheme
/// and grid for both components.
pub fn logdensity_along_flow<F, D>(
    field: F,
    divergence: D,
    x0: &[f64],
    log_rho0: f64,
    cfg: &OdeConfig,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    D: FnMut(f64, &[f64]) -> f64,
{
    integrate_augmented(field, divergence, x0, log_rho0, cfg)
}

fn integrate_augmented<F, D>(
    field: F,
    mut divergence: D,
    x0: &[f64],
    log_rho0: f64,
    cfg: &OdeConfig,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    D: FnMut(f64, &[f64]) -> f64,
{
    let k = cfg.steps;
    let dt = match cfg.direction {
        Direction::Forward => 1.0 / k as f64,
        Direction::Reverse => -1.0 / k as f64,
    };
    let t_start = match cfg.direction {
        Direction::Forward => 0.0,
        Direction::Reverse => 1.0,
    };
    let mut x = x0.to_vec();
    let mut ell = log_rho0;
    check_finite(&x)?;

    for step in 0..k {
        let t = t_start + dt * step as f64;
        match cfg.scheme {
            Scheme::Euler => {
                let v = field(t, &x);
                let d = divergence(t, &x);
                for (xi, vi) in x.iter_mut().zip(&v) {
                    *xi += dt * vi;
                }
                ell -= dt * d;
            }
            Scheme::Rk4 => {
                let half = dt / 2.0;
                let k1 = field(t, &x);
                let d1 = divergence(t, &x);
                let x2 = crate::num::axpy(&x, half, &k1);
                let k2 = field(t + half, &x2);
                let d2 = divergence(t + half, &x2);
                let x3 = crate::num::axpy(&x, half, &k2);
                let k3 = field(t + half, &x3);
                let d3 = divergence(t + half, &x3);
                let x4 = crate::num::axpy(&x, dt, &k3);
                let k4 = field(t + dt, &x4);
                let d4 = divergence(t + dt, &x4);
                for i in 0..x.len() {
                    x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                ell -= dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
            }
        }
        check_finite(&x)?;
        if !ell.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    Ok((x, ell))
}

/// Closed-form Gaussian pushforward under dx/dt = Ax:
/// mu_t = e^{tA} mu_0, Sigma_t = e^{tA} Sigma_0 e^{tA^T}.
pub fn gaussian_pushforward(
    a: &Matrix,
    mu0: &[f64],
    sigma0: &Matrix,
    t: f64,
) -> Result<(Vec<f64>, Matrix)> {
    matrix::cholesky(sigma0)?; // SPD check
    let e = matrix::matrix_exp(a, t)?;
    let mu_t = e.matvec(mu0);
    let sigma_t = e.matmul(sigma0).matmul(&e.transpose());
    Ok((mu_t, sigma_t))
}

/// Moments of the linear SDE dX = AX dt + B dW with D = BB^T, integrated by
/// RK4: mu' = A mu, Sigma' = A Sigma + Sigma A^T + D.
pub fn ou_moments(
    a: &Matrix,
    d: &Matrix,
    mu0: &[f64],
    sigma0: &Matrix,
    t: f64,
    steps: usize,
) -> (Vec<f64>, Matrix) {
    assert!(steps >= 1);
    let dt = t / steps as f64;
    let mut mu = mu0.to_vec();
    let mut sigma = sigma0.clone();

    let mu_dot = |m: &[f64]| a.matvec(m);
    let sigma_dot = |s: &Matrix| {
        let as_ = a.matmul(s);
        as_.add(&as_.transpose()).add(d)
    };

    for _ in 0..steps {
        let k1m = mu_dot(&mu);
        let k1s = sigma_dot(&sigma);
        let k2m = mu_dot(&crate::num::axpy(&mu, dt / 2.0, &k1m));
        let k2s = sigma_dot(&sigma.add(&k1s.scale(dt / 2.0)));
        let k3m = mu_dot(&crate::num::axpy(&mu, dt / 2.0, &k2m));
        let k3s = sigma_dot(&sigma.add(&k2s.scale(dt / 2.0)));
        let k4m = mu_dot(&crate::num::axpy(&mu, dt, &k3m));
        let k4s = sigma_dot(&sigma.add(&k3s.scale(dt)));
        for i in 0..mu.len() {
            mu[i] += dt / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]);
        }
        sigma = sigma.add(
            &k1s.add(&k2s.scale(2.0)).add(&k3s.scale(2.0)).add(&k4s).scale(dt / 6.0),
        );
    }
    (mu, sigma)
}

/// One Euler-Maruyama path of dX = f(t,X) dt + g(t) dW on [0,1], returning
/// the terminal state.
pub fn euler_maruyama<F, G>(
    f: F,
    g: G,
    x0: &[f64],
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    G: Fn(f64) -> f64,
{
    assert!(steps >= 1);
    let dt = 1.0 / steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut x = x0.to_vec();
    for step in 0..steps {
        let t = dt * step as f64;
        let drift = f(t, &x);
        let diff = g(t);
        for i in 0..x.len() {
            x[i] += dt * drift[i] + diff * sqrt_dt * rng.normal();
        }
        check_finite(&x)?;
    }
    Ok(x)
}

/// Velocity field of the deterministic flow matching the SDE marginals:
/// v(t,x) = f(t,x) - (g^2/2) s(x).
pub fn probability_flow_velocity<F, S>(
    f: F,
    g: f64,
    score: S,
) -> impl Fn(f64, &[f64]) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    S: Fn(&[f64]) -> Vec<f64>,
{
    let half_g2 = g * g / 2.0;
    move |t, x| {
        let drift = f(t, x);
        let s = score(x);
        drift.iter().zip(&s).map(|(d, si)| d - half_g2 * si).collect()
    }
}

/// Max over random unit perturbations of ||X1(x0 + delta u) - X1(x0)|| / delta.
pub fn sensitivity_ratio<F>(
    field: F,
    x0: &[f64],
    delta: f64,
    cfg: &OdeConfig,
    probes: usize,
    rng: &mut RngStream,
) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    assert!(delta > 0.0);
    let base = ode_integrate(&field, x0, cfg)?;
    let mut worst = 0.0_f64;
    for _ in 0..probes.max(1) {
        let mut u = rng.normal_vec(x0.len());
        let n = crate::num::norm2(&u);
        u.iter_mut().for_each(|v| *v /= n);
        let perturbed: Vec<f64> = x0.iter().zip(&u).map(|(x, ui)| x + delta * ui).collect();
        let end = ode_integrate(&field, &perturbed, cfg)?;
        let ratio = crate::num::dist2(&end, &base).sqrt() / delta;
        worst = worst.max(ratio);
    }
    Ok(worst)
}
