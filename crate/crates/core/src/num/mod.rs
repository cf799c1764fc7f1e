//! Dense linear algebra and seeded random streams.
//!
//! Everything here targets desk-scale problems (d <= a few hundred); storage
//! is row-major dense, and all routines are pure functions of their inputs.

pub mod matrix;
mod rng;
pub mod special;

pub use matrix::{
    cholesky, eig_extremes, inverse_spd, logdet_spd, matrix_exp, op_norm_sym, solve_spd, Matrix,
    SpdFactor,
};
pub use rng::RngStream;

/// Centered sample covariance with 1/n normalization.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let d = rows[0].len();
    let mut mu = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mu[j] += r[j];
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let mut s = Matrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let ci = r[i] - mu[i];
            for j in i..d {
                let v = s.get(i, j) + ci * (r[j] - mu[j]);
                s.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = s.get(i, j) / n as f64;
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean distance between two points.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `a + s * b` elementwise.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Mean of a slice. Returns NaN on empty input.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean: sd / sqrt(n).
pub fn stderr_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Least-squares line fit, returning (intercept, slope).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Least-squares quadratic fit, returning (c0, c1, c2) for c0 + c1 x + c2 x^2.
pub fn quadratic_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3);
    let mut m = Matrix::zeros(3, 3);
    let mut b = vec![0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let phi = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, m.get(i, j) + phi[i] * phi[j]);
            }
            b[i] += phi[i] * y;
        }
    }
    let f = matrix::cholesky(&m).expect("quadratic design is nonsingular");
    let c = matrix::solve_spd(&f, &b).expect("dims fixed");
    (c[0], c[1], c[2])
}
