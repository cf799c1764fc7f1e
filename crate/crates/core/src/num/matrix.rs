use crate::error::{Error, Result};

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = d[i];
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Max |a_ij - a_ji| over all pairs; zero for exactly symmetric matrices.
    pub fn asymmetry(&self) -> f64 {
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_scaled_identity(&self, s: f64) -> Matrix {
        assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += s;
        }
        out
    }

    /// Matrix product via the tuned dgemm kernel (the only hot path at d=200).
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                other.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| super::dot(self.row(i), x)).collect()
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Matrix,
}

impl SpdFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// Reconstructs L * L^T.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let l = &self.lower;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..=j {
                    s += l.get(i, k) * l.get(j, k);
                }
                a.set(i, j, s);
                a.set(j, i, s);
            }
        }
        a
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Fails with `NotPositiveDefinite` when any pivot drops below
/// `1e-12 * max diagonal`.
pub fn cholesky(a: &Matrix) -> Result<SpdFactor> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(1e-300);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= tol {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(SpdFactor { lower: l })
}

/// Solves `a x = b` given the Cholesky factor of `a`.
pub fn solve_spd(f: &SpdFactor, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let l = &f.lower;
    // forward: L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // backward: L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

/// log det of the factored SPD matrix: 2 * sum log L_ii.
pub fn logdet_spd(f: &SpdFactor) -> f64 {
    let n = f.dim();
    2.0 * (0..n).map(|i| f.lower.get(i, i).ln()).sum::<f64>()
}

/// Full inverse from a Cholesky factor (used by the glasso gradient).
pub fn inverse_spd(f: &SpdFactor) -> Matrix {
    let n = f.dim();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solve_spd(f, &e).expect("dimension fixed");
        e[j] = 0.0;
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    inv.symmetrize();
    inv
}

/// Matrix exponential e^{tA} by scaling-and-squaring with an order-12 series.
///
/// Scales until ||tA||_inf <= 0.5 before the Taylor sum, then squares back.
pub fn matrix_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let b0 = a.scale(t);
    let norm = b0.inf_norm();
    if !norm.is_finite() {
        return Err(Error::Overflow);
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let b = b0.scale(0.5f64.powi(squarings as i32));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=12 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        result = result.add(&term);
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.all_finite() {
        return Err(Error::Overflow);
    }
    Ok(result)
}

/// Largest absolute eigenvalue of a symmetric matrix.
///
/// Runs shifted power iterations on A + cI and cI - A (both PSD for
/// c = ||A||_F), which keeps the dominant eigenvalue unique in magnitude even
/// when the spectrum straddles zero.
pub fn op_norm_sym(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let c = a.frobenius_norm();
    if c == 0.0 {
        return Ok(0.0);
    }
    let lambda_max = shifted_power(a, c, 1.0)?;
    let lambda_min_neg = shifted_power(a, c, -1.0)?;
    Ok(lambda_max.max(lambda_min_neg))
}

/// Solves a x = b for symmetric near-PSD a, escalating a relative ridge when
/// the plain Cholesky fails.
pub fn ridge_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let scale = (a.trace().abs() / a.rows().max(1) as f64).max(1e-300);
    let mut lam = 0.0;
    for k in 0..14 {
        let shifted = if lam > 0.0 { a.add_scaled_identity(lam) } else { a.clone() };
        if let Ok(f) = cholesky(&shifted) {
            return solve_spd(&f, b);
        }
        lam = scale * 1e-12 * 10f64.powi(k);
    }
    Err(Error::SingularSystem)
}

/// Extreme eigenvalues (min, max) of a symmetric matrix via the same
/// shifted power iterations.
pub fn eig_extremes(a: &Matrix) -> Result<(f64, f64)> {
    let c = a.frobenius_norm();
    if c == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lambda_max = shifted_power(a, c, 1.0)?;
    let lambda_min = -shifted_power(a, c, -1.0)?;
    Ok((lambda_min, lambda_max))
}

/// Dominant eigenvalue of `sign*A + cI` minus c.
fn shifted_power(a: &Matrix, c: f64, sign: f64) -> Result<f64> {
    let n = a.rows();
    // deterministic start with spread, nonzero components
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt()).collect();
    let nv = super::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let max_iters = 10_000;
    let mut prev = f64::INFINITY;
    for it in 0..max_iters {
        // w = (sign*A + cI) v
        let mut w = a.matvec(&v);
        for i in 0..n {
            w[i] = sign * w[i] + c * v[i];
        }
        let lambda = super::dot(&v, &w);
        let nw = super::norm2(&w);
        if nw == 0.0 {
            return Ok(-c);
        }
        v = w.iter().map(|x| x / nw).collect();
        if (lambda - prev).abs() <= 1e-10 * lambda.abs().max(1.0) && it > 2 {
            return Ok(lambda - c);
        }
        prev = lambda;
    }
    Err(Error::NoConvergence { iters: max_iters })
}
