//! Stein-kernel goodness of fit, 1-D Wasserstein distance, and quantile
//! summaries for checking generated distributions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{self, RngStream};

/// Gaussian RBF kernel K(x, x') = exp(-||x-x'||^2 / (2 h^2)).
#[derive(Debug, Clone, Copy)]
pub struct RbfKernel {
    pub bandwidth: f64,
}

impl RbfKernel {
    pub fn new(bandwidth: f64) -> Self {
        assert!(bandwidth > 0.0 && bandwidth.is_finite());
        RbfKernel { bandwidth }
    }
}

/// Kernel Stein test summary.
#[derive(Debug, Clone, Serialize)]
pub struct KsdResult {
    pub statistic: f64,
    pub p_value: f64,
    pub bootstrap_draws: usize,
}

/// Stein kernel for the RBF kernel, evaluated in closed form:
/// u(x,x') = s(x)^T k s(x') + s(x)^T grad_{x'} k + s(x')^T grad_x k
///           + tr grad^2_{x,x'} k,
/// with grad_x k = -((x-x')/h^2) k, grad_{x'} k = ((x-x')/h^2) k and
/// tr grad^2_{x,x'} k = (d/h^2 - ||x-x'||^2/h^4) k.
pub fn stein_kernel_u<S>(x: &[f64], xp: &[f64], score_q: S, k: &RbfKernel) -> Result<f64>
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    if x.len() != xp.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: xp.len() });
    }
    let d = x.len() as f64;
    let h2 = k.bandwidth * k.bandwidth;
    let diff: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
    let r2 = num::dot(&diff, &diff);
    let kv = (-r2 / (2.0 * h2)).exp();
    let sx = score_q(x);
    let sxp = score_q(xp);

    let term1 = num::dot(&sx, &sxp) * kv;
    // s(x)^T grad_{x'} k = s(x)^T ((x-x')/h^2) k
    let term2 = num::dot(&sx, &diff) / h2 * kv;
    // s(x')^T grad_x k = -s(x')^T ((x-x')/h^2) k
    let term3 = -num::dot(&sxp, &diff) / h2 * kv;
    let term4 = (d / h2 - r2 / (h2 * h2)) * kv;
    Ok(term1 + term2 + term3 + term4)
}

/// U-statistic estimate of the kernel Stein discrepancy:
/// (n(n-1))^{-1} sum_{i != j} u(x_i, x_j).
pub fn ksd_ustat<S>(samples: &[Vec<f64>], score_q: S, k: &RbfKernel) -> Result<f64>
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let u = stein_kernel_matrix(samples, &score_q, k)?;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += u[i * n + j];
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Dense Stein kernel matrix u(x_i, x_j); shared by the U-statistic and the
/// bootstrap so the expensive part is computed once.
pub fn stein_kernel_matrix<S>(
    samples: &[Vec<f64>],
    score_q: &S,
    k: &RbfKernel,
) -> Result<Vec<f64>>
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let scores: Vec<Vec<f64>> = samples.iter().map(|x| score_q(x)).collect();
    let d = samples[0].len() as f64;
    let h2 = k.bandwidth * k.bandwidth;
    let mut u = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let diff: Vec<f64> =
                samples[i].iter().zip(&samples[j]).map(|(a, b)| a - b).collect();
            let r2 = num::dot(&diff, &diff);
            let kv = (-r2 / (2.0 * h2)).exp();
            let v = num::dot(&scores[i], &scores[j]) * kv
                + num::dot(&scores[i], &diff) / h2 * kv
                - num::dot(&scores[j], &diff) / h2 * kv
                + (d / h2 - r2 / (h2 * h2)) * kv;
            u[i * n + j] = v;
            u[j * n + i] = v; // symmetric for the RBF closed form
        }
    }
    Ok(u)
}

/// Wild bootstrap calibration of the KSD U-statistic with Rademacher
/// multipliers: T_b = (n(n-1))^{-1} sum_{i != j} w_i w_j u(x_i, x_j), and
/// p = (1 + #{T_b >= T_obs}) / (B + 1).
pub fn ksd_wild_bootstrap<S>(
    samples: &[Vec<f64>],
    score_q: S,
    k: &RbfKernel,
    b: usize,
    rng: &mut RngStream,
) -> Result<KsdResult>
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    assert!(b >= 100, "need at least 100 bootstrap draws");
    let u = stein_kernel_matrix(samples, &score_q, k)?;
    let denom = (n * (n - 1)) as f64;
    let mut t_obs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t_obs += u[i * n + j];
            }
        }
    }
    t_obs /= denom;

    let mut exceed = 0usize;
    let mut w = vec![0.0; n];
    for _ in 0..b {
        for wi in w.iter_mut() {
            *wi = rng.rademacher();
        }
        let mut t = 0.0;
        for i in 0..n {
            let wi = w[i];
            let row = &u[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += w[j] * row[j];
            }
            // drop the diagonal contribution w_i^2 u_ii = u_ii
            t += wi * acc - row[i];
        }
        t /= denom;
        if t >= t_obs {
            exceed += 1;
        }
    }
    Ok(KsdResult {
        statistic: t_obs,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        bootstrap_draws: b,
    })
}

/// Median of pairwise Euclidean distances; exact over all pairs for
/// n <= 2000, subsampled (2000 deterministic pairs) above, floored at 1e-6.
pub fn median_heuristic(samples: &[Vec<f64>]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let mut dists: Vec<f64>;
    if n <= 2000 {
        dists = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(num::dist2(&samples[i], &samples[j]).sqrt());
            }
        }
    } else {
        let mut rng = RngStream::new(0x00AD_41C5, n as u64);
        dists = Vec::with_capacity(2000);
        while dists.len() < 2000 {
            let i = rng.below(n);
            let j = rng.below(n);
            if i != j {
                dists.push(num::dist2(&samples[i], &samples[j]).sqrt());
            }
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    let med = if m % 2 == 1 { dists[m / 2] } else { 0.5 * (dists[m / 2 - 1] + dists[m / 2]) };
    Ok(med.max(1e-6))
}

/// One-dimensional Wasserstein-1 distance between empirical measures.
///
/// Equal sizes: mean |a_(i) - b_(i)| over sorted order. Unequal sizes: exact
/// integral of |F_a^{-1} - F_b^{-1}| over the merged probability grid.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
    }
    let (na, nb) = (sa.len(), sb.len());
    let mut total = 0.0;
    let mut prev = 0.0;
    let (mut ia, mut ib) = (0usize, 0usize);
    // cross-multiplied integer comparison of (ia+1)/na vs (ib+1)/nb keeps the
    // merged-grid walk exact
    while ia < na && ib < nb {
        let ra = (ia + 1) * nb;
        let rb = (ib + 1) * na;
        let next = if ra <= rb {
            (ia + 1) as f64 / na as f64
        } else {
            (ib + 1) as f64 / nb as f64
        };
        total += (next - prev) * (sa[ia] - sb[ib]).abs();
        prev = next;
        if ra <= rb {
            ia += 1;
        }
        if rb <= ra {
            ib += 1;
        }
    }
    Ok(total)
}

/// Empirical quantile with linear interpolation between order statistics.
/// Input must be sorted.
pub fn quantile(sorted: &[f64], alpha: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Quantile treatment effect at level alpha: Q_alpha(s1) - Q_alpha(s0).
pub fn qte(s1: &[f64], s0: &[f64], alpha: f64) -> Result<f64> {
    if s1.is_empty() || s0.is_empty() {
        return Err(Error::EmptySample);
    }
    assert!(alpha > 0.0 && alpha < 1.0);
    let mut a = s1.to_vec();
    let mut b = s0.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(quantile(&a, alpha) - quantile(&b, alpha))
}

/// Paired empirical quantiles at probabilities (i - 1/2)/grid.
pub fn qq_points(a: &[f64], b: &[f64], grid: usize) -> Result<Vec<(f64, f64)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok((1..=grid)
        .map(|i| {
            let p = (i as f64 - 0.5) / grid as f64;
            (quantile(&sa, p), quantile(&sb, p))
        })
        .collect())
}

/// Fraction of intervals containing the truth.
pub fn coverage_check(intervals: &[(f64, f64)], truth: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
    Ok(hits as f64 / intervals.len() as f64)
}

/// Kolmogorov-Smirnov distance of a sample to the U(0,1) law.
pub fn ks_to_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let mut ks = 0.0_f64;
    for (i, x) in s.iter().enumerate() {
        let f = x.clamp(0.0, 1.0);
        ks = ks.max((f - i as f64 / n as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
    }
    ks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_score(x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }

    #[test]
    fn stein_kernel_at_coincidence() {
        let k = RbfKernel::new(0.8);
        // at x = x' = 0 under a standard normal: all score terms vanish
        let u = stein_kernel_u(&[0.0, 0.0], &[0.0, 0.0], std_normal_score, &k).unwrap();
        assert!((u - 2.0 / (0.8 * 0.8)).abs() < 1e-12);

        // general coincidence: s(x)^T s(x) + d/h^2
        let x = [0.7, -1.3];
        let u2 = stein_kernel_u(&x, &x, std_normal_score, &k).unwrap();
        let want = (0.7f64 * 0.7 + 1.3 * 1.3) + 2.0 / (0.8 * 0.8);
        assert!((u2 - want).abs() < 1e-12);
    }

    #[test]
    fn stein_kernel_matches_finite_differences() {
        let k = RbfKernel::new(1.1);
        let x = [0.4, -0.9];
        let xp = [1.2, 0.3];
        let h = 1e-5;
        let kf = |x: &[f64], xp: &[f64]| {
            (-num::dist2(x, xp) / (2.0 * k.bandwidth * k.bandwidth)).exp()
        };
        let sx = std_normal_score(&x);
        let sxp = std_normal_score(&xp);
        let mut grad_xp = [0.0; 2];
        let mut grad_x = [0.0; 2];
        let mut trace = 0.0;
        for j in 0..2 {
            let mut xp_p = xp;
            xp_p[j] += h;
            let mut xp_m = xp;
            xp_m[j] -= h;
            grad_xp[j] = (kf(&x, &xp_p) - kf(&x, &xp_m)) / (2.0 * h);
            let mut x_p = x;
            x_p[j] += h;
            let mut x_m = x;
            x_m[j] -= h;
            grad_x[j] = (kf(&x_p, &xp) - kf(&x_m, &xp)) / (2.0 * h);
            let mut pp = (x, xp);
            pp.0[j] += h;
            pp.1[j] += h;
            let mut pm = (x, xp);
            pm.0[j] += h;
            pm.1[j] -= h;
            let mut mp = (x, xp);
            mp.0[j] -= h;
            mp.1[j] += h;
            let mut mm = (x, xp);
            mm.0[j] -= h;
            mm.1[j] -= h;
            trace += (kf(&pp.0, &pp.1) - kf(&pm.0, &pm.1) - kf(&mp.0, &mp.1)
                + kf(&mm.0, &mm.1))
                / (4.0 * h * h);
        }
        let want = num::dot(&sx, &sxp) * kf(&x, &xp)
            + num::dot(&sx, &grad_xp)
            + num::dot(&sxp, &grad_x)
            + trace;
        let got = stein_kernel_u(&x, &xp, std_normal_score, &k).unwrap();
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }

    #[test]
    fn stein_kernel_symmetry() {
        let k = RbfKernel::new(0.9);
        let mut rng = RngStream::new(77, 0);
        for _ in 0..50 {
            let x = rng.normal_vec(3);
            let y = rng.normal_vec(3);
            let a = stein_kernel_u(&x, &y, std_normal_score, &k).unwrap();
            let b = stein_kernel_u(&y, &x, std_normal_score, &k).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ksd_two_point_definition() {
        let k = RbfKernel::new(1.0);
        let s = vec![vec![0.2], vec![-0.7]];
        let t = ksd_ustat(&s, std_normal_score, &k).unwrap();
        let u12 = stein_kernel_u(&s[0], &s[1], std_normal_score, &k).unwrap();
        let u21 = stein_kernel_u(&s[1], &s[0], std_normal_score, &k).unwrap();
        assert!((t - 0.5 * (u12 + u21)).abs() < 1e-14);
    }

    #[test]
    fn ksd_null_within_jackknife_se() {
        let mut rng = RngStream::new(501, 0);
        let n = 200;
        let samples: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(2)).collect();
        let h = median_heuristic(&samples).unwrap();
        let k = RbfKernel::new(h);
        let t = ksd_ustat(&samples, std_normal_score, &k).unwrap();
        let u = stein_kernel_matrix(&samples, &std_normal_score, &k).unwrap();
        let row_means: Vec<f64> = (0..n)
            .map(|i| {
                (0..n).filter(|&j| j != i).map(|j| u[i * n + j]).sum::<f64>() / (n - 1) as f64
            })
            .collect();
        let se = (4.0 * num::variance(&row_means) / n as f64).sqrt();
        assert!(t.abs() < 3.0 * se, "stat {t} vs 3*SE {}", 3.0 * se);
    }

    #[test]
    fn ksd_detects_mean_shift() {
        let mut rng = RngStream::new(502, 0);
        let n = 200;
        let h_fixed = 1.4;
        let k = RbfKernel::new(h_fixed);
        let mut null_stats = Vec::new();
        for _ in 0..40 {
            let s: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(2)).collect();
            null_stats.push(ksd_ustat(&s, std_normal_score, &k).unwrap());
        }
        let null_sd = num::variance(&null_stats).sqrt();
        let shifted: Vec<Vec<f64>> =
            (0..n).map(|_| rng.normal_vec(2).iter().map(|v| v + 0.5).collect()).collect();
        let t = ksd_ustat(&shifted, std_normal_score, &k).unwrap();
        assert!(t > 5.0 * null_sd, "stat {t} vs null sd {null_sd}");
    }

    #[test]
    fn wild_bootstrap_boundary_inputs() {
        let mut rng = RngStream::new(503, 0);
        let samples = vec![vec![0.1], vec![0.1]];
        let k = RbfKernel::new(1.0);
        let res = ksd_wild_bootstrap(&samples, std_normal_score, &k, 100, &mut rng).unwrap();
        assert!(res.p_value >= 0.0 && res.p_value <= 1.0);
        assert!(res.statistic.is_finite());
    }

    #[test]
    fn median_heuristic_cases() {
        assert_eq!(median_heuristic(&[vec![0.0], vec![2.0]]).unwrap(), 2.0);
        assert_eq!(median_heuristic(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap(), 1e-6);
        // pairwise distances of {0,1,2} are {1,1,2}: median 1
        assert_eq!(median_heuristic(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap(), 1.0);
    }

    #[test]
    fn w1_cases() {
        let a = vec![0.3, -1.0, 2.0];
        assert_eq!(w1_1d(&a, &a).unwrap(), 0.0);
        assert_eq!(w1_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let shifted: Vec<f64> = grid.iter().map(|x| x + 0.3).collect();
        assert!((w1_1d(&grid, &shifted).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn w1_unequal_sizes_matches_shift() {
        let a: Vec<f64> = (0..600).map(|i| (i as f64 + 0.5) / 600.0).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 + 0.25).collect();
        let w = w1_1d(&a, &b).unwrap();
        assert!((w - 0.25).abs() < 2e-3, "w1 {w}");
    }

    #[test]
    fn qte_cases() {
        let mut rng = RngStream::new(504, 0);
        let s: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        for &alpha in &[0.1, 0.5, 0.9] {
            assert_eq!(qte(&s, &s, alpha).unwrap(), 0.0);
            let shifted: Vec<f64> = s.iter().map(|x| x + 1.7).collect();
            assert!((qte(&shifted, &s, alpha).unwrap() - 1.7).abs() < 1e-12);
        }
        let big1: Vec<f64> = (0..40_000).map(|_| 1.0 + rng.normal()).collect();
        let big0: Vec<f64> = (0..40_000).map(|_| rng.normal()).collect();
        for &alpha in &[0.1, 0.5, 0.9] {
            let q = qte(&big1, &big0, alpha).unwrap();
            assert!((q - 1.0).abs() < 0.1, "alpha {alpha}: {q}");
        }
    }

    #[test]
    fn qte_monotone_in_shift() {
        let mut rng = RngStream::new(507, 0);
        let s0: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
        let mut prev = f64::NEG_INFINITY;
        for &c in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let s1: Vec<f64> = s0.iter().map(|x| x + c).collect();
            let q = qte(&s1, &s0, 0.3).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn qq_cases() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        for (qa, qb) in qq_points(&a, &a, 20).unwrap() {
            assert_eq!(qa, qb);
        }
        let centered: Vec<f64> = (0..100).map(|i| i as f64 - 49.5).collect();
        let doubled: Vec<f64> = centered.iter().map(|x| 2.0 * x).collect();
        for (qa, qb) in qq_points(&centered, &doubled, 10).unwrap() {
            assert!((qb - 2.0 * qa).abs() < 1e-12);
        }
        // heavier upper tail departs above the diagonal
        let mut rng = RngStream::new(505, 0);
        let gauss: Vec<f64> = (0..20_000).map(|_| rng.normal()).collect();
        let heavy: Vec<f64> = (0..20_000)
            .map(|_| if rng.bernoulli(0.1) { 3.0 * rng.normal() } else { rng.normal() })
            .collect();
        let pts = qq_points(&gauss, &heavy, 100).unwrap();
        let top = &pts[97..];
        assert!(top.iter().all(|(qa, qb)| qb > qa), "upper tail should depart above");
    }

    #[test]
    fn coverage_cases() {
        assert_eq!(coverage_check(&[(0.0, 1.0), (-1.0, 2.0)], 0.5).unwrap(), 1.0);
        assert_eq!(coverage_check(&[(1.0, 2.0)], 0.0).unwrap(), 0.0);
        assert!(coverage_check(&[], 0.0).is_err());
    }

    #[test]
    fn w1_metric_axioms_on_samples() {
        let mut rng = RngStream::new(506, 0);
        for _ in 0..20 {
            let a: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..40).map(|_| rng.normal() + 0.3).collect();
            let c: Vec<f64> = (0..40).map(|_| 1.2 * rng.normal()).collect();
            let dab = w1_1d(&a, &b).unwrap();
            let dba = w1_1d(&b, &a).unwrap();
            let dac = w1_1d(&a, &c).unwrap();
            let dcb = w1_1d(&c, &b).unwrap();
            assert!(dab >= 0.0);
            assert!((dab - dba).abs() < 1e-12);
            assert!(dab <= dac + dcb + 1e-12);
        }
    }
}
