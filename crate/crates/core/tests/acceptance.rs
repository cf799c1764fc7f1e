//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//! Tolerances are pinned in the assertions.

use flowstat::copula::{
    default_clip, flow_copula_train, kendall_tau, ranks_to_pseudo, UnitTransform,
};
use flowstat::demos;
use flowstat::diagnostics::{
    coverage_check, ks_to_uniform, ksd_wild_bootstrap, median_heuristic, qq_points, w1_1d,
    RbfKernel,
};
use flowstat::flow::{
    cfm_train, logdensity_along_flow, ode_integrate, CfmConfig, CouplingKind, OdeConfig, Scheme,
};
use flowstat::inference::{
    ate_crossfit, linear_learner_known_e, mean_aipw_moment, mean_gformula_moment,
    mean_ipw_moment, ols_no_intercept, orthogonality_fd_check, semiparam_linreg_fit,
    FittedNuisance, MomentSource, NuisanceComponent,
};
use flowstat::missing::{rubin_combine, solve_tilt};
use flowstat::mlp::TrainConfig;
use flowstat::num::special::sigmoid;
use flowstat::num::{self, matrix, Matrix, RngStream};
use flowstat::scorematch::{
    ggm_sm_prox_fit, james_stein_risk, quartic_sm_fit, GgmProblem,
};

use std::rc::Rc;

fn report(id: u32, name: &str, detail: &str) {
    println!("[acceptance] criterion {id:02} PASS - {name}: {detail}");
}

#[test]
fn acceptance_01_ggm_benchmark_ordering() {
    let start = std::time::Instant::now();
    let cfg = demos::GgmBenchConfig::default();
    let reps = 10;
    let mut wins_rmse = 0;
    let mut wins_ct = 0;
    for rep in 0..reps {
        let r = demos::ggm_bench_replicate(&cfg, 1, rep);
        if r.rmse_sm < r.rmse_mle {
            wins_rmse += 1;
        }
        if r.ct_sm < r.ct_mle {
            wins_ct += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(wins_rmse >= 9, "RMSE ordering held in only {wins_rmse}/10 replicates");
    assert!(wins_ct >= 9, "time ordering held in only {wins_ct}/10 replicates");
    assert!(elapsed < 120.0, "benchmark took {elapsed:.1} s");
    report(
        1,
        "precision-matrix benchmark",
        &format!("rmse ordering {wins_rmse}/10, time ordering {wins_ct}/10, {elapsed:.1} s"),
    );
}

#[test]
fn acceptance_02_unregularized_identity() {
    let mut rng = RngStream::new(2, 0);
    let d = 10;
    let rows: Vec<Vec<f64>> = (0..200).map(|_| rng.normal_vec(d)).collect();
    let s = num::sample_covariance(&rows);
    let problem = GgmProblem { s: s.clone(), lambda: 0.0, rho: 0.0, max_iters: 5000 };
    let est = ggm_sm_prox_fit(&problem);
    let f = matrix::cholesky(&s).unwrap();
    let s_inv = matrix::inverse_spd(&f);
    let rel = est.k.sub(&s_inv).frobenius_norm() / s_inv.frobenius_norm();
    assert!(rel < 1e-6, "relative error {rel}");
    report(2, "unregularized estimate equals the inverse covariance", &format!("rel {rel:.2e}"));
}

#[test]
fn acceptance_03_quartic_fit() {
    let mut rng = RngStream::new(3, 0);
    let samples: Vec<f64> = (0..50_000).map(|_| rng.normal()).collect();
    let theta = quartic_sm_fit(&samples).unwrap();
    assert!(theta.t1.abs() < 0.05, "t1 {}", theta.t1);
    assert!((theta.t2 + 0.5).abs() < 0.05, "t2 {}", theta.t2);
    assert!(theta.t3.abs() < 0.05, "t3 {}", theta.t3);
    report(
        3,
        "quartic score-matching fit",
        &format!("theta = ({:.4}, {:.4}, {:.4})", theta.t1, theta.t2, theta.t3),
    );
}

#[test]
fn acceptance_04_shrinkage_risk_identity() {
    let mut rng = RngStream::new(4, 0);
    let est = james_stein_risk(3, &[0.0; 3], 100_000, &mut rng).unwrap();
    assert!((est.direct - 2.0).abs() < 0.1, "direct risk {}", est.direct);
    assert!((est.stein - 2.0).abs() < 0.1, "divergence-form risk {}", est.stein);
    let combined = (est.direct_se.powi(2) + est.stein_se.powi(2)).sqrt();
    assert!(
        (est.direct - est.stein).abs() < 3.0 * combined,
        "evaluations disagree: {} vs {}",
        est.direct,
        est.stein
    );
    report(
        4,
        "shrinkage risk identity",
        &format!("direct {:.4}, divergence form {:.4}", est.direct, est.stein),
    );
}

#[test]
fn acceptance_05_ode_convergence_orders() {
    let a = Matrix::from_rows(&[&[0.4, -1.1], &[0.9, -0.3]]);
    let x0 = vec![0.8, -1.4];
    let truth = matrix::matrix_exp(&a, 1.0).unwrap().matvec(&x0);
    let ks = [10usize, 20, 40, 80, 160];
    let mut slopes = Vec::new();
    for &scheme in &[Scheme::Euler, Scheme::Rk4] {
        let (lk, le): (Vec<f64>, Vec<f64>) = ks
            .iter()
            .map(|&k| {
                let cfg = OdeConfig::forward(k, scheme);
                let got = ode_integrate(|_t, x: &[f64]| a.matvec(x), &x0, &cfg).unwrap();
                ((k as f64).ln(), num::dist2(&got, &truth).sqrt().ln())
            })
            .unzip();
        slopes.push(-num::linear_fit(&lk, &le).1);
    }
    assert!(slopes[0] > 0.7 && slopes[0] < 1.3, "Euler slope {}", slopes[0]);
    assert!(slopes[1] >= 3.5, "RK4 slope {}", slopes[1]);

    let got100 =
        ode_integrate(|_t, x: &[f64]| a.matvec(x), &x0, &OdeConfig::forward(100, Scheme::Rk4))
            .unwrap();
    let rel = num::dist2(&got100, &truth).sqrt() / num::norm2(&truth);
    assert!(rel < 1e-6, "K=100 endpoint error {rel}");
    report(
        5,
        "integrator convergence orders",
        &format!("Euler slope {:.2}, RK4 slope {:.2}, K=100 rel {rel:.1e}", slopes[0], slopes[1]),
    );
}

#[test]
fn acceptance_06_logdensity_transport() {
    let a = Matrix::from_rows(&[&[0.5, 0.3], &[-0.2, -0.1]]);
    let field = |_t: f64, x: &[f64]| a.matvec(x);
    let div = |_t: f64, _x: &[f64]| a.trace();
    let cfg = OdeConfig::forward(64, Scheme::Rk4);
    let (_, ell1) = logdensity_along_flow(field, div, &[1.0, 1.0], 0.0, &cfg).unwrap();
    assert!((ell1 + a.trace()).abs() < 1e-8, "t=1 correction {ell1}");
    // time-scaled field emulates stopping at t = 0.5
    let half = |s: f64, x: &[f64]| {
        let _ = s;
        a.matvec(x).iter().map(|v| 0.5 * v).collect::<Vec<_>>()
    };
    let (_, ell_half) =
        logdensity_along_flow(half, |_s, _x| 0.5 * a.trace(), &[1.0, 1.0], 0.0, &cfg).unwrap();
    assert!((ell_half + 0.5 * a.trace()).abs() < 1e-8, "t=0.5 correction {ell_half}");
    report(
        6,
        "log-density transport on linear fields",
        &format!("corrections {ell1:.10} and {ell_half:.10}"),
    );
}

#[test]
fn acceptance_07_cfm_gaussian_benchmark() {
    let mut details = Vec::new();
    for seed in [701u64, 702, 703] {
        let mut rng = RngStream::new(seed, 0);
        let data: Vec<Vec<f64>> = (0..5000).map(|_| vec![2.0 + rng.normal()]).collect();
        let cfg = CfmConfig {
            train: TrainConfig {
                epochs: 80,
                batch_size: 64,
                step_size: 3e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = cfm_train(&data, &cfg, &mut rng).unwrap();
        let generated: Vec<f64> = model
            .sample(5000, &OdeConfig::forward(100, Scheme::Rk4), &mut rng)
            .unwrap()
            .iter()
            .map(|s| s[0])
            .collect();
        let target: Vec<f64> = (0..5000).map(|_| 2.0 + rng.normal()).collect();
        let w1 = w1_1d(&generated, &target).unwrap();
        assert!(w1 < 0.08, "seed {seed}: W1 {w1}");
        details.push(format!("{w1:.4}"));
    }
    report(7, "flow-matching Gaussian benchmark", &format!("W1 = {}", details.join(", ")));
}

#[test]
fn acceptance_08_coupling_variance_reduction() {
    let mut rng = RngStream::new(8, 0);
    let data = demos::two_cluster(2000, &mut rng);
    let ind = flowstat::flow::teacher_signal_1d(
        &data,
        CouplingKind::Independent,
        64,
        150,
        &mut rng.substream(1),
    )
    .unwrap();
    let ot = flowstat::flow::teacher_signal_1d(
        &data,
        CouplingKind::Assignment,
        64,
        150,
        &mut rng.substream(2),
    )
    .unwrap();
    let vi = flowstat::flow::binned_signal_variance(&ind, 8, 16, -4.0, 4.0, 12);
    let vo = flowstat::flow::binned_signal_variance(&ot, 8, 16, -4.0, 4.0, 12);
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
    let frac = lower as f64 / total.max(1) as f64;
    assert!(total >= 20, "only {total} occupied bins");
    assert!(frac >= 0.7, "assignment lower on only {frac:.2} of {total} bins");
    report(
        8,
        "assignment coupling reduces teacher variance",
        &format!("lower variance on {lower}/{total} occupied bins"),
    );
}

#[test]
fn acceptance_09_ksd_level_and_power() {
    let n = 200;
    let d = 2;
    let b = 300;
    let reps = 200;
    let score = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<_>>();

    let mut rejections_null = 0;
    let mut rejections_alt = 0;
    for rep in 0..reps {
        let mut rng = RngStream::new(9, 1000 + rep);
        let null: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d)).collect();
        let h = median_heuristic(&null).unwrap();
        let res = ksd_wild_bootstrap(&null, score, &RbfKernel::new(h), b, &mut rng).unwrap();
        if res.p_value < 0.05 {
            rejections_null += 1;
        }

        let mut rng2 = RngStream::new(9, 2000 + rep);
        let alt: Vec<Vec<f64>> = (0..n)
            .map(|_| rng2.normal_vec(d).iter().map(|v| v + 1.0).collect())
            .collect();
        let h2 = median_heuristic(&alt).unwrap();
        let res2 =
            ksd_wild_bootstrap(&alt, score, &RbfKernel::new(h2), b, &mut rng2).unwrap();
        if res2.p_value < 0.05 {
            rejections_alt += 1;
        }
    }
    let level = rejections_null as f64 / reps as f64;
    let power = rejections_alt as f64 / reps as f64;
    assert!((0.02..=0.10).contains(&level), "level {level}");
    assert!(power >= 0.9, "power {power}");
    report(9, "kernel Stein test level and power", &format!("level {level:.3}, power {power:.3}"));
}

#[test]
fn acceptance_10_ddml_coverage_and_double_robustness() {
    // coverage on the randomized design
    let tau = 1.0;
    let reps = 200;
    let root = RngStream::new(10, 0);
    let mut intervals = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = root.substream(r as u64);
        let data = demos::ate_coverage_sample(400, tau, &mut rng);
        let rep = ate_crossfit(&data, 4, &linear_learner_known_e(0.5), 0.01, &mut rng).unwrap();
        intervals.push(rep.ci95);
    }
    let coverage = coverage_check(&intervals, tau).unwrap();
    assert!((0.90..=0.985).contains(&coverage), "coverage {coverage}");

    // double robustness under single-nuisance misspecification at n = 4000
    let mut rng = RngStream::new(10, 77_000);
    let n = 4000;
    let data: Vec<flowstat::inference::Observation> = (0..n)
        .map(|_| {
            let x = rng.normal_vec(3);
            let e = sigmoid(0.8 * x[0] - 0.6 * x[1]);
            let a = u8::from(rng.bernoulli(e));
            let mu = 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2];
            let y = mu + tau * a as f64 + 0.7 * rng.normal();
            flowstat::inference::Observation::new(x, a, y)
        })
        .collect();
    let nu_mu_wrong = FittedNuisance {
        mu0: Rc::new(|_: &[f64]| 0.0),
        mu1: Rc::new(|_: &[f64]| 0.0),
        e: Rc::new(|x: &[f64]| sigmoid(0.8 * x[0] - 0.6 * x[1])),
    };
    let nu_e_wrong = FittedNuisance {
        mu0: Rc::new(|x: &[f64]| 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2]),
        mu1: Rc::new(move |x: &[f64]| 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2] + tau),
        e: Rc::new(|_: &[f64]| 0.5),
    };
    for (name, nu) in [("mu-wrong", &nu_mu_wrong), ("e-wrong", &nu_e_wrong)] {
        let scores: Vec<f64> = data
            .iter()
            .map(|o| flowstat::inference::aipw_uncentered(o, nu, 0.01))
            .collect();
        let psi = num::mean(&scores);
        let se = num::stderr_mean(&scores);
        assert!((psi - tau).abs() < 3.0 * se, "{name}: {psi} +- {se}");
    }
    report(10, "doubly robust cross-fitted effect", &format!("coverage {coverage:.3}"));
}

#[test]
fn acceptance_11_orthogonality_contrast() {
    let mut rng = RngStream::new(11, 0);
    let tau = 1.0;
    let n = 20_000;
    let data: Vec<flowstat::inference::Observation> = (0..n)
        .map(|_| {
            let x = rng.normal_vec(3);
            let e = sigmoid(0.8 * x[0] - 0.6 * x[1]);
            let a = u8::from(rng.bernoulli(e));
            let mu = 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2];
            let y = mu + tau * a as f64 + 0.7 * rng.normal();
            flowstat::inference::Observation::new(x, a, y)
        })
        .collect();
    let nu = FittedNuisance {
        mu0: Rc::new(|x: &[f64]| 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2]),
        mu1: Rc::new(move |x: &[f64]| 1.0 + 0.8 * x[0] - 0.5 * x[1] + 0.3 * x[2] + tau),
        e: Rc::new(|x: &[f64]| sigmoid(0.8 * x[0] - 0.6 * x[1])),
    };
    let grid = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let directions: Vec<(NuisanceComponent, Rc<dyn Fn(&[f64]) -> f64>, bool)> = vec![
        (NuisanceComponent::Mu1, Rc::new(|x: &[f64]| 1.0 + 0.5 * x[0]), false),
        (NuisanceComponent::Mu0, Rc::new(|x: &[f64]| 1.0 - 0.4 * x[1]), false),
        (NuisanceComponent::Propensity, Rc::new(|_: &[f64]| 0.1), true),
        (NuisanceComponent::Propensity, Rc::new(|x: &[f64]| 0.2 * sigmoid(x[0]) - 0.05), true),
    ];
    let mut ratios = Vec::new();
    for (k, (component, h, is_e)) in directions.iter().enumerate() {
        let aipw_slope = orthogonality_fd_check(
            |eps| {
                let p = nu.perturb(*component, h.clone(), eps);
                mean_aipw_moment(&data, &p, 0.01, tau)
            },
            &grid,
        );
        let naive_slope = orthogonality_fd_check(
            |eps| {
                let p = nu.perturb(*component, h.clone(), eps);
                if *is_e {
                    mean_ipw_moment(&data, &p, 0.01, tau)
                } else {
                    mean_gformula_moment(&data, &p, tau)
                }
            },
            &grid,
        );
        let ratio = naive_slope.abs() / aipw_slope.abs().max(1e-12);
        assert!(
            ratio >= 5.0,
            "direction {k}: naive {naive_slope:.4} vs orthogonal {aipw_slope:.4}"
        );
        ratios.push(format!("{ratio:.0}x"));
    }
    report(11, "orthogonality slope contrast", &format!("ratios {}", ratios.join(", ")));
}

#[test]
fn acceptance_12_causal_demo() {
    let cfg = demos::CausalDemoConfig::default();
    let demo = demos::run_causal_demo(&cfg, 12).unwrap();

    let w1_base = w1_1d(&demo.arms[1].truth, &demo.arms[1].baseline).unwrap();
    let w1_flow = w1_1d(&demo.arms[1].truth, &demo.arms[1].flow).unwrap();
    assert!(w1_flow < w1_base, "flow W1 {w1_flow} !< baseline W1 {w1_base}");

    // baseline underestimates the upper tail of do(1)
    let pts = qq_points(&demo.arms[1].truth, &demo.arms[1].baseline, 100).unwrap();
    let top = &pts[90..];
    let gap = num::mean(&top.iter().map(|(qt, qb)| qt - qb).collect::<Vec<_>>());
    assert!(gap > 0.0, "top-decile QQ gap {gap}");

    let ate_truth = demo.ate(|a| &a.truth);
    for (name, pick) in [
        ("baseline", (|a: &demos::ArmEstimates| &a.baseline) as fn(&demos::ArmEstimates) -> &Vec<f64>),
        ("flow", |a: &demos::ArmEstimates| &a.flow),
    ] {
        let ate = demo.ate(pick);
        let se = demo.ate_se(pick);
        assert!(
            (ate - ate_truth).abs() < 3.0 * se,
            "{name} ATE {ate} vs truth {ate_truth} (SE {se})"
        );
    }
    report(
        12,
        "interventional-distribution demo",
        &format!("W1 flow {w1_flow:.3} < baseline {w1_base:.3}, tail gap {gap:.3}"),
    );
}

#[test]
fn acceptance_13_mi_demo() {
    let cfg = demos::MiStudyConfig::default();
    let out = demos::run_mi_study(&cfg, 13).unwrap();
    assert!(
        out.w1_flow < out.w1_chained,
        "flow W1 {} !< chained W1 {}",
        out.w1_flow,
        out.w1_chained
    );
    assert!(out.flow_mode_mass.0 >= 0.2, "lower-mode mass {}", out.flow_mode_mass.0);
    assert!(out.flow_mode_mass.1 >= 0.2, "upper-mode mass {}", out.flow_mode_mass.1);
    let se = out.rubin_flow.se();
    for j in 0..4 {
        let err = (out.rubin_flow.theta_bar[j] - demos::MI_BETA[j]).abs();
        assert!(
            err < 3.0 * se[j],
            "beta{j}: {} vs {} (SE {})",
            out.rubin_flow.theta_bar[j],
            demos::MI_BETA[j],
            se[j]
        );
    }
    report(
        13,
        "imputation demo",
        &format!(
            "W1 flow {:.4} < chained {:.4}; mode masses ({:.2}, {:.2})",
            out.w1_flow, out.w1_chained, out.flow_mode_mass.0, out.flow_mode_mass.1
        ),
    );
}

#[test]
fn acceptance_14_rubin_arithmetic() {
    let res = rubin_combine(
        &[vec![1.0], vec![3.0]],
        &[Matrix::from_rows(&[&[1.0]]), Matrix::from_rows(&[&[1.0]])],
    )
    .unwrap();
    assert!((res.theta_bar[0] - 2.0).abs() < 1e-12);
    assert!((res.total.get(0, 0) - 4.0).abs() < 1e-12);
    report(14, "combination arithmetic", "theta 2, total variance 4 (exact)");
}

#[test]
fn acceptance_15_tilt_closed_form() {
    // stratified draws from the nominal law: inverse CDF at midpoints, the
    // standard variance-reduced way to spend a 1e6-draw budget on a scalar
    let n = 1_000_000;
    let ell: Vec<f64> = (0..n)
        .map(|i| flowstat::num::special::normal_inv_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    let sol = solve_tilt(&ell, 0.5).unwrap();
    assert!((sol.eta - 1.0).abs() < 1e-3, "eta {}", sol.eta);
    report(15, "worst-case tilt", &format!("eta {:.5} (target 1.0)", sol.eta));
}

#[test]
fn acceptance_16_efficient_score_reduction() {
    // Gaussian-pinned moments reduce the fit to OLS
    let mut rng = RngStream::new(16, 0);
    let beta_true = [1.2, -0.4, 0.9];
    let xs: Vec<Vec<f64>> = (0..500).map(|_| rng.normal_vec(3)).collect();
    let ys: Vec<f64> =
        xs.iter().map(|x| num::dot(x, &beta_true) + 0.8 * rng.normal()).collect();
    let fit = semiparam_linreg_fit(
        &xs,
        &ys,
        5,
        MomentSource::Fixed { mu3: 0.0, mu4: 3.0 },
        &mut rng,
    )
    .unwrap();
    let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
    let ols_beta = ols_no_intercept(&refs, &ys).unwrap();
    let mut max_gap = 0.0_f64;
    for j in 0..3 {
        max_gap = max_gap.max((fit.beta[j] - ols_beta[j]).abs());
    }
    assert!(max_gap < 1e-6, "OLS gap {max_gap}");

    // efficiency under centered-exponential errors over 200 replicates
    let reps = 200;
    let n = 400;
    let bt = [1.0, -0.5];
    let root = RngStream::new(16, 500);
    let mut mse_semi = 0.0;
    let mut mse_ols = 0.0;
    for r in 0..reps {
        let mut rng = root.substream(r as u64);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(2)).collect();
        let ys: Vec<f64> =
            xs.iter().map(|x| num::dot(x, &bt) + 0.6 * (rng.exp1() - 1.0)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let ob = ols_no_intercept(&refs, &ys).unwrap();
        let fit =
            semiparam_linreg_fit(&xs, &ys, 4, MomentSource::EstimateFromResiduals, &mut rng)
                .unwrap();
        for j in 0..2 {
            mse_semi += (fit.beta[j] - bt[j]).powi(2) / reps as f64;
            mse_ols += (ob[j] - bt[j]).powi(2) / reps as f64;
        }
    }
    assert!(mse_semi <= mse_ols, "MSE semi {mse_semi} > OLS {mse_ols}");
    report(
        16,
        "efficient-score reduction and gain",
        &format!("OLS gap {max_gap:.1e}; MSE ratio {:.2}", mse_ols / mse_semi),
    );
}

#[test]
fn acceptance_17_copula_suite() {
    // rank invariance is exact
    let mut rng = RngStream::new(17, 0);
    let n = 4000;
    let mut x = Matrix::zeros(n, 2);
    for i in 0..n {
        let z1 = rng.normal();
        let z2 = 0.5 * z1 + (0.75f64).sqrt() * rng.normal();
        x.set(i, 0, z1);
        x.set(i, 1, z2);
    }
    let mut y = Matrix::zeros(n, 2);
    for i in 0..n {
        y.set(i, 0, x.get(i, 0).exp());
        y.set(i, 1, 3.0 * x.get(i, 1) - 4.0);
    }
    let eps = default_clip(n);
    let px = ranks_to_pseudo(&x, eps).unwrap();
    let py = ranks_to_pseudo(&y, eps).unwrap();
    assert_eq!(px.u.data(), py.u.data(), "pseudo-observations must be rank-invariant");

    // data-side dependence summary
    let tau_data = kendall_tau(&px.u).unwrap();
    assert!((tau_data - 1.0 / 3.0).abs() < 0.05, "data tau {tau_data}");

    // trained copula: uniform marginals and preserved dependence
    let cfg = CfmConfig {
        train: TrainConfig {
            epochs: 60,
            batch_size: 128,
            step_size: 2e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let model = flow_copula_train(&x, UnitTransform::Logit, &cfg, &mut rng).unwrap();
    let samples = model
        .sample(5000, &OdeConfig::forward(40, Scheme::Rk4), &mut rng)
        .unwrap();
    for j in 0..2 {
        let col: Vec<f64> = (0..samples.rows()).map(|i| samples.get(i, j)).collect();
        let ks = ks_to_uniform(&col);
        assert!(ks < 0.05, "column {j}: KS {ks}");
    }
    let tau_gen = kendall_tau(&samples).unwrap();
    assert!((tau_gen - 1.0 / 3.0).abs() < 0.05, "generated tau {tau_gen}");
    report(
        17,
        "copula suite",
        &format!("data tau {tau_data:.3}, generated tau {tau_gen:.3}"),
    );
}

#[test]
fn acceptance_18_sensitivity_and_lipschitz() {
    let cfg = demos::StabilityMapConfig::default();
    let map = demos::stability_map(&cfg, 18).unwrap();
    let bound = cfg.spectral_cap.exp() * 1.05;
    assert!(
        map.max_clamped <= bound,
        "clamped max ratio {} exceeds {bound}",
        map.max_clamped
    );
    assert!(
        map.max_standard > map.max_clamped,
        "standard max {} not above clamped {}",
        map.max_standard,
        map.max_clamped
    );
    report(
        18,
        "sensitivity control",
        &format!(
            "clamped max {:.3} <= {bound:.3}, standard max {:.3}",
            map.max_clamped, map.max_standard
        ),
    );
}
