//! Precision-matrix benchmark: regularized score matching (proximal
//! gradient, fixed step) against the penalized-likelihood baseline, comparing
//! elementwise RMSE and wall-clock time over replicates.

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use flowstat::demos::{ggm_bench_replicate, GgmBenchConfig, GgmRepResult};
use flowstat::num;

use crate::csvio::{format_f64, CsvTable};
use crate::manifest::RunContext;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub reps: usize,
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub sm_iters: usize,
    pub glasso_iters: usize,
    pub sparsity: f64,
    pub edge_value: f64,
}

impl Default for Config {
    fn default() -> Self {
        let base = GgmBenchConfig::default();
        Config {
            seed: 1,
            d: base.d,
            n: base.n,
            reps: 10,
            lambda: base.lambda,
            rho: base.rho,
            alpha: base.alpha,
            sm_iters: base.sm_iters,
            glasso_iters: base.glasso_iters,
            sparsity: base.sparsity,
            edge_value: base.edge_value,
        }
    }
}

impl Config {
    fn bench(&self) -> GgmBenchConfig {
        GgmBenchConfig {
            d: self.d,
            n: self.n,
            lambda: self.lambda,
            rho: self.rho,
            alpha: self.alpha,
            sm_iters: self.sm_iters,
            glasso_iters: self.glasso_iters,
            sparsity: self.sparsity,
            edge_value: self.edge_value,
        }
    }
}

pub fn run(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: Config = ctx.config()?;
    cfg.seed = ctx.seed;
    if let Some(r) = ctx.reps_override {
        cfg.reps = r;
    }
    let bench = cfg.bench();

    ctx.stage("replicates");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.threads).build()?;
    let results: Vec<GgmRepResult> = pool.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| ggm_bench_replicate(&bench, cfg.seed, rep))
            .collect()
    });

    ctx.stage("outputs");
    let mut table = CsvTable::new(&["rep", "rmse_mle", "ct_mle_sec", "rmse_sm", "ct_sm_sec"]);
    for (i, r) in results.iter().enumerate() {
        table.push_row(&[
            i.to_string(),
            format_f64(r.rmse_mle),
            format_f64(r.ct_mle),
            format_f64(r.rmse_sm),
            format_f64(r.ct_sm),
        ]);
    }
    ctx.write_text("ggm_bench.csv", &table.to_string())?;

    let col = |f: fn(&GgmRepResult) -> f64| results.iter().map(f).collect::<Vec<_>>();
    let cols =
        [col(|r| r.rmse_mle), col(|r| r.ct_mle), col(|r| r.rmse_sm), col(|r| r.ct_sm)];
    let mut summary =
        CsvTable::new(&["stat", "rmse_mle", "ct_mle_sec", "rmse_sm", "ct_sm_sec"]);
    let mut mean_row = vec!["mean".to_string()];
    let mut std_row = vec!["std".to_string()];
    for c in &cols {
        mean_row.push(format_f64(num::mean(c)));
        std_row.push(format_f64(if c.len() > 1 { num::variance(c).sqrt() } else { 0.0 }));
    }
    summary.push_row(&mean_row);
    summary.push_row(&std_row);
    ctx.write_text("ggm_bench_summary.csv", &summary.to_string())?;

    let wins_rmse = results.iter().filter(|r| r.rmse_sm < r.rmse_mle).count();
    let wins_ct = results.iter().filter(|r| r.ct_sm < r.ct_mle).count();
    ctx.write_json(
        "ggm_bench_ordering.json",
        &serde_json::json!({
            "reps": cfg.reps,
            "rmse_sm_lower": wins_rmse,
            "ct_sm_lower": wins_ct,
        }),
    )?;
    Ok(())
}
