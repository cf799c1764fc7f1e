//! Teacher-signal variance under independent vs exact-assignment coupling on
//! a two-cluster target, binned over (t, x_t), plus a pairing picture for one
//! minibatch.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use flowstat::flow::{binned_signal_variance, ot_assignment, teacher_signal_1d, CouplingKind};
use flowstat::num::{Matrix, RngStream};

use crate::csvio::{format_f64, CsvTable};
use crate::dgp;
use crate::manifest::RunContext;
use crate::svg::SvgPlot;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub n: usize,
    pub batch_size: usize,
    pub batches: usize,
    pub t_bins: usize,
    pub x_bins: usize,
    pub min_bin_count: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            n: 2000,
            batch_size: 64,
            batches: 150,
            t_bins: 8,
            x_bins: 16,
            min_bin_count: 12,
        }
    }
}

pub fn run(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: Config = ctx.config()?;
    cfg.seed = ctx.seed;
    let mut rng = RngStream::new(cfg.seed, 0);
    let data = dgp::two_cluster(cfg.n, &mut rng);

    ctx.stage("signal");
    let mut rng_i = rng.substream(1);
    let mut rng_o = rng.substream(2);
    let ind = teacher_signal_1d(
        &data,
        CouplingKind::Independent,
        cfg.batch_size,
        cfg.batches,
        &mut rng_i,
    )?;
    let ot = teacher_signal_1d(
        &data,
        CouplingKind::Assignment,
        cfg.batch_size,
        cfg.batches,
        &mut rng_o,
    )?;
    let (x_lo, x_hi) = (-4.0, 4.0);
    let vi = binned_signal_variance(&ind, cfg.t_bins, cfg.x_bins, x_lo, x_hi, cfg.min_bin_count);
    let vo = binned_signal_variance(&ot, cfg.t_bins, cfg.x_bins, x_lo, x_hi, cfg.min_bin_count);

    ctx.stage("outputs");
    let mut table =
        CsvTable::new(&["t_bin", "x_bin", "count_independent", "var_independent", "count_assignment", "var_assignment"]);
    let mut lower = 0usize;
    let mut total = 0usize;
    for (id, n_i, var_i) in &vi {
        if let Some((_, n_o, var_o)) = vo.iter().find(|(jd, _, _)| jd == id) {
            total += 1;
            if var_o < var_i {
                lower += 1;
            }
            table.push_row(&[
                (id / cfg.x_bins).to_string(),
                (id % cfg.x_bins).to_string(),
                n_i.to_string(),
                format_f64(*var_i),
                n_o.to_string(),
                format_f64(*var_o),
            ]);
        }
    }
    let bins_path = ctx.write_text("coupling_bins.csv", &table.to_string())?;
    ctx.write_json(
        "coupling_summary.json",
        &serde_json::json!({
            "occupied_bins": total,
            "assignment_lower_variance": lower,
            "fraction_lower": lower as f64 / total.max(1) as f64,
        }),
    )?;

    // one minibatch pairing picture: segments from (0, x0) to (1, x1)
    let x1: Vec<Vec<f64>> =
        (0..cfg.batch_size).map(|_| vec![data[rng.below(cfg.n)]]).collect();
    let x0: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| vec![rng.normal()]).collect();
    let mut pairs = CsvTable::new(&["coupling", "x0", "x1"]);
    for i in 0..cfg.batch_size {
        pairs.push_row(&["independent".into(), format_f64(x0[i][0]), format_f64(x1[i][0])]);
    }
    let mut cost = Matrix::zeros(cfg.batch_size, cfg.batch_size);
    for i in 0..cfg.batch_size {
        for j in 0..cfg.batch_size {
            cost.set(i, j, (x0[j][0] - x1[i][0]).powi(2));
        }
    }
    let sigma = ot_assignment(&cost)?.permutation.unwrap();
    for i in 0..cfg.batch_size {
        pairs.push_row(&[
            "assignment".into(),
            format_f64(x0[sigma[i]][0]),
            format_f64(x1[i][0]),
        ]);
    }
    let pairs_path = ctx.write_text("coupling_pairs.csv", &pairs.to_string())?;

    // SVG regenerated from the CSVs
    let parsed = CsvTable::read(&pairs_path)?;
    let kind_idx = parsed.column_index("coupling").unwrap();
    let x0s = parsed.column_f64("x0")?;
    let x1s = parsed.column_f64("x1")?;
    let mut plot = SvgPlot::new(
        "minibatch pairings: independent (red) vs assignment (blue)",
        (-0.05, 1.05),
        SvgPlot::range(&[x0s.clone(), x1s.clone()].concat()),
    );
    let mut segs_ind = Vec::new();
    let mut segs_ot = Vec::new();
    for (r, row) in parsed.rows.iter().enumerate() {
        let seg = ((0.0, x0s[r]), (1.0, x1s[r]));
        if row[kind_idx] == "independent" {
            segs_ind.push(seg);
        } else {
            segs_ot.push(seg);
        }
    }
    plot.segments(&segs_ind, "#cc3311", 0.7);
    plot.segments(&segs_ot, "#4477aa", 0.9);
    ctx.write_text("coupling_pairs.svg", &plot.finish())?;

    let _ = CsvTable::read(&bins_path)?;
    Ok(())
}
