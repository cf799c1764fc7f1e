//! Flow copula on an S-shaped (sign-switching) dependence: scatter CSVs for
//! data vs generated pseudo-observations and the learned mid-time vector
//! field on a grid.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use flowstat::copula::{
    default_clip, flow_copula_train, kendall_tau, ranks_to_pseudo, UnitTransform,
};
use flowstat::flow::{CfmConfig, OdeConfig, Scheme};
use flowstat::mlp::TrainConfig;
use flowstat::num::{Matrix, RngStream};

use crate::csvio::CsvTable;
use crate::manifest::RunContext;
use crate::svg::SvgPlot;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub n: usize,
    pub epochs: usize,
    pub sample_n: usize,
    pub field_grid: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config { seed: 1, n: 3000, epochs: 60, sample_n: 4000, field_grid: 12 }
    }
}

/// Sign-switching dependence: positive local correlation in the lower range
/// of the first coordinate, negative in the upper range.
pub fn s_shaped_sample(n: usize, rng: &mut RngStream) -> Matrix {
    let mut x = Matrix::zeros(n, 2);
    for i in 0..n {
        let t = rng.uniform();
        let local = if t < 0.5 { 8.0 * (t - 0.25) } else { -8.0 * (t - 0.75) };
        x.set(i, 0, t);
        x.set(i, 1, local + 0.6 * rng.normal());
    }
    x
}

pub fn run(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: Config = ctx.config()?;
    cfg.seed = ctx.seed;
    let mut rng = RngStream::new(cfg.seed, 0);

    ctx.stage("data");
    let x = s_shaped_sample(cfg.n, &mut rng);
    let pseudo = ranks_to_pseudo(&x, default_clip(cfg.n))?;

    ctx.stage("train");
    let fm = CfmConfig {
        train: TrainConfig {
            epochs: cfg.epochs,
            batch_size: 128,
            step_size: 2e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let model = flow_copula_train(&x, UnitTransform::Logit, &fm, &mut rng)?;

    ctx.stage("sample");
    let ode = OdeConfig::forward(40, Scheme::Rk4);
    let generated = model.sample(cfg.sample_n, &ode, &mut rng)?;

    ctx.stage("outputs");
    let mut data_csv = CsvTable::new(&["u1", "u2"]);
    for i in 0..cfg.n {
        data_csv.push_values(&[pseudo.u.get(i, 0), pseudo.u.get(i, 1)]);
    }
    let data_path = ctx.write_text("copula_data.csv", &data_csv.to_string())?;

    let mut gen_csv = CsvTable::new(&["u1", "u2"]);
    for i in 0..generated.rows() {
        gen_csv.push_values(&[generated.get(i, 0), generated.get(i, 1)]);
    }
    let gen_path = ctx.write_text("copula_generated.csv", &gen_csv.to_string())?;

    // learned velocity field at t = 0.5 on a z-space grid
    let mut field_csv = CsvTable::new(&["z1", "z2", "v1", "v2"]);
    let g = cfg.field_grid;
    for iy in 0..g {
        for ix in 0..g {
            let z1 = -3.0 + 6.0 * (ix as f64 + 0.5) / g as f64;
            let z2 = -3.0 + 6.0 * (iy as f64 + 0.5) / g as f64;
            let v = model.flow.velocity(0.5, &[z1, z2], &[]);
            field_csv.push_values(&[z1, z2, v[0], v[1]]);
        }
    }
    let field_path = ctx.write_text("copula_field_t05.csv", &field_csv.to_string())?;

    ctx.write_json(
        "copula_summary.json",
        &serde_json::json!({
            "tau_data": kendall_tau(&pseudo.u)?,
            "tau_generated": kendall_tau(&generated)?,
        }),
    )?;

    // scatter overlay from the CSVs
    let dp = CsvTable::read(&data_path)?;
    let gp = CsvTable::read(&gen_path)?;
    let mut plot = SvgPlot::new(
        "copula: data (blue) vs generated (red)",
        (0.0, 1.0),
        (0.0, 1.0),
    );
    let d1 = dp.column_f64("u1")?;
    let d2 = dp.column_f64("u2")?;
    let g1 = gp.column_f64("u1")?;
    let g2 = gp.column_f64("u2")?;
    plot.scatter(
        &d1.iter().cloned().zip(d2.iter().cloned()).collect::<Vec<_>>(),
        "#4477aa",
        1.4,
    );
    plot.scatter(
        &g1.iter().cloned().zip(g2.iter().cloned()).collect::<Vec<_>>(),
        "#cc3311",
        1.1,
    );
    ctx.write_text("copula_scatter.svg", &plot.finish())?;

    // mid-time field quiver from the CSV
    let fp = CsvTable::read(&field_path)?;
    let z1 = fp.column_f64("z1")?;
    let z2 = fp.column_f64("z2")?;
    let v1 = fp.column_f64("v1")?;
    let v2 = fp.column_f64("v2")?;
    let mut quiver = SvgPlot::new("velocity field at t = 0.5 (z-space)", (-3.2, 3.2), (-3.2, 3.2));
    let scale = 0.12;
    let segs: Vec<((f64, f64), (f64, f64))> = (0..z1.len())
        .map(|i| ((z1[i], z2[i]), (z1[i] + scale * v1[i], z2[i] + scale * v2[i])))
        .collect();
    quiver.segments(&segs, "#228833", 1.0);
    let heads: Vec<(f64, f64)> =
        segs.iter().map(|&(_, (hx, hy))| (hx, hy)).collect();
    quiver.scatter(&heads, "#228833", 1.3);
    ctx.write_text("copula_field.svg", &quiver.finish())?;
    Ok(())
}
