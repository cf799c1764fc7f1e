//! Stability map: sensitivity ratios of the generation flow on a grid of
//! initial points, for a velocity field trained with and without spectral
//! clamping, on data containing outliers.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use flowstat::demos::{stability_map, StabilityMapConfig};

use crate::csvio::CsvTable;
use crate::manifest::RunContext;
use crate::svg::SvgPlot;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub n: usize,
    pub outlier_frac: f64,
    pub epochs: usize,
    pub spectral_cap: f64,
    pub grid: usize,
    pub grid_halfwidth: f64,
    pub probes: usize,
    pub ode_steps: usize,
    pub delta: f64,
}

impl Default for Config {
    fn default() -> Self {
        let base = StabilityMapConfig::default();
        Config {
            seed: 1,
            n: base.n,
            outlier_frac: base.outlier_frac,
            epochs: base.epochs,
            spectral_cap: base.spectral_cap,
            grid: base.grid,
            grid_halfwidth: base.grid_halfwidth,
            probes: base.probes,
            ode_steps: base.ode_steps,
            delta: base.delta,
        }
    }
}

pub fn run(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: Config = ctx.config()?;
    cfg.seed = ctx.seed;
    ctx.stage("train-and-map");
    let map_cfg = StabilityMapConfig {
        n: cfg.n,
        outlier_frac: cfg.outlier_frac,
        epochs: cfg.epochs,
        spectral_cap: cfg.spectral_cap,
        grid: cfg.grid,
        grid_halfwidth: cfg.grid_halfwidth,
        probes: cfg.probes,
        ode_steps: cfg.ode_steps,
        delta: cfg.delta,
    };
    let map = stability_map(&map_cfg, cfg.seed)?;

    ctx.stage("outputs");
    let mut table = CsvTable::new(&["x", "y", "ratio_standard", "ratio_clamped"]);
    for &(x, y, rs, rc) in &map.rows {
        table.push_values(&[x, y, rs, rc]);
    }
    let grid_path = ctx.write_text("sensitivity_grid.csv", &table.to_string())?;
    ctx.write_json(
        "sensitivity_summary.json",
        &serde_json::json!({
            "max_ratio_standard": map.max_standard,
            "max_ratio_clamped": map.max_clamped,
            "gronwall_bound_clamped": cfg.spectral_cap.exp(),
        }),
    )?;

    // two-panel style map rendered from the CSV: radius encodes the ratio
    let parsed = CsvTable::read(&grid_path)?;
    let xs = parsed.column_f64("x")?;
    let ys = parsed.column_f64("y")?;
    let rs = parsed.column_f64("ratio_standard")?;
    let rc = parsed.column_f64("ratio_clamped")?;
    let h = cfg.grid_halfwidth;
    let mut plot = SvgPlot::new(
        "sensitivity ratio: standard (red) vs clamped (blue)",
        (-h, h),
        (-h, h),
    );
    let peak = rs.iter().cloned().fold(1e-9, f64::max);
    for i in 0..xs.len() {
        plot.scatter(&[(xs[i], ys[i])], "#cc3311", 1.0 + 6.0 * rs[i] / peak);
        plot.scatter(&[(xs[i], ys[i])], "#4477aa", (1.0 + 6.0 * rc[i] / peak).min(4.0));
    }
    ctx.write_text("sensitivity_map.svg", &plot.finish())?;
    Ok(())
}
