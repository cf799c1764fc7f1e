//! Flow-matching training and sampling as separate commands: `cfm-train`
//! saves a model JSON plus the loss curve, `cfm-sample` loads one and dumps
//! sample/trajectory CSVs.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use flowstat::flow::ode::ode_integrate_path;
use flowstat::flow::{cfm_train_tracked, CfmConfig, CouplingKind, FlowModel, OdeConfig, Scheme};
use flowstat::mlp::TrainConfig;
use flowstat::num::RngStream;

use crate::csvio::{format_f64, CsvTable};
use crate::dgp;
use crate::manifest::RunContext;
use crate::svg::SvgPlot;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCfg {
    pub seed: u64,
    pub n: usize,
    /// "gauss-shift" (N(2,1)) or "two-cluster"
    pub target: String,
    /// "independent", "assignment", or "entropic"
    pub coupling: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub hidden: Vec<usize>,
    pub model_file: String,
}

impl Default for TrainCfg {
    fn default() -> Self {
        TrainCfg {
            seed: 1,
            n: 5000,
            target: "gauss-shift".into(),
            coupling: "independent".into(),
            epochs: 40,
            batch_size: 128,
            step_size: 2e-3,
            hidden: vec![64, 64],
            model_file: "model.json".into(),
        }
    }
}

pub fn parse_coupling(name: &str) -> Result<CouplingKind> {
    match name {
        "independent" => Ok(CouplingKind::Independent),
        "assignment" => Ok(CouplingKind::Assignment),
        "entropic" => Ok(CouplingKind::Entropic),
        other => anyhow::bail!("unknown coupling '{other}'"),
    }
}

fn target_sample(name: &str, n: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    match name {
        "gauss-shift" => Ok((0..n).map(|_| vec![2.0 + rng.normal()]).collect()),
        "two-cluster" => Ok(dgp::two_cluster(n, rng).into_iter().map(|v| vec![v]).collect()),
        other => anyhow::bail!("unknown target '{other}'"),
    }
}

pub fn run_train(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: TrainCfg = ctx.config()?;
    cfg.seed = ctx.seed;
    let mut rng = RngStream::new(cfg.seed, 0);

    ctx.stage("data");
    let data = target_sample(&cfg.target, cfg.n, &mut rng)?;

    ctx.stage("train");
    let fm_cfg = CfmConfig {
        train: TrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            step_size: cfg.step_size,
            ..Default::default()
        },
        coupling: parse_coupling(&cfg.coupling)?,
        hidden: cfg.hidden.clone(),
        ..Default::default()
    };
    let (model, losses) = cfm_train_tracked(&data, &fm_cfg, &mut rng)?;

    ctx.stage("outputs");
    let model_file = cfg.model_file.clone();
    ctx.write_text(&model_file, &model.to_json())?;
    let mut loss_csv = CsvTable::new(&["epoch", "loss"]);
    for (e, l) in losses.iter().enumerate() {
        loss_csv.push_row(&[e.to_string(), format_f64(*l)]);
    }
    let path = ctx.write_text("loss.csv", &loss_csv.to_string())?;

    let parsed = CsvTable::read(&path)?;
    let ls = parsed.column_f64("loss")?;
    let pts: Vec<(f64, f64)> = ls.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect();
    let mut plot = SvgPlot::new(
        "training loss",
        (0.0, ls.len() as f64),
        SvgPlot::range(&ls),
    );
    plot.polyline(&pts, "#4477aa", 1.5);
    ctx.write_text("loss.svg", &plot.finish())?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleCfg {
    pub seed: u64,
    pub model_path: String,
    pub n: usize,
    pub steps: usize,
    /// "euler" or "rk4"
    pub scheme: String,
    pub trajectories: usize,
}

impl Default for SampleCfg {
    fn default() -> Self {
        SampleCfg {
            seed: 1,
            model_path: "out/model.json".into(),
            n: 5000,
            steps: 100,
            scheme: "rk4".into(),
            trajectories: 8,
        }
    }
}

pub fn parse_scheme(name: &str) -> Result<Scheme> {
    match name {
        "euler" => Ok(Scheme::Euler),
        "rk4" => Ok(Scheme::Rk4),
        other => anyhow::bail!("unknown scheme '{other}'"),
    }
}

pub fn run_sample(ctx: &mut RunContext) -> Result<()> {
    let mut cfg: SampleCfg = ctx.config()?;
    cfg.seed = ctx.seed;
    let text = std::fs::read_to_string(&cfg.model_path)
        .with_context(|| format!("reading model {}", cfg.model_path))?;
    let model = FlowModel::from_json(&text)?;
    let mut rng = RngStream::new(cfg.seed, 1);
    let ode = OdeConfig::forward(cfg.steps, parse_scheme(&cfg.scheme)?);

    ctx.stage("sample");
    let samples = model.sample(cfg.n, &ode, &mut rng)?;

    ctx.stage("outputs");
    let dim = model.state_dim();
    let header: Vec<String> = (0..dim).map(|j| format!("x{}", j + 1)).collect();
    let mut table = CsvTable::new(&header.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for s in &samples {
        table.push_values(s);
    }
    ctx.write_text("samples.csv", &table.to_string())?;

    // a few trajectories on the shared grid, recorded at every step
    let mut traj = CsvTable::new(&["trajectory", "t", "x1"]);
    for tr in 0..cfg.trajectories {
        let x0 = rng.normal_vec(dim);
        let path = ode_integrate_path(model.field(&[]), &x0, &ode)?;
        for (t, x) in path {
            traj.push_row(&[tr.to_string(), format_f64(t), format_f64(x[0])]);
        }
    }
    let traj_path = ctx.write_text("trajectories.csv", &traj.to_string())?;

    let parsed = CsvTable::read(&traj_path)?;
    let ts = parsed.column_f64("t")?;
    let xs = parsed.column_f64("x1")?;
    let ids = parsed.column_f64("trajectory")?;
    let mut plot = SvgPlot::new("sampling trajectories", (0.0, 1.0), SvgPlot::range(&xs));
    let colors = ["#4477aa", "#cc3311", "#228833", "#aa3377", "#66ccee", "#ee7733"];
    let max_id = ids.iter().cloned().fold(0.0, f64::max) as usize;
    for id in 0..=max_id {
        let pts: Vec<(f64, f64)> = ids
            .iter()
            .zip(ts.iter().zip(&xs))
            .filter(|(i, _)| **i as usize == id)
            .map(|(_, (&t, &x))| (t, x))
            .collect();
        plot.polyline(&pts, colors[id % colors.len()], 1.2);
    }
    ctx.write_text("trajectories.svg", &plot.finish())?;
    Ok(())
}
