//! Experiment runner: each subcommand maps one study to seeded, deterministic
//! CSV/JSON/SVG outputs under an output directory, with a run manifest.

mod csvio;
mod dgp;
mod experiments;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use manifest::RunContext;

#[derive(Parser)]
#[command(name = "flowstat", version, about = "Run the library's experiment suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct CommonArgs {
    /// JSON config file; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if absent)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replicate-count override where the experiment loops
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads for replicate loops (results identical for any value)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Precision-matrix benchmark: score matching vs penalized likelihood
    GgmBench(CommonArgs),
    /// Quartic exponential-family score-matching fit
    QuarticSm(CommonArgs),
    /// Train a flow-matching model and save it
    CfmTrain(CommonArgs),
    /// Sample from a saved flow-matching model
    CfmSample(CommonArgs),
    /// Teacher-signal variance under independent vs assignment coupling
    CouplingCompare(CommonArgs),
    /// Sensitivity-ratio map for clamped vs unclamped velocity fields
    LipschitzMap(CommonArgs),
    /// Kernel Stein goodness-of-fit test with wild bootstrap
    KsdTest(CommonArgs),
    /// Semiparametric linear regression vs OLS replicate study
    LinregSemipar(CommonArgs),
    /// Flow copula on an S-shaped dependence
    CopulaDemo(CommonArgs),
    /// Multiple imputation: flow engine vs chained Gaussian engine
    MiDemo(CommonArgs),
    /// Cross-fitted doubly robust ATE coverage study
    AteDdml(CommonArgs),
    /// Interventional-distribution comparison: flow sampler vs residual baseline
    CausalDemo(CommonArgs),
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    message: String,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let rep = ErrorReport { error: kind.into(), message };
    eprintln!("{}", serde_json::to_string(&rep).expect("report serializes"));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not failures
            if e.use_stderr() {
                return fail("ConfigInvalid", e.to_string());
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let (name, args): (&str, &CommonArgs) = match &cli.command {
        Command::GgmBench(a) => ("ggm-bench", a),
        Command::QuarticSm(a) => ("quartic-sm", a),
        Command::CfmTrain(a) => ("cfm-train", a),
        Command::CfmSample(a) => ("cfm-sample", a),
        Command::CouplingCompare(a) => ("coupling-compare", a),
        Command::LipschitzMap(a) => ("lipschitz-map", a),
        Command::KsdTest(a) => ("ksd-test", a),
        Command::LinregSemipar(a) => ("linreg-semipar", a),
        Command::CopulaDemo(a) => ("copula-demo", a),
        Command::MiDemo(a) => ("mi-demo", a),
        Command::AteDdml(a) => ("ate-ddml", a),
        Command::CausalDemo(a) => ("causal-demo", a),
    };
    let mut ctx = match RunContext::prepare(name, args) {
        Ok(c) => c,
        Err(e) => return fail("ConfigInvalid", e.to_string()),
    };
    let result = match &cli.command {
        Command::GgmBench(_) => experiments::ggm_bench::run(&mut ctx),
        Command::QuarticSm(_) => experiments::quartic_sm::run(&mut ctx),
        Command::CfmTrain(_) => experiments::cfm::run_train(&mut ctx),
        Command::CfmSample(_) => experiments::cfm::run_sample(&mut ctx),
        Command::CouplingCompare(_) => experiments::coupling_compare::run(&mut ctx),
        Command::LipschitzMap(_) => experiments::lipschitz_map::run(&mut ctx),
        Command::KsdTest(_) => experiments::ksd_test::run(&mut ctx),
        Command::LinregSemipar(_) => experiments::linreg_semipar::run(&mut ctx),
        Command::CopulaDemo(_) => experiments::copula_demo::run(&mut ctx),
        Command::MiDemo(_) => experiments::mi_demo::run(&mut ctx),
        Command::AteDdml(_) => experiments::ate_ddml::run(&mut ctx),
        Command::CausalDemo(_) => experiments::causal_demo::run(&mut ctx),
    };
    match result.and_then(|_| ctx.finish()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("ExperimentFailed", format!("{e:#}")),
    }
}
