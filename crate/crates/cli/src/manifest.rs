use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::CommonArgs;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub schema_version: u32,
    pub library_version: String,
    pub config: Value,
    pub timings_sec: Vec<(String, f64)>,
    pub outputs: Vec<String>,
}

/// Shared run state: resolved config JSON, output directory, stage timer, and
/// the list of files written so far.
pub struct RunContext {
    pub name: String,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub reps_override: Option<usize>,
    pub threads: usize,
    config_raw: Option<Value>,
    config_echo: Value,
    timings: Vec<(String, f64)>,
    outputs: Vec<String>,
    stage_start: Instant,
    stage_name: Option<String>,
}

impl RunContext {
    pub fn prepare(name: &str, args: &CommonArgs) -> Result<RunContext> {
        let config_raw = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let value: Value =
                    serde_json::from_str(&text).context("config is not valid JSON")?;
                Some(value)
            }
            None => None,
        };
        std::fs::create_dir_all(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))?;
        let seed = args.seed.unwrap_or(
            config_raw
                .as_ref()
                .and_then(|v| v.get("seed"))
                .and_then(|s| s.as_u64())
                .unwrap_or(1),
        );
        Ok(RunContext {
            name: name.to_string(),
            out_dir: args.out.clone(),
            seed,
            reps_override: args.reps,
            threads: args.threads.max(1),
            config_raw,
            config_echo: Value::Null,
            timings: Vec::new(),
            outputs: Vec::new(),
            stage_start: Instant::now(),
            stage_name: None,
        })
    }

    /// Deserializes the run config: file contents when --config was given
    /// (unknown keys rejected), defaults otherwise. The seed field of the
    /// config is overridden by --seed.
    pub fn config<C>(&mut self) -> Result<C>
    where
        C: serde::de::DeserializeOwned + Serialize + Default,
    {
        let cfg: C = match &self.config_raw {
            Some(v) => serde_json::from_value(v.clone())
                .context("config does not match the subcommand schema")?,
            None => C::default(),
        };
        self.config_echo = serde_json::to_value(&cfg)?;
        Ok(cfg)
    }

    pub fn stage(&mut self, name: &str) {
        self.end_stage();
        self.stage_name = Some(name.to_string());
        self.stage_start = Instant::now();
    }

    fn end_stage(&mut self) {
        if let Some(name) = self.stage_name.take() {
            self.timings.push((name, self.stage_start.elapsed().as_secs_f64()));
        }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }

    pub fn write_text(&mut self, file: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(file);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        self.record_output(&path);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_text(file, &(text + "\n"))
    }

    pub fn finish(&mut self) -> Result<()> {
        self.end_stage();
        let manifest = RunManifest {
            subcommand: self.name.clone(),
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config_echo.clone(),
            timings_sec: self.timings.clone(),
            outputs: self.outputs.clone(),
        };
        let path = self.out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        for name in &manifest.outputs {
            anyhow::ensure!(self.out_dir.join(name).exists(), "missing output {name}");
        }
        Ok(())
    }
}
