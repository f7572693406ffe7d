use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value;

/// State collected while a subcommand runs.
#[derive(Debug)]
pub struct RunContext {
    pub subcommand: &'static str,
    pub seed: u64,
    pub dry_run: bool,
    pub started_at: DateTime<Utc>,
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunContext {
    pub fn new(subcommand: &'static str, seed: u64, dry_run: bool) -> Self {
        Self {
            subcommand,
            seed,
            dry_run,
            started_at: Utc::now(),
            config: Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub subcommand: String,
    pub config: Value,
    pub seed: u64,
    pub dry_run: bool,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub exit_status: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn finish(ctx: RunContext, exit_status: u8, error: Option<String>) -> Self {
        let run_id = format!(
            "{}-{}-{}",
            ctx.started_at.format("%Y%m%dT%H%M%S%.6fZ"),
            ctx.subcommand,
            std::process::id()
        );
        Self {
            run_id,
            subcommand: ctx.subcommand.to_string(),
            config: ctx.config,
            seed: ctx.seed,
            dry_run: ctx.dry_run,
            started_at: ctx.started_at,
            ended_at: Utc::now(),
            inputs: ctx.inputs,
            outputs: ctx.outputs,
            exit_status,
            error,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.json", self.run_id));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
