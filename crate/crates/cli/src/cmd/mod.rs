use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

use crate::batch::{display, Failure};
use crate::manifest::RunManifest;

pub mod braid_word;
pub mod evaluate;
pub mod label;
pub mod report;
pub mod synth;
pub mod train;

/// Scenes processed per parallel chunk; bounds memory on large inputs.
pub const CHUNK: usize = 256;

pub struct Context {
    pub argv: Vec<String>,
    pub jobs: usize,
}

/// Collects what a command read and wrote, for the manifest.
pub struct Run {
    command: &'static str,
    started: Instant,
    config: serde_json::Value,
    seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub failures: Vec<Failure>,
}

impl Run {
    pub fn new(command: &'static str, config: impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Run {
            command,
            started: Instant::now(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: vec![],
            outputs: vec![],
            failures: vec![],
        })
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(display(p));
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(display(p));
    }

    pub fn fail(&mut self, input: impl Into<String>, err: &anyhow::Error) {
        self.failures.push(Failure::new(input, err));
    }

    /// Writes the manifest and returns the failure count.
    pub fn finish(self, ctx: &Context, out: &Path) -> Result<usize> {
        let n = self.failures.len();
        RunManifest {
            command: self.command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            argv: ctx.argv.clone(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            failures: self.failures,
            duration_secs: self.started.elapsed().as_secs_f64(),
        }
        .write(out)?;
        log::info!("{} finished with {n} failure(s)", self.command);
        Ok(n)
    }
}

/// Output path `dir/sub/<stem>.json`.
pub fn json_out(dir: &Path, sub: &str, scene_id: &str) -> PathBuf {
    dir.join(sub).join(format!("{}.json", crate::batch::file_stem(scene_id)))
}
