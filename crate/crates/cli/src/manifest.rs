//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration; passing this manifest to `--config` replays the run.
    pub config: FileConfig,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub runtime_seconds: f64,
    pub exit_code: i32,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Output directory that remembers every file written into it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
    started_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
            started_at: now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `relative`, creating parent directories and recording it.
    pub fn claim(&mut self, relative: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(relative.to_string());
        Ok(path)
    }

    pub fn write_bytes(&mut self, relative: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.claim(relative)?;
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(relative, text.as_bytes())
    }

    /// One JSON document per line, in iteration order.
    pub fn write_jsonl<'a, T: Serialize + 'a>(&mut self, relative: &str, items: impl IntoIterator<Item = &'a T>) -> anyhow::Result<()> {
        let path = self.claim(relative)?;
        let mut out = BufWriter::new(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?);
        for item in items {
            serde_json::to_writer(&mut out, item)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `config.toml` and the manifest; the manifest lists every file including itself.
    pub fn finish(mut self, subcommand: &str, seed: u64, config: FileConfig, exit_code: i32) -> anyhow::Result<RunManifest> {
        let toml = crate::config::to_toml(&config)?;
        self.write_bytes(CONFIG_FILE, toml.as_bytes())?;
        self.written.push(MANIFEST_FILE.to_string());
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            threads: rayon::current_num_threads(),
            started_at: self.started_at.clone(),
            finished_at: now(),
            runtime_seconds: self.started.elapsed().as_secs_f64(),
            exit_code,
            outputs: self.written.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}
