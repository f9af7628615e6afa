//! Run directories and result files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const OUTPUT_ROOT_ENV: &str = "ACTNORM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
/// Hex digits of the config hash used in directory names.
const HASH_PREFIX: usize = 16;

/// Output root: the config's `output_dir`, else `$ACTNORM_OUTPUT_ROOT`, else `runs`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// One directory per run, `<root>/<kind>-<hash>`, holding `config.toml`, results,
/// and a `metadata.json` sidecar with wall-clock information.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    started: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunDir {
    pub fn create(cfg: &ExperimentConfig) -> CliResult<Self> {
        let name = format!("{}-{}", cfg.kind.as_str(), &cfg.hash()[..HASH_PREFIX]);
        let path = output_root(cfg).join(name);
        fs::create_dir_all(&path).map_err(|e| CliError::fs(&path, e))?;
        let run = RunDir {
            path,
            started: unix_now(),
        };
        let mut identity = cfg.clone();
        identity.output_dir = None;
        run.write_text("config.toml", &identity.to_toml())?;
        Ok(run)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, rel: &str) -> CliResult<BufWriter<fs::File>> {
        let p = self.path.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::fs(parent, e))?;
        }
        fs::File::create(&p).map(BufWriter::new).map_err(|e| CliError::fs(&p, e))
    }

    /// Writes through `f`, mapping I/O failures to filesystem errors on `rel`.
    pub fn write_with<F>(&self, rel: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let mut out = self.file(rel)?;
        f(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::fs(self.path.join(rel), e))
    }

    pub fn write_text(&self, rel: &str, text: &str) -> CliResult<()> {
        self.write_with(rel, |w| w.write_all(text.as_bytes()))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> CliResult<()> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    /// Writes the wall-clock sidecar. Kept apart from results so those stay byte-stable.
    pub fn finish(&self, command: &str) -> CliResult<()> {
        let meta = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix": self.started,
            "finished_unix": unix_now(),
        });
        self.write_json("metadata.json", &meta)
    }
}
