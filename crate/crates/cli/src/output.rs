//! Report files. Everything is written to a temporary sibling first and
//! renamed into place, so readers never observe a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{LoadedConfig, SCHEMA_VERSION};
use crate::error::CliError;

pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let dest = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &dest).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })?;
        self.written.push(dest.clone());
        Ok(dest)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// CSV with the configuration echoed as `#` comment lines above the
    /// header row.
    pub fn write_csv(
        &mut self,
        name: &str,
        cfg: &LoadedConfig,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let mut buf = comment_block(cfg, "#");
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        self.write(name, &buf)
    }

    /// Whitespace-separated columns for gnuplot, with a `#` header.
    pub fn write_plot(
        &mut self,
        name: &str,
        cfg: &LoadedConfig,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let mut buf = comment_block(cfg, "#");
        buf.extend_from_slice(format!("# {}\n", header.join(" ")).as_bytes());
        for row in rows {
            buf.extend_from_slice(row.join(" ").as_bytes());
            buf.push(b'\n');
        }
        self.write(name, &buf)
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn comment_block(cfg: &LoadedConfig, mark: &str) -> Vec<u8> {
    let mut out =
        format!("{mark} pwiener {} schema_version {SCHEMA_VERSION}\n{mark} config:\n", env!("CARGO_PKG_VERSION"));
    for line in cfg.text.lines() {
        out.push_str(mark);
        out.push(' ');
        out.push_str(line);
        out.push('\n');
    }
    out.into_bytes()
}

/// Wall-clock seconds per stage, kept apart from the numeric results.
#[derive(Default, Serialize)]
pub struct Timings(Vec<(String, f64)>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Serialize)]
pub struct Versions {
    pub pwiener_cli: &'static str,
    pub pwiener_core: &'static str,
}

/// Envelope shared by every JSON artifact.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub schema_version: u32,
    pub versions: Versions,
    pub seed: u64,
    pub config: &'a str,
    pub result: T,
    pub timings: Timings,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(command: &'a str, cfg: &'a LoadedConfig, seed: u64, result: T, timings: Timings) -> Self {
        Report {
            command,
            schema_version: SCHEMA_VERSION,
            versions: Versions { pwiener_cli: env!("CARGO_PKG_VERSION"), pwiener_core: pwiener::VERSION },
            seed,
            config: &cfg.text,
            result,
            timings,
        }
    }
}
