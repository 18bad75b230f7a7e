use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SCHEMA_VERSION};

/// Writes the artifacts of one run into `dir`, stamping each file with the
/// config hash and grid metadata.
pub struct RunWriter {
    pub dir: PathBuf,
    hash: String,
    command: &'static str,
    n: usize,
    half_width: f64,
}

impl RunWriter {
    pub fn new(dir: PathBuf, cfg: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        let g = cfg.grid();
        Ok(RunWriter {
            dir,
            hash: cfg.hash(),
            command: cfg.name(),
            n: g.n,
            half_width: g.half_width,
        })
    }

    /// Same stamp, different directory (sweep members).
    pub fn child(&self, name: &str) -> io::Result<Self> {
        let dir = self.dir.join(name);
        fs::create_dir_all(&dir)?;
        Ok(RunWriter {
            dir,
            hash: self.hash.clone(),
            command: self.command,
            n: self.n,
            half_width: self.half_width,
        })
    }

    fn header(&self) -> String {
        format!(
            "# dnls-lab schema_version={} command={} config_sha256={} n={} half_width={} dx={:e}",
            SCHEMA_VERSION,
            self.command,
            self.hash,
            self.n,
            self.half_width,
            2.0 * self.half_width / self.n as f64
        )
    }

    pub fn csv(&self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut out = io::BufWriter::new(fs::File::create(&path)?);
        writeln!(out, "{}", self.header())?;
        writeln!(out, "{}", columns.join(","))?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, result: &T) -> io::Result<PathBuf> {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config_sha256": self.hash,
            "grid": {
                "n": self.n,
                "half_width": self.half_width,
                "dx": 2.0 * self.half_width / self.n as f64,
            },
            "result": result,
        });
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// `config.json` for a run, readable by `replay`.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "config_sha256": cfg.hash(),
        "config": cfg,
    });
    let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(dir.join("config.json"), text)
}

pub fn read_config(path: &Path) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg = v.get("config").cloned().unwrap_or(v);
    serde_json::from_value(cfg).map_err(|e| format!("{}: {e}", path.display()))
}
