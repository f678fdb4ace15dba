//! Files written by runs: diagnostic CSVs, binary snapshots with JSON
//! sidecars, run manifests and gnuplot scripts.
//!
//! Snapshot layout (little endian): `u64` number of axes, one `u64` point
//! count per axis, then `f64` `h`, `L`, `ε`, `t`, then the values in storage
//! order (row-major, `y` outer).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{EntropyBreakdown, CSV_HEADER};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Diagnostic series as CSV text, header included.
pub fn csv_string(records: &[EntropyBreakdown]) -> String {
    let mut s = CSV_HEADER.join(",");
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, records: &[EntropyBreakdown]) -> Result<()> {
    fs::write(path, csv_string(records))?;
    Ok(())
}

/// Metadata stored next to a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub shape: Vec<usize>,
    pub mode: crate::grid::GridMode,
    pub dim: usize,
    pub h: f64,
    pub half_width: f64,
    pub epsilon: f64,
    pub t: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub shape: Vec<usize>,
    pub h: f64,
    pub half_width: f64,
    pub epsilon: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write `values` to `path` and the metadata to `path` with a `.json` extension.
pub fn write_snapshot(
    path: &Path,
    grid: &Grid,
    epsilon: f64,
    t: f64,
    step: usize,
    values: &[f64],
) -> Result<PathBuf> {
    let shape = grid.shape();
    let mut buf = Vec::with_capacity(8 * (1 + shape.len() + 4 + values.len()));
    buf.extend_from_slice(&(shape.len() as u64).to_le_bytes());
    for &n in &shape {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in [grid.spacing(), grid.half_width(), epsilon, t] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    let meta = SnapshotMeta {
        shape,
        mode: grid.mode(),
        dim: grid.dim(),
        h: grid.spacing(),
        half_width: grid.half_width(),
        epsilon,
        t,
        step,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&meta)?)?;
    Ok(side)
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData> {
    let bytes = fs::read(path)?;
    let bad = |message: &str| Error::Snapshot {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut pos = 0;
    let mut word = || -> Result<[u8; 8]> {
        let w = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| bad("truncated header"))?
            .try_into()
            .unwrap();
        pos += 8;
        Ok(w)
    };
    let ndim = u64::from_le_bytes(word()?) as usize;
    if ndim == 0 || ndim > 3 {
        return Err(bad("axis count must be 1 to 3"));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(u64::from_le_bytes(word()?) as usize);
    }
    let h = f64::from_le_bytes(word()?);
    let half_width = f64::from_le_bytes(word()?);
    let epsilon = f64::from_le_bytes(word()?);
    let t = f64::from_le_bytes(word()?);
    let count: usize = shape.iter().product();
    let body = &bytes[8 * (ndim + 5)..];
    if body.len() != 8 * count {
        return Err(bad(&format!(
            "expected {count} values, found {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SnapshotData {
        shape,
        h,
        half_width,
        epsilon,
        t,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    pub path: String,
}

/// Record of everything a command wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool_version: String,
    pub command: String,
    pub config_path: Option<String>,
    pub output_dir: String,
    /// The configuration with every default filled in.
    pub resolved_config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub timings_s: std::collections::BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, output_dir: &Path) -> Self {
        Self {
            schema: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            output_dir: output_dir.display().to_string(),
            resolved_config: serde_json::Value::Null,
            artifacts: Vec::new(),
            timings_s: Default::default(),
        }
    }

    /// Register a file; paths are stored relative to the output directory.
    pub fn add(&mut self, kind: &str, path: &Path) {
        let rel = path
            .strip_prefix(&self.output_dir)
            .unwrap_or(path)
            .display()
            .to_string();
        self.artifacts.push(Artifact {
            kind: kind.to_string(),
            path: rel,
        });
    }

    /// Fails if a listed artifact is missing.
    pub fn check(&self) -> Result<()> {
        let dir = Path::new(&self.output_dir);
        for a in &self.artifacts {
            if !dir.join(&a.path).exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("artifact {} was not written", a.path),
                )));
            }
        }
        Ok(())
    }

    /// Write `manifest.json` via a temporary file and a rename.
    pub fn write(&self) -> Result<PathBuf> {
        self.check()?;
        let dir = Path::new(&self.output_dir);
        let tmp = dir.join(".manifest.json.tmp");
        let dst = dir.join(MANIFEST_FILE);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &dst)?;
        Ok(dst)
    }
}

/// Gnuplot script charting relative entropy, dissipation and `err_L1`
/// against time from a diagnostics CSV in the same directory.
pub fn gnuplot_script(csv_name: &str, title: &str) -> String {
    let col = |name: &str| CSV_HEADER.iter().position(|c| *c == name).unwrap() + 1;
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set logscale y\n\
         set terminal pngcairo size 1200,400\n\
         set output 'diagnostics.png'\n\
         set multiplot layout 1,3 title '{title}'\n\
         plot '{csv_name}' using 1:{e} with lines title 'E[u|I]'\n\
         plot '{csv_name}' using 1:{d} with lines title 'dissipation'\n\
         plot '{csv_name}' using 1:{l} with lines title 'err_L1'\n\
         unset multiplot\n",
        e = col("rel_entropy"),
        d = col("dissipation"),
        l = col("err_L1"),
    )
}
