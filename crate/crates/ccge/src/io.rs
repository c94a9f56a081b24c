//! On-disk formats: JSON checkpoints, JSON-lines streams and plain-text tables.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ccge_core::coverage::CoverageCounter;
use ccge_core::geometry::{RegionMap, SurfacePoint};
use ccge_core::trainer::TrainerState;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_FORMAT: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CONFIG_FILE: &str = "config.resolved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub state: TrainerState,
}

impl Checkpoint {
    pub fn new(state: TrainerState) -> Self {
        Self { format: CHECKPOINT_FORMAT, state }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
        let ckpt: Self = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("incompatible checkpoint {}", path.display()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            bail!("checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT})", ckpt.format);
        }
        Ok(ckpt)
    }
}

/// Line-delimited JSON writer.
pub struct JsonLines {
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self { out: BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?) })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub point: usize,
    pub position: Vec<f64>,
    pub normal: Vec<f64>,
    pub region: usize,
}

/// One JSON line per surface point with its region label.
pub fn write_regions<const D: usize>(path: &Path, points: &[SurfacePoint<D>], map: &RegionMap<D>) -> Result<()> {
    let mut w = JsonLines::create(path)?;
    for (i, (p, &k)) in points.iter().zip(&map.labels).enumerate() {
        w.write(&RegionRecord { point: i, position: p.position.to_vec(), normal: p.normal.to_vec(), region: k })?;
    }
    w.finish()
}

/// Tab-separated `s f k count` rows for every materialised counter entry.
pub fn write_counter(path: &Path, counter: &CoverageCounter) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "s\tf\tk\tcount")?;
    for (s, f, k, c) in counter.entries() {
        writeln!(w, "{}\t{f}\t{k}\t{c}", s.0)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
