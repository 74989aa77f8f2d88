//! On-disk layout of a run and its JSON-lines metric records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finetune::IterationStats;
use crate::imitation::{EpisodeRecord, EpochRecord};

/// Paths of every artifact under a run's output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Copy of the configuration the run was started with.
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn demos(&self) -> PathBuf {
        self.root.join("demos.jsonl")
    }

    pub fn dataset(&self, name: &str) -> PathBuf {
        self.root.join("data").join(format!("{name}.jsonl"))
    }

    pub fn policy(&self, seed: u64, group: &str, name: &str) -> PathBuf {
        self.root
            .join("policies")
            .join(format!("seed{seed}"))
            .join(group)
            .join(format!("{name}.bin"))
    }

    pub fn metrics(&self, name: &str) -> PathBuf {
        self.root.join("metrics").join(format!("{name}.jsonl"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Fail with `MissingArtifact` unless `path` exists.
pub fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    create_parent(path)?;
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    require(path)?;
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path.display().to_string(), format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(rows)
}

/// One evaluation episode of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub run_seed: u64,
    pub label: String,
    #[serde(flatten)]
    pub record: EpisodeRecord,
}

/// One fine-tuning iteration of one method on one goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRow {
    pub method: String,
    pub run_seed: u64,
    pub goal: usize,
    pub label: String,
    #[serde(flatten)]
    pub stats: IterationStats,
}

/// One imitation epoch of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationRow {
    pub method: String,
    pub run_seed: u64,
    #[serde(flatten)]
    pub epoch: EpochRecord,
}

/// Successful rollouts kept for distillation from one goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillRow {
    pub run_seed: u64,
    pub goal: usize,
    pub label: String,
    pub rollouts: usize,
    pub kept: usize,
}

/// An evaluation episode from an ablation setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `window` or `reward`.
    pub ablation: String,
    /// The varied setting, e.g. `30` or `euclidean`.
    pub setting: String,
    pub run_seed: u64,
    pub label: String,
    #[serde(flatten)]
    pub record: EpisodeRecord,
}
