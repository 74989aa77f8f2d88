//! Line-delimited JSON persistence.
//!
//! Every file starts with a header object naming the format and version;
//! each following line holds one trajectory or one tuple. `serde_json`
//! writes `f64` in shortest round-trip form, so reloading is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Dataset, Level, Trajectory, TupleRef};
use crate::error::{Error, Result};

pub const TRAJECTORY_FORMAT: &str = "relay.trajectories";
pub const DATASET_FORMAT: &str = "relay.dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryHeader {
    format: String,
    version: u32,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub level: Level,
    pub count: usize,
    /// File name of the trajectory pool the tuples index into.
    pub source: String,
    pub pool_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TupleRecord {
    traj: u32,
    t: u32,
    goal_t: u32,
    sub_t: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<Vec<f64>>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn parse_line<T: DeserializeOwned>(path: &Path, lineno: usize, line: &str) -> Result<T> {
    serde_json::from_str(line)
        .map_err(|e| Error::format(path.display().to_string(), format!("line {}: {e}", lineno + 1)))
}

fn check_header(path: &Path, format: &str, version: u32, want: &str) -> Result<()> {
    if format != want || version != FORMAT_VERSION {
        return Err(Error::format(
            path.display().to_string(),
            format!("line 1: expected {want} v{FORMAT_VERSION}, found {format} v{version}"),
        ));
    }
    Ok(())
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = TrajectoryHeader {
        format: TRAJECTORY_FORMAT.into(),
        version: FORMAT_VERSION,
        count: trajs.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for traj in trajs {
        serde_json::to_writer(&mut out, traj)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let mut lines = open(path)?.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "line 1: missing header"))?;
    let header: TrajectoryHeader = parse_line(path, 0, &first?)?;
    check_header(path, &header.format, header.version, TRAJECTORY_FORMAT)?;
    let mut trajs = Vec::with_capacity(header.count);
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        trajs.push(parse_line(path, lineno, &line)?);
    }
    if trajs.len() != header.count {
        return Err(Error::format(
            path.display().to_string(),
            format!("header announces {} trajectories, found {}", header.count, trajs.len()),
        ));
    }
    Ok(trajs)
}

/// Write a dataset as index records. With `materialize`, each record also
/// carries its state, goal and action vectors.
pub fn write_dataset(path: &Path, ds: &Dataset, source: &str, materialize: bool) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        level: ds.level(),
        count: ds.len(),
        source: source.into(),
        pool_size: ds.pool().len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (i, r) in ds.refs().enumerate() {
        let rec = TupleRecord {
            traj: r.traj,
            t: r.t,
            goal_t: r.goal_t,
            sub_t: r.sub_t,
            state: materialize.then(|| ds.state(i).to_vec()),
            goal: materialize.then(|| ds.goal(i).to_vec()),
            action: materialize.then(|| ds.action(i).to_vec()),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_header(path: &Path) -> Result<DatasetHeader> {
    let mut lines = open(path)?.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "line 1: missing header"))??;
    let header: DatasetHeader = parse_line(path, 0, &first)?;
    check_header(path, &header.format, header.version, DATASET_FORMAT)?;
    Ok(header)
}

/// Read a dataset against its trajectory pool. Materialised fields, when
/// present, must agree exactly with the pool.
pub fn read_dataset(path: &Path, pool: Vec<Arc<Trajectory>>) -> Result<Dataset> {
    let header = read_dataset_header(path)?;
    if header.pool_size != pool.len() {
        return Err(Error::format(
            path.display().to_string(),
            format!(
                "dataset indexes {} trajectories but the pool holds {}",
                header.pool_size,
                pool.len()
            ),
        ));
    }
    let mut refs = Vec::with_capacity(header.count);
    let mut checks = Vec::new();
    for (lineno, line) in open(path)?.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TupleRecord = parse_line(path, lineno, &line)?;
        refs.push(TupleRef {
            traj: rec.traj,
            t: rec.t,
            goal_t: rec.goal_t,
            sub_t: rec.sub_t,
        });
        if rec.state.is_some() || rec.goal.is_some() || rec.action.is_some() {
            checks.push((refs.len() - 1, lineno, rec));
        }
    }
    if refs.len() != header.count {
        return Err(Error::format(
            path.display().to_string(),
            format!("header announces {} tuples, found {}", header.count, refs.len()),
        ));
    }
    let ds = Dataset::from_refs(header.level, pool, refs)?;
    for (i, lineno, rec) in checks {
        let same = rec.state.as_deref().is_none_or(|s| s == ds.state(i))
            && rec.goal.as_deref().is_none_or(|g| g == ds.goal(i))
            && rec.action.as_deref().is_none_or(|a| a == ds.action(i));
        if !same {
            return Err(Error::format(
                path.display().to_string(),
                format!("line {}: tuple fields disagree with the trajectory pool", lineno + 1),
            ));
        }
    }
    Ok(ds)
}
