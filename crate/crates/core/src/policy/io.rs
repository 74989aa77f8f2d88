//! Policy persistence: a flat little-endian binary tensor file plus a JSON
//! manifest describing shapes and input standardisation.
//!
//! Binary layout: magic `RLYP`, `u32` version, `u64` parameter count, the
//! parameters, then `u64` input dimension followed by the standardisation
//! means and scales. All floats are `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MlpShape, PolicyParams, Standardizer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RLYP";
pub const POLICY_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyManifest {
    pub format: String,
    pub version: u32,
    pub shape: MlpShape,
    pub param_count: usize,
    pub tensors: Vec<TensorEntry>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub binary_sha256: String,
}

pub fn manifest_path(bin: &Path) -> PathBuf {
    bin.with_extension("manifest.json")
}

fn encode(params: &PolicyParams) -> Vec<u8> {
    let std = params.standardizer();
    let mut buf = Vec::with_capacity(24 + 8 * (params.num_params() + 2 * std.dim()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&POLICY_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.num_params() as u64).to_le_bytes());
    for v in params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(std.dim() as u64).to_le_bytes());
    for v in std.mean.iter().chain(&std.scale) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Write `<path>` and its manifest next to it.
pub fn save_policy(path: &Path, params: &PolicyParams) -> Result<()> {
    let bytes = encode(params);
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, shape) in params.shape().tensors() {
        let len: usize = shape.iter().product();
        tensors.push(TensorEntry { name, shape, offset });
        offset += len;
    }
    let manifest = PolicyManifest {
        format: "relay.policy".into(),
        version: POLICY_VERSION,
        shape: params.shape().clone(),
        param_count: params.num_params(),
        tensors,
        input_mean: params.standardizer().mean.clone(),
        input_scale: params.standardizer().scale.clone(),
        binary_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    fs::write(path, &bytes)?;
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::format(self.path.display().to_string(), "truncated policy file"))?;
        self.pos = end;
        Ok(chunk.try_into().unwrap())
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take()?) as usize)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.take()?))).collect()
    }
}

pub fn load_policy(path: &Path) -> Result<PolicyParams> {
    let read = |p: &Path| {
        fs::read(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(p.to_path_buf()),
            _ => Error::Io(e),
        })
    };
    let bytes = read(path)?;
    let mpath = manifest_path(path);
    let manifest: PolicyManifest = serde_json::from_slice(&read(&mpath)?)
        .map_err(|e| Error::format(mpath.display().to_string(), e.to_string()))?;
    let bad = |detail: &str| Error::format(path.display().to_string(), detail.to_string());
    if manifest.version != POLICY_VERSION {
        return Err(bad("unsupported manifest version"));
    }
    if hex::encode(Sha256::digest(&bytes)) != manifest.binary_sha256 {
        return Err(bad("checksum does not match manifest"));
    }
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if &cur.take::<4>()? != MAGIC {
        return Err(bad("bad magic"));
    }
    if u32::from_le_bytes(cur.take()?) != POLICY_VERSION {
        return Err(bad("unsupported binary version"));
    }
    let count = cur.u64()?;
    if count != manifest.param_count || count != manifest.shape.num_params() {
        return Err(bad("parameter count disagrees with manifest"));
    }
    let values = cur.floats(count)?;
    let dim = cur.u64()?;
    let mean = cur.floats(dim)?;
    let scale = cur.floats(dim)?;
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    PolicyParams::from_parts(manifest.shape, values, Standardizer { mean, scale })
}
