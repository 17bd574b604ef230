//! Binary checkpoint container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "EQPCKPT\0" | u32 version | u64 meta_len | meta JSON
//! u32 tensor_count
//! per tensor: u32 name_len | name | u32 ndim | u64 dims.. | f64 values (row-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::net::{ModelConfig, TreePolicy};
use crate::envs::EnvKind;
use crate::error::CheckpointError;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"EQPCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub env: EnvKind,
    pub n: usize,
    pub num_actions: usize,
    pub seed: u64,
    pub epoch: Option<usize>,
    pub model: ModelConfig,
}

impl CheckpointMeta {
    pub fn for_policy<T: Scalar>(policy: &TreePolicy<T>, seed: u64, epoch: Option<usize>) -> Self {
        let model = policy.config().clone();
        CheckpointMeta {
            env: model.env,
            n: model.n,
            num_actions: model.num_actions,
            seed,
            epoch,
            model,
        }
    }
}

/// `<out>/epoch_<k>.ckpt`
pub fn checkpoint_path(out: &Path, epoch: usize) -> PathBuf {
    out.join(format!("epoch_{epoch}.ckpt"))
}

pub fn write_checkpoint<T: Scalar, W: Write>(
    w: &mut W,
    policy: &TreePolicy<T>,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let json = serde_json::to_vec(meta)?;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let blocks = policy.layout().blocks();
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for b in blocks {
        w.write_all(&(b.name.len() as u32).to_le_bytes())?;
        w.write_all(b.name.as_bytes())?;
        w.write_all(&(b.shape.len() as u32).to_le_bytes())?;
        for &d in &b.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &policy.params()[b.range()] {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

/// Reads a checkpoint and rebuilds the policy. Every tensor must match the
/// architecture implied by the stored model config.
pub fn read_checkpoint<T: Scalar, R: Read>(r: &mut R) -> Result<(TreePolicy<T>, CheckpointMeta), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let meta_len = read_u64(r)?;
    if meta_len > 1 << 24 {
        return Err(bad("metadata too large"));
    }
    let mut json = vec![0u8; meta_len as usize];
    r.read_exact(&mut json)?;
    let meta: CheckpointMeta = serde_json::from_slice(&json)?;
    if meta.model.env != meta.env || meta.model.n != meta.n || meta.model.num_actions != meta.num_actions {
        return Err(bad("metadata disagrees with model config"));
    }
    let mut policy = TreePolicy::<T>::new(meta.model.clone(), meta.seed);
    let count = read_u32(r)? as usize;
    if count != policy.layout().blocks().len() {
        return Err(bad(format!(
            "{count} tensors, architecture has {}",
            policy.layout().blocks().len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        if name_len > 4096 {
            return Err(bad("tensor name too long"));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not utf-8"))?;
        let ndim = read_u32(r)? as usize;
        if ndim > 8 {
            return Err(bad(format!("tensor `{name}` has {ndim} dims")));
        }
        let shape = (0..ndim)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let (idx, block) = policy
            .layout()
            .blocks()
            .iter()
            .enumerate()
            .find(|(_, b)| b.name == name)
            .map(|(i, b)| (i, b.clone()))
            .ok_or_else(|| bad(format!("unknown tensor `{name}`")))?;
        if block.shape != shape {
            return Err(bad(format!("tensor `{name}` has shape {shape:?}, expected {:?}", block.shape)));
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(bad(format!("duplicate tensor `{name}`")));
        }
        let params = policy.params_mut();
        for v in &mut params[block.range()] {
            *v = T::from_f64(f64::from_le_bytes({
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                b
            }))
            .ok_or_else(|| bad("value out of range"))?;
        }
    }
    Ok((policy, meta))
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    policy: &TreePolicy<T>,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, policy, meta)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(TreePolicy<T>, CheckpointMeta), CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for env in [EnvKind::Ra, EnvKind::Poly, EnvKind::Aim] {
            let p = TreePolicy::<f64>::new(ModelConfig::for_env(env).with_value_head(), 11);
            let meta = CheckpointMeta::for_policy(&p, 11, Some(3));
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &p, &meta).unwrap();
            let (q, m) = read_checkpoint::<f64, _>(&mut buf.as_slice()).unwrap();
            assert_eq!(m, meta);
            let same = p.params().iter().zip(q.params()).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{env}");
        }
    }

    #[test]
    fn f32_round_trip_is_bit_exact() {
        let p = TreePolicy::<f32>::new(ModelConfig::for_env(EnvKind::Ra), 2);
        let meta = CheckpointMeta::for_policy(&p, 2, None);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, &meta).unwrap();
        let (q, _) = read_checkpoint::<f32, _>(&mut buf.as_slice()).unwrap();
        assert!(p.params().iter().zip(q.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(
            read_checkpoint::<f64, _>(&mut &b"not a checkpoint at all"[..]),
            Err(CheckpointError::Format(_))
        ));
        let p = TreePolicy::<f64>::new(ModelConfig::for_env(EnvKind::Ra), 0);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, &CheckpointMeta::for_policy(&p, 0, None)).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint::<f64, _>(&mut buf.as_slice()).is_err());
    }
}
