use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Module, NnError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PNDACKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Decoded checkpoint: a JSON config plus named parameter tensors.
///
/// Layout (little-endian): magic, `u32` version, `u32` config length, config
/// JSON bytes, `u32` tensor count, then per tensor a `u32` name length, the
/// name, a `u32` rank, `u64` dims and `f32` data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl Checkpoint {
    pub fn from_module<C: Serialize>(config: &C, module: &dyn Module) -> Result<Self> {
        Ok(Self {
            config: serde_json::to_value(config)?,
            tensors: module.params().into_iter().map(|p| (p.name.clone(), p.shape.clone(), p.value.clone())).collect(),
        })
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C> {
        Ok(serde_json::from_value(self.config.clone())?)
    }

    /// Copies tensors into `module`, matching by name. Every module parameter
    /// must be present with the same shape.
    pub fn apply(&self, module: &mut dyn Module) -> Result<()> {
        let by_name: HashMap<&str, (&Vec<usize>, &Vec<f32>)> =
            self.tensors.iter().map(|(n, s, d)| (n.as_str(), (s, d))).collect();
        for p in module.params_mut() {
            let (shape, data) = by_name
                .get(p.name.as_str())
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {}", p.name)))?;
            if **shape != p.shape {
                return Err(NnError::Checkpoint(format!("tensor {} has shape {:?}, expected {:?}", p.name, shape, p.shape)));
            }
            p.value.copy_from_slice(data);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.config)?;
        put_len(&mut out, config.len())?;
        out.extend_from_slice(&config);
        put_len(&mut out, self.tensors.len())?;
        for (name, shape, data) in &self.tensors {
            if shape.iter().product::<usize>() != data.len() {
                return Err(NnError::Checkpoint(format!("tensor {name} data does not match its shape")));
            }
            put_len(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_len(&mut out, shape.len())?;
            for d in shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let len = r.u32()? as usize;
        let config = serde_json::from_slice(r.take(len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                let d = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                shape.push(usize::try_from(d).map_err(|_| NnError::Checkpoint("dimension overflow".into()))?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |a, d| a.checked_mul(*d))
                .ok_or_else(|| NnError::Checkpoint("tensor size overflow".into()))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| NnError::Checkpoint("tensor size overflow".into()))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            tensors.push((name, shape, data));
        }
        if r.pos != bytes.len() {
            return Err(NnError::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { config, tensors })
    }
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| NnError::Checkpoint("length exceeds u32".into()))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| NnError::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint<C: Serialize>(path: &Path, config: &C, module: &dyn Module) -> Result<()> {
    let bytes = Checkpoint::from_module(config, module)?.to_bytes()?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
