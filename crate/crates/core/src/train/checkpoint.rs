//! Binary checkpoint container.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic            4 bytes   "TDCG"
//! version          u32
//! config digest    32 bytes  SHA-256 of the config JSON below
//! config length    u32
//! config           JSON (UTF-8)
//! counters         6 x u64   epoch, cursor, step, critic steps,
//!                            generator optimizer steps, critic optimizer steps
//! tensor count     u32
//! table entry      u16 name length, name (UTF-8), u8 dtype (0 = f32, 1 = f64),
//!                  u8 rank, rank x u64 extents, u64 byte offset into the data section
//! data length      u64
//! data             raw little-endian values
//! ```
//!
//! Tensor names are `gen/<param>`, `disc/<param>` and `opt_gen.m/<param>`,
//! `opt_gen.v/<param>`, `opt_disc.m/<param>`, `opt_disc.v/<param>` for the Adam moments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Progress, TrainConfig, TrainError, Trainer};
use crate::autodiff::Tensor;
use crate::models::{Generator, Module};
use crate::scalar::{DType, Scalar};

pub const MAGIC: &[u8; 4] = b"TDCG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic {found:02x?})")]
    BadMagic { found: Vec<u8> },
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("config digest mismatch: stored {stored}, computed {computed}")]
    DigestMismatch { stored: String, computed: String },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint has no tensor named {0}")]
    MissingTensor(String),
    #[error("tensor {name}: stored as {found:?}, expected {expected:?}")]
    DType { name: String, found: DType, expected: DType },
    #[error("tensor {name}: stored shape {found:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl TensorRecord {
    fn from_values<T: Scalar>(name: String, shape: &[usize], values: &[T]) -> Self {
        let mut data = Vec::with_capacity(values.len() * T::DTYPE.size());
        for &v in values {
            v.write_le(&mut data);
        }
        TensorRecord {
            name,
            dtype: T::DTYPE,
            shape: shape.to_vec(),
            data,
        }
    }

    fn values<T: Scalar>(&self, expected_shape: &[usize]) -> Result<Vec<T>, CheckpointError> {
        if self.dtype != T::DTYPE {
            return Err(CheckpointError::DType {
                name: self.name.clone(),
                found: self.dtype,
                expected: T::DTYPE,
            });
        }
        if self.shape != expected_shape {
            return Err(CheckpointError::Shape {
                name: self.name.clone(),
                expected: expected_shape.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(self.data.chunks_exact(T::DTYPE.size()).map(T::read_le).collect())
    }
}

/// Decoded checkpoint: configuration, schedule counters and named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub digest: String,
    pub progress: Progress,
    pub gen_opt_steps: u64,
    pub disc_opt_steps: u64,
    pub tensors: Vec<TensorRecord>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(CheckpointError::Truncated { context })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, context: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, context)?[0])
    }

    fn u16(&mut self, context: &'static str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, context)?.try_into().unwrap()))
    }

    fn u32(&mut self, context: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().unwrap()))
    }

    fn u64(&mut self, context: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }

    fn len(&mut self, context: &'static str) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64(context)?).map_err(|_| CheckpointError::Format(format!("{context} overflows")))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config = self.config.canonical_json();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&config));
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        let p = self.progress;
        for c in [p.epoch, p.cursor, p.step, p.disc_steps, self.gen_opt_steps, self.disc_opt_steps] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dtype.tag());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += t.data.len() as u64;
        }
        out.extend_from_slice(&offset.to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&t.data);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf, pos: 0 };
        let magic = r.take(4, "magic").map_err(|_| CheckpointError::BadMagic { found: buf.to_vec() })?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic { found: magic.to_vec() });
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let stored = hex::encode(r.take(32, "config digest")?);
        let config_len = r.u32("config length")? as usize;
        let config_bytes = r.take(config_len, "config")?;
        let computed = hex::encode(Sha256::digest(config_bytes));
        if stored != computed {
            return Err(CheckpointError::DigestMismatch { stored, computed });
        }
        let config: TrainConfig =
            serde_json::from_slice(config_bytes).map_err(|e| CheckpointError::Format(format!("config: {e}")))?;
        let mut counters = [0u64; 6];
        for c in &mut counters {
            *c = r.u64("counters")?;
        }
        let count = r.u32("tensor count")? as usize;
        let mut table = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u16("tensor name")? as usize;
            let name = String::from_utf8(r.take(name_len, "tensor name")?.to_vec())
                .map_err(|_| CheckpointError::Format("tensor name is not UTF-8".into()))?;
            let tag = r.u8("tensor dtype")?;
            let dtype = DType::from_tag(tag).ok_or_else(|| CheckpointError::Format(format!("unknown dtype tag {tag}")))?;
            let rank = r.u8("tensor rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.len("tensor shape")?);
            }
            let offset = r.len("tensor offset")?;
            table.push((name, dtype, shape, offset));
        }
        let data_len = r.len("data length")?;
        let data = r.take(data_len, "tensor data")?;
        if r.pos != buf.len() {
            return Err(CheckpointError::Format(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        let mut tensors = Vec::with_capacity(table.len());
        for (name, dtype, shape, offset) in table {
            let bytes = shape
                .iter()
                .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| CheckpointError::Format(format!("tensor {name} is too large")))?;
            let slice = offset
                .checked_add(bytes)
                .filter(|&end| end <= data.len())
                .map(|end| &data[offset..end])
                .ok_or(CheckpointError::Truncated { context: "tensor data" })?;
            tensors.push(TensorRecord {
                name,
                dtype,
                shape,
                data: slice.to_vec(),
            });
        }
        Ok(Checkpoint {
            config,
            digest: stored,
            progress: Progress {
                epoch: counters[0],
                cursor: counters[1],
                step: counters[2],
                disc_steps: counters[3],
            },
            gen_opt_steps: counters[4],
            disc_opt_steps: counters[5],
            tensors,
        })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn tensor(&self, name: &str) -> Result<&TensorRecord, CheckpointError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    /// Overwrites every parameter of `module` with the tensor stored under `prefix/<name>`.
    pub fn restore_module<T: Scalar, M: Module<T>>(&self, prefix: &str, module: &mut M) -> Result<(), CheckpointError> {
        for (name, p) in module.named_parameters_mut() {
            let shape = p.shape().to_vec();
            let values = self.tensor(&format!("{prefix}/{name}"))?.values::<T>(&shape)?;
            *p = Tensor::parameter(values, &shape).map_err(|e| CheckpointError::Format(e.to_string()))?;
        }
        Ok(())
    }

    /// Generator with the stored weights, for inference.
    pub fn generator<T: Scalar>(&self) -> Result<Generator<T>, TrainError> {
        let mut g = Generator::new(self.config.model.clone(), 0)?;
        self.restore_module("gen", &mut g)?;
        Ok(g)
    }
}

fn module_records<T: Scalar, M: Module<T>>(prefix: &str, m: &M, out: &mut Vec<TensorRecord>) {
    for (name, t) in m.named_parameters() {
        out.push(TensorRecord::from_values(format!("{prefix}/{name}"), t.shape(), t.data()));
    }
}

fn moment_records<T: Scalar, M: Module<T>>(prefix: &str, m: &M, moments: (&[Vec<T>], &[Vec<T>]), out: &mut Vec<TensorRecord>) {
    for (which, buffers) in [("m", moments.0), ("v", moments.1)] {
        for ((name, t), values) in m.named_parameters().into_iter().zip(buffers) {
            out.push(TensorRecord::from_values(format!("{prefix}.{which}/{name}"), t.shape(), values));
        }
    }
}

fn restore_moments<T: Scalar, M: Module<T>>(ckpt: &Checkpoint, prefix: &str, m: &M) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>), CheckpointError> {
    let read = |which: &str| -> Result<Vec<Vec<T>>, CheckpointError> {
        m.named_parameters()
            .into_iter()
            .map(|(name, t)| ckpt.tensor(&format!("{prefix}.{which}/{name}"))?.values::<T>(t.shape()))
            .collect()
    };
    Ok((read("m")?, read("v")?))
}

impl<T: Scalar> Trainer<T> {
    /// Snapshot of models, optimizer moments and schedule counters.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut tensors = Vec::new();
        module_records("gen", &self.generator, &mut tensors);
        module_records("disc", &self.discriminator, &mut tensors);
        moment_records("opt_gen", &self.generator, self.opt_gen.moments(), &mut tensors);
        moment_records("opt_disc", &self.discriminator, self.opt_disc.moments(), &mut tensors);
        Checkpoint {
            config: self.cfg.clone(),
            digest: self.cfg.digest(),
            progress: self.progress,
            gen_opt_steps: self.opt_gen.steps(),
            disc_opt_steps: self.opt_disc.steps(),
            tensors,
        }
    }

    /// Rebuilds a trainer from a checkpoint so that continuing it reproduces the
    /// uninterrupted run.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let mut tr = Trainer::new(ckpt.config.clone())?;
        ckpt.restore_module("gen", &mut tr.generator)?;
        ckpt.restore_module("disc", &mut tr.discriminator)?;
        let (m, v) = restore_moments(ckpt, "opt_gen", &tr.generator)?;
        tr.opt_gen.restore(ckpt.gen_opt_steps, m, v)?;
        let (m, v) = restore_moments(ckpt, "opt_disc", &tr.discriminator)?;
        tr.opt_disc.restore(ckpt.disc_opt_steps, m, v)?;
        tr.progress = ckpt.progress;
        Ok(tr)
    }

    /// Replaces the step cap and epoch count, e.g. to extend a resumed run. Everything
    /// else in the configuration is fixed by the checkpoint.
    pub fn set_schedule(&mut self, epochs: u64, max_steps: Option<u64>) {
        self.cfg.epochs = epochs;
        self.cfg.max_steps = max_steps;
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{bank, tiny_config};
    use super::*;

    fn trained(steps: u64) -> Trainer<f64> {
        let cfg = TrainConfig {
            epochs: 10,
            max_steps: Some(steps),
            ..tiny_config()
        };
        let mut tr = Trainer::new(cfg).unwrap();
        tr.run(&bank(3, 256), |_, _| Ok(())).unwrap();
        tr
    }

    #[test]
    fn bytes_roundtrip() {
        let ck = trained(2).checkpoint();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let tr = Trainer::<f64>::from_checkpoint(&back).unwrap();
        assert_eq!(tr.checkpoint(), ck);
    }

    #[test]
    fn damaged_files_are_named() {
        let bytes = trained(1).checkpoint().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Version { found: 9, .. })));
        let mut bad = bytes.clone();
        bad[50] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::DigestMismatch { .. })));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated { .. })
        ));
    }

    #[test]
    fn dtype_is_checked() {
        let ck = trained(1).checkpoint();
        assert!(matches!(Trainer::<f32>::from_checkpoint(&ck), Err(TrainError::Checkpoint(CheckpointError::DType { .. }))));
    }

    #[test]
    fn atomic_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = trained(1).checkpoint();
        ck.save(&path).unwrap();
        assert!(!dir.path().join("model.ckpt.tmp").exists());
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        let missing = dir.path().join("nope.ckpt");
        match Checkpoint::load(&missing) {
            Err(CheckpointError::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resumed_run_matches_uninterrupted_run() {
        let data = bank(5, 256);
        let cfg = TrainConfig {
            epochs: 3,
            ..tiny_config()
        };
        let mut full = Trainer::<f64>::new(cfg.clone()).unwrap();
        let mut full_rows = Vec::new();
        full.run(&data, |_, r| {
            full_rows.push(*r);
            Ok(())
        })
        .unwrap();

        let mut first = Trainer::<f64>::new(TrainConfig {
            max_steps: Some(4),
            ..cfg.clone()
        })
        .unwrap();
        let mut rows = Vec::new();
        first.run(&data, |_, r| {
            rows.push(*r);
            Ok(())
        })
        .unwrap();
        let bytes = first.checkpoint().to_bytes();
        drop(first);
        let mut resumed = Trainer::<f64>::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        resumed.set_schedule(3, None);
        resumed.run(&data, |_, r| {
            rows.push(*r);
            Ok(())
        })
        .unwrap();

        assert_eq!(rows, full_rows);
        assert_eq!(resumed.checkpoint().tensors, full.checkpoint().tensors);
    }
}
