//! Versioned binary container for named f64 arrays.
//!
//! Layout (little-endian): magic `MBCKPT01`, `u32` format version, `u32`
//! header length and canonical (key-sorted, compact) JSON header, `u64`
//! training step, `u32` array count, then per array: `u32` name length,
//! UTF-8 name, `u32` rank, `u64` per dimension, row-major `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use super::params::{ArchitectureConfig, ParamSet};
use super::tensor::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"MBCKPT01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn from_matrix(name: impl Into<String>, m: &Matrix) -> Self {
        Self {
            name: name.into(),
            shape: vec![m.rows, m.cols],
            data: m.data.clone(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        match self.shape[..] {
            [r, c] if r * c == self.data.len() => Ok(Matrix::from_vec(r, c, self.data.clone())),
            _ => Err(Error::contract(format!(
                "array {} is not a matrix",
                self.name
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub header: serde_json::Value,
    pub step: u64,
    pub arrays: Vec<NamedArray>,
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        // serde_json's default map is ordered by key, so this is canonical
        let header = self.header.to_string();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader {
            buf: bytes,
            pos: 0,
            path,
        };
        if r.take(8)? != MAGIC {
            return Err(format_err(path, "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(format_err(
                path,
                format!("unsupported format version {version}"),
            ));
        }
        let hlen = r.u32()? as usize;
        let header =
            serde_json::from_slice(r.take(hlen)?).map_err(|e| format_err(path, e.to_string()))?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|e| format_err(path, e.to_string()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(format_err(path, "trailing bytes"));
        }
        Ok(Self {
            header,
            step,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        // write-then-rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, path)
    }

    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Collects arrays named `{prefix}{param}` into a parameter set for `arch`.
    pub fn params(&self, arch: &ArchitectureConfig, prefix: &str) -> Result<ParamSet> {
        let layout = arch.layout();
        let mut p = ParamSet::zeros(&layout);
        for (i, (name, _, _)) in layout.iter().enumerate() {
            let key = format!("{prefix}{name}");
            let a = self
                .array(&key)
                .ok_or_else(|| Error::Missing(format!("checkpoint array {key}")))?;
            p.tensors[i] = a.to_matrix()?;
        }
        p.check_layout(&layout)?;
        Ok(p)
    }

    pub fn push_params(&mut self, prefix: &str, p: &ParamSet) {
        for (n, t) in p.names.iter().zip(&p.tensors) {
            self.arrays
                .push(NamedArray::from_matrix(format!("{prefix}{n}"), t));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(format_err(self.path, "truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
