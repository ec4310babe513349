//! Self-describing binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PKWS"            magic
//! u32               format version
//! u8                precision flag: 0 = f64, 1 = f32
//! u32 + bytes       metadata block, UTF-8 `key=value` lines
//! u32               record count
//! records:          u16 name length, name bytes, u8 dtype (0 = f64, 1 = f32),
//!                   u8 rank, rank x u64 dims, raw element data
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::encoder::layers::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PKWS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    fn flag(self) -> u8 {
        match self {
            Precision::F64 => 0,
            Precision::F32 => 1,
        }
    }

    fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(Precision::F64),
            1 => Ok(Precision::F32),
            other => Err(Error::Format(format!("unknown precision flag {other}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub precision: Precision,
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Container {
    pub fn new(precision: Precision) -> Self {
        Self {
            precision,
            ..Default::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing metadata key {key:?}")))
    }

    pub fn meta_parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta_str(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value {raw:?} for metadata key {key:?}")))
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.precision.flag());
        let mut meta = String::new();
        for (k, v) in &self.meta {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::Format(format!(
                    "metadata entry {k:?} is not encodable"
                )));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            if name.len() > u16::MAX as usize || t.shape.len() > u8::MAX as usize {
                return Err(Error::Format(format!("tensor {name:?} is not encodable")));
            }
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Shape(format!(
                    "tensor {name:?} has shape {:?} but {} values",
                    t.shape,
                    t.data.len()
                )));
            }
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(self.precision.flag());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match self.precision {
                Precision::F64 => t
                    .data
                    .iter()
                    .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                Precision::F32 => t
                    .data
                    .iter()
                    .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a PKWS container".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let precision = Precision::from_flag(r.u8()?)?;
        let meta_len = r.u32()? as usize;
        let meta_raw = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let mut meta = BTreeMap::new();
        for line in meta_raw.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad metadata line {line:?}")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u32()?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let dtype = Precision::from_flag(r.u8()?)?;
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("tensor {name:?} shape overflows")))?;
            let width = match dtype {
                Precision::F64 => 8,
                Precision::F32 => 4,
            };
            let raw = r.take(
                n.checked_mul(width)
                    .ok_or_else(|| Error::Format(format!("tensor {name:?} size overflows")))?,
            )?;
            let data = match dtype {
                Precision::F64 => raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                Precision::F32 => raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
            };
            tensors.insert(name, Tensor { shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last record",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            precision,
            meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Container {
        let mut c = Container::new(Precision::F64);
        c.set_meta("kind", "test");
        c.set_meta("eps", 1e-5);
        c.insert(
            "a.weight",
            Tensor {
                shape: vec![2, 3],
                data: vec![1.0, -2.5, 3.25, 0.1, f64::MIN_POSITIVE, 7.0],
            },
        );
        c.insert(
            "b",
            Tensor {
                shape: vec![],
                data: vec![42.0],
            },
        );
        c
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"PKWS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 0);
    }

    #[test]
    fn truncation_and_version_errors() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [3, 9, 20, bytes.len() - 1] {
            let err = Container::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Format(_)), "{err}");
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        let err = Container::from_bytes(&bad).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
        let mut extra = bytes;
        extra.push(0);
        assert!(Container::from_bytes(&extra).is_err());
    }

    #[test]
    fn f32_flag_stores_single_precision() {
        let mut c = sample();
        c.precision = Precision::F32;
        let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.precision, Precision::F32);
        let t = back.tensor("a.weight").unwrap();
        assert_eq!(t.data[3], 0.1f32 as f64);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            data in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 0..40),
            key in "[a-z_.]{1,12}",
            value in "[ -~]{0,20}",
        ) {
            let mut c = Container::new(Precision::F64);
            c.set_meta(&key, &value);
            c.insert("t", Tensor { shape: vec![data.len()], data: data.clone() });
            let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
