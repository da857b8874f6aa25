//! Binary checkpoint container.
//!
//! ```text
//! magic        8 bytes   "NAFCKPT1"
//! config_len   u32 LE    byte length of the config echo
//! config       UTF-8     "key=value\n" lines, keys sorted
//! n_tensors    u32 LE
//! per tensor:
//!   name_len   u32 LE, name UTF-8
//!   ndim       u32 LE, ndim × u64 LE dimensions
//!   payload    product(dims) × f64 LE, row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NAFCKPT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::mismatch(expected, data.len()));
        }
        Ok(Self {
            name: name.into(),
            shape,
            data,
        })
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let len = data.len();
        Self {
            name: name.into(),
            shape: vec![len],
            data,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub config: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.config
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| malformed(format!("missing config key {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| malformed(format!("config key {key:?} has invalid value {raw:?}")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| malformed(format!("missing tensor {name:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        let mut config = String::new();
        for (k, v) in &self.config {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(malformed(format!("config entry {k:?} cannot be encoded")));
            }
            config.push_str(&format!("{k}={v}\n"));
        }
        write_u32(&mut w, config.len())?;
        w.write_all(config.as_bytes())?;
        write_u32(&mut w, self.tensors.len())?;
        for t in &self.tensors {
            write_u32(&mut w, t.name.len())?;
            w.write_all(t.name.as_bytes())?;
            write_u32(&mut w, t.shape.len())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| malformed("file too short for header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(malformed("bad magic header"));
        }
        let config_len = read_u32(&mut r)?;
        let config_text = String::from_utf8(read_bytes(&mut r, config_len)?)
            .map_err(|_| malformed("config echo is not UTF-8"))?;
        let mut config = BTreeMap::new();
        for line in config_text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| malformed(format!("config line {line:?} lacks '='")))?;
            config.insert(k.to_string(), v.to_string());
        }
        let n_tensors = read_u32(&mut r)?;
        let mut tensors = Vec::with_capacity(n_tensors.min(1024));
        for _ in 0..n_tensors {
            let name_len = read_u32(&mut r)?;
            let name = String::from_utf8(read_bytes(&mut r, name_len)?)
                .map_err(|_| malformed("tensor name is not UTF-8"))?;
            let ndim = read_u32(&mut r)?;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b).map_err(|_| malformed("truncated shape"))?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| malformed("tensor shape overflows"))?;
            let bytes = read_bytes(&mut r, len.checked_mul(8).ok_or_else(|| malformed("tensor too large"))?)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(malformed("trailing bytes after last tensor"));
        }
        Ok(Self { config, tensors })
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &buf)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| malformed("length exceeds u32"))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| malformed("truncated length field"))?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_bytes<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(malformed("truncated payload"));
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.set("net.sizes", "3,4,6");
        ck.set("p", 5);
        ck.tensors.push(Tensor::new("w", vec![2, 3], vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE, 0.0, -0.0]).unwrap());
        ck.tensors.push(Tensor::vector("b", vec![0.1, 0.2]));
        ck
    }

    #[test]
    fn bytes_round_trip() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"NAFCKPT1");
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.parse::<usize>("p").unwrap(), 5);
        assert!(back.get("missing").is_err());
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(Checkpoint::read_from(long.as_slice()).is_err());
        assert!(Tensor::new("x", vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn atomic_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.naf");
        sample().save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), sample());
        assert!(!path.with_extension("tmp").exists());
    }
}
