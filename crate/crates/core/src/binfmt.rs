//! Versioned little-endian binary records shared by model files and the
//! feature cache: 4-byte magic, u32 version, then a sequence of fields.
//! Float arrays are stored as a u64 length followed by raw f64 values, so a
//! round trip is bit-exact.

use std::path::Path;

use crate::error::{Error, Result};

pub struct RecordWriter {
    buf: Vec<u8>,
}

impl RecordWriter {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut buf = magic.to_vec();
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn put_u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn put_f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn put_f64s(&mut self, v: &[f64]) -> &mut Self {
        self.put_u64(v.len() as u64);
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        self
    }

    pub fn put_str(&mut self, s: &str) -> &mut Self {
        self.put_u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.buf)?;
        Ok(())
    }
}

pub struct RecordReader<'a> {
    data: &'a [u8],
    pos: usize,
    pub version: u32,
}

impl<'a> RecordReader<'a> {
    pub fn new(data: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if data.len() < 8 || &data[..4] != magic {
            return Err(Error::Format(format!(
                "expected magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        Ok(Self { data, pos: 8, version })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format("record truncated".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_len(&mut self) -> Result<usize> {
        let n = self.get_u64()?;
        if n > (self.data.len() - self.pos) as u64 {
            return Err(Error::Format(format!("length {n} exceeds record size")));
        }
        Ok(n as usize)
    }

    pub fn get_f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.get_len()?;
        let bytes = self.take(n * 8)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn get_str(&mut self) -> Result<String> {
        let n = self.get_len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}
