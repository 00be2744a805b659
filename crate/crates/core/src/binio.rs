//! Little-endian primitives shared by the binary file formats.

use std::io::{self, Read, Write};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a {expected} file (bad magic bytes)")]
    BadMagic { expected: &'static str },
    #[error("{kind} file version {found} is newer than the supported version {supported}; upgrade hopnet to read it")]
    UnsupportedVersion { kind: &'static str, found: u32, supported: u32 },
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

pub struct BinWriter<W: Write> {
    inner: W,
}

impl<W: Write> BinWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> W {
        self.inner
    }

    pub fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.inner.write_all(b)
    }

    pub fn u8(&mut self, v: u8) -> io::Result<()> {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64s(&mut self, vs: &[f64]) -> io::Result<()> {
        vs.iter().try_for_each(|&v| self.f64(v))
    }

    /// u32 length prefix followed by UTF-8 bytes.
    pub fn string(&mut self, s: &str) -> io::Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }
}

pub struct BinReader<R: Read> {
    inner: R,
}

/// Upper bound on any single length field, to fail fast on garbage input.
const MAX_LEN: u64 = 1 << 32;

impl<R: Read> BinReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FormatError::Corrupt("unexpected end of file".into()),
            _ => FormatError::Io(e),
        })?;
        Ok(b)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.bytes::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    pub fn len(&mut self, what: &str) -> Result<usize, FormatError> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(FormatError::Corrupt(format!("implausible {what} length {n}")));
        }
        Ok(n as usize)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn string(&mut self) -> Result<String, FormatError> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| FormatError::Corrupt("truncated string".into()))?;
        String::from_utf8(b).map_err(|_| FormatError::Corrupt("invalid UTF-8".into()))
    }

    /// Reads and checks the 8-byte magic and the version word.
    pub fn header(&mut self, magic: &[u8; 8], kind: &'static str, supported: u32) -> Result<u32, FormatError> {
        if &self.bytes::<8>()? != magic {
            return Err(FormatError::BadMagic { expected: kind });
        }
        let found = self.u32()?;
        if found > supported || found == 0 {
            return Err(FormatError::UnsupportedVersion { kind, found, supported });
        }
        Ok(found)
    }

    /// Errors unless the input is exhausted.
    pub fn finish(mut self) -> Result<(), FormatError> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(FormatError::Corrupt("trailing bytes".into())),
        }
    }
}
