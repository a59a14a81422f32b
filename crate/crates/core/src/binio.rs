//! Little-endian primitives shared by the binary artifacts.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) struct Writer<W: Write> {
    inner: W,
    what: &'static str,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W, what: &'static str) -> Self {
        Writer { inner, what }
    }

    fn wrap(&self, e: std::io::Error) -> Error {
        Error::format(self.what, e.to_string())
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b).map_err(|e| self.wrap(e))
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.inner.write_u32::<LE>(v).map_err(|e| self.wrap(e))
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.inner.write_u64::<LE>(v).map_err(|e| self.wrap(e))
    }

    pub fn i64(&mut self, v: i64) -> Result<()> {
        self.inner.write_i64::<LE>(v).map_err(|e| self.wrap(e))
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.inner.write_f64::<LE>(v).map_err(|e| self.wrap(e))
    }

    pub fn len(&mut self, n: usize) -> Result<()> {
        self.u64(n as u64)
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }

    pub fn strs(&mut self, xs: &[String]) -> Result<()> {
        self.len(xs.len())?;
        xs.iter().try_for_each(|s| self.str(s))
    }

    pub fn f64s(&mut self, xs: &[f64]) -> Result<()> {
        self.len(xs.len())?;
        xs.iter().try_for_each(|&v| self.f64(v))
    }

    pub fn i64s(&mut self, xs: &[i64]) -> Result<()> {
        self.len(xs.len())?;
        xs.iter().try_for_each(|&v| self.i64(v))
    }

    pub fn usizes(&mut self, xs: &[usize]) -> Result<()> {
        self.len(xs.len())?;
        xs.iter().try_for_each(|&v| self.u64(v as u64))
    }

    pub fn into_inner(self) -> W {
        self.inner
    }

    /// Rows, columns, then row-major values.
    pub fn matrix(&mut self, m: &Array2<f64>) -> Result<()> {
        self.len(m.nrows())?;
        self.len(m.ncols())?;
        m.iter().try_for_each(|&v| self.f64(v))
    }
}

pub(crate) struct Reader<R: Read> {
    inner: R,
    what: &'static str,
}

// Guards length prefixes of corrupt files against huge allocations.
const MAX_LEN: u64 = 1 << 32;

impl<R: Read> Reader<R> {
    pub fn new(inner: R, what: &'static str) -> Self {
        Reader { inner, what }
    }

    pub fn fail(&self, msg: impl Into<String>) -> Error {
        Error::format(self.what, msg)
    }

    fn wrap(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            self.fail("truncated")
        } else {
            self.fail(e.to_string())
        }
    }

    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| self.wrap(e))?;
        Ok(buf)
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.inner.read_u32::<LE>().map_err(|e| self.wrap(e))
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.inner.read_u64::<LE>().map_err(|e| self.wrap(e))
    }

    pub fn i64(&mut self) -> Result<i64> {
        self.inner.read_i64::<LE>().map_err(|e| self.wrap(e))
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.inner.read_f64::<LE>().map_err(|e| self.wrap(e))
    }

    pub fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(self.fail(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| self.wrap(e))?;
        String::from_utf8(buf).map_err(|_| self.fail("invalid utf-8 string"))
    }

    pub fn strs(&mut self) -> Result<Vec<String>> {
        let n = self.len()?;
        (0..n).map(|_| self.str()).collect()
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn i64s(&mut self) -> Result<Vec<i64>> {
        let n = self.len()?;
        (0..n).map(|_| self.i64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| Ok(self.u64()? as usize)).collect()
    }

    pub fn matrix(&mut self) -> Result<Array2<f64>> {
        let (r, c) = (self.len()?, self.len()?);
        if (r as u64) * (c as u64) > MAX_LEN {
            return Err(self.fail("implausible matrix size"));
        }
        let data = (0..r * c).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Array2::from_shape_vec((r, c), data).map_err(|e| self.fail(e.to_string()))
    }

    /// Fails unless the input is fully consumed.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.fail("trailing bytes")),
            Err(e) => Err(self.wrap(e)),
        }
    }
}
