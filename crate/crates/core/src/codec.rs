//! Little-endian primitives for the binary checkpoint format.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numeric::Neumaier;

pub(crate) struct Enc<W: Write> {
    inner: W,
}

impl<W: Write> Enc<W> {
    pub fn new(inner: W) -> Self {
        Enc { inner }
    }

    pub fn into_inner(self) -> W {
        self.inner
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.inner.write_all(&[v])?;
        Ok(())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.u64(v.to_bits())
    }

    pub fn bool(&mut self, v: bool) -> Result<()> {
        self.u8(v as u8)
    }

    pub fn opt_u64(&mut self, v: Option<u64>) -> Result<()> {
        match v {
            Some(x) => {
                self.u8(1)?;
                self.u64(x)
            }
            None => self.u8(0),
        }
    }

    pub fn opt_f64(&mut self, v: Option<f64>) -> Result<()> {
        self.opt_u64(v.map(f64::to_bits))
    }

    pub fn sum(&mut self, v: &Neumaier) -> Result<()> {
        let (s, c) = v.parts();
        self.f64(s)?;
        self.f64(c)
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b)?;
        Ok(())
    }
}

pub(crate) struct Dec<R: Read> {
    inner: R,
}

impl<R: Read> Dec<R> {
    pub fn new(inner: R) -> Self {
        Dec { inner }
    }

    fn fill<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
        Ok(buf)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.fill::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fill()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.fill()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Checkpoint(format!("invalid bool byte {v}"))),
        }
    }

    pub fn opt_u64(&mut self) -> Result<Option<u64>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.u64()?)),
            v => Err(Error::Checkpoint(format!("invalid option tag {v}"))),
        }
    }

    pub fn opt_f64(&mut self) -> Result<Option<f64>> {
        Ok(self.opt_u64()?.map(f64::from_bits))
    }

    pub fn sum(&mut self) -> Result<Neumaier> {
        let s = self.f64()?;
        let c = self.f64()?;
        Ok(Neumaier::from_parts(s, c))
    }

    pub fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.fill()
    }
}
