//! Byte-level helpers shared by the snapshot formats.
//!
//! Both formats are little-endian with a 4-byte magic and a 1-byte version;
//! all multi-byte fields and the LSB-first slice payloads are defined in the
//! filter modules.

use crate::error::SnapshotError;

pub(crate) const VERSION: u8 = 1;

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.bytes.len() - self.pos < n {
            return Err(SnapshotError::Truncated {
                needed: self.pos + n,
                got: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), SnapshotError> {
        let found = self.take(4)?;
        if found != expected {
            return Err(SnapshotError::BadMagic {
                expected,
                found: found.try_into().unwrap(),
            });
        }
        Ok(())
    }

    pub fn version(&mut self) -> Result<(), SnapshotError> {
        let v = self.take(1)?[0];
        if v != VERSION {
            return Err(SnapshotError::BadVersion(v));
        }
        Ok(())
    }

    pub fn u16(&mut self) -> Result<u16, SnapshotError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn payload(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        self.take(n)
    }

    /// The format is fixed-length; anything after the payload is corruption.
    pub fn finish(&self) -> Result<(), SnapshotError> {
        if self.pos != self.bytes.len() {
            return Err(SnapshotError::Invariant(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
