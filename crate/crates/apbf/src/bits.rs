//! Fixed-length bit array with LSB-first byte serialization.
//!
//! Bit `i` lives in bit `i % 8` of byte `i / 8`; this layout is part of the
//! snapshot format and must not change.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Bits {
    words: Vec<u64>,
    len: u64,
}

impl Bits {
    pub fn new(len: u64) -> Self {
        let words = vec![0u64; len.div_ceil(64) as usize];
        Bits { words, len }
    }

    #[inline]
    pub fn set(&mut self, i: u64) {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn byte_len(len: u64) -> usize {
        len.div_ceil(8) as usize
    }

    /// Appends exactly `byte_len(self.len)` bytes, LSB-first.
    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        let nbytes = Self::byte_len(self.len);
        for byte_idx in 0..nbytes {
            let word = self.words[byte_idx / 8];
            out.push((word >> (8 * (byte_idx % 8))) as u8);
        }
    }

    /// Rebuilds from `byte_len(len)` bytes; `None` if any bit at index
    /// >= `len` is set (such bytes cannot come from `write_bytes`).
    pub fn from_bytes(len: u64, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::byte_len(len) {
            return None;
        }
        let mut bits = Bits::new(len);
        for (byte_idx, &byte) in bytes.iter().enumerate() {
            bits.words[byte_idx / 8] |= (byte as u64) << (8 * (byte_idx % 8));
        }
        let tail = len % 64;
        if tail != 0 {
            let last = *bits.words.last().unwrap();
            if last >> tail != 0 {
                return None;
            }
        }
        Some(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_count() {
        let mut b = Bits::new(130);
        assert!(!b.get(0));
        b.set(0);
        b.set(63);
        b.set(64);
        b.set(129);
        assert!(b.get(0) && b.get(63) && b.get(64) && b.get(129));
        assert!(!b.get(1) && !b.get(128));
        assert_eq!(b.count_ones(), 4);
        b.clear();
        assert_eq!(b.count_ones(), 0);
    }

    #[test]
    fn bytes_round_trip_lsb_first() {
        let mut b = Bits::new(11);
        b.set(0);
        b.set(3);
        b.set(10);
        let mut out = Vec::new();
        b.write_bytes(&mut out);
        // bit 0 and 3 -> 0b0000_1001; bit 10 -> 0b0000_0100.
        assert_eq!(out, vec![0b0000_1001, 0b0000_0100]);
        assert_eq!(Bits::from_bytes(11, &out).unwrap(), b);
    }

    #[test]
    fn from_bytes_rejects_stray_bits_and_bad_length() {
        assert!(Bits::from_bytes(11, &[0, 0b0000_1000]).is_none());
        assert!(Bits::from_bytes(11, &[0]).is_none());
        assert!(Bits::from_bytes(11, &[0, 0, 0]).is_none());
        assert!(Bits::from_bytes(16, &[0xFF, 0xFF]).is_some());
    }
}
