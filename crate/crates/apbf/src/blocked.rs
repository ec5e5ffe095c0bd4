//! Age-partitioned blocked Bloom filter.
//!
//! Same aging scheme as [`crate::filter::ApbfFilter`], but each slice is an
//! array of `num_blocks` cache-line-sized blocks of `block_bits` bits. An
//! insertion touches exactly one block per written slice, setting `set_bits`
//! bits there, one per equal-width partition of the block. A query therefore
//! costs one memory access per slice probed instead of one per bit.
//!
//! The price is capacity: hashing elements to blocks leaves some blocks
//! overfull and others underfull, so a block holds fewer elements at a given
//! match probability than a flat slice of the same size. See
//! [`capacity_factor`] for the single-block discount.

use crate::bits::Bits;
use crate::error::{FilterError, SnapshotError};
use crate::hash::{block_coords_raw, condition_seed, hash_pair, validate_block_shape, HashPair, Seed};
use crate::snapshot::{Reader, VERSION};

const MAGIC: [u8; 4] = *b"APBB";

/// Largest supported block size in bits.
pub const MAX_BLOCK_BITS: u16 = 32768;

/// Elements a block can hold per set bit budget: with `x = set_bits /
/// block_bits`, a block reaches the half-full point of an optimally loaded
/// Bloom slice after `ln2 / -ln(1 - x)` insertions per set bit, which is
/// `capacity_factor * block_bits / set_bits * ln2` insertions. The factor
/// `x / -ln(1 - x)` is the discount against a flat slice; it approaches 1
/// as blocks grow relative to the bits set per insertion.
pub fn capacity_factor(block_bits: u16, set_bits: u16) -> Result<f64, FilterError> {
    if set_bits == 0 || set_bits >= block_bits {
        return Err(FilterError::InvalidParameter(format!(
            "set_bits = {set_bits} must satisfy 1 <= set_bits < block_bits = {block_bits}"
        )));
    }
    let x = set_bits as f64 / block_bits as f64;
    Ok(x / -(1.0 - x).ln())
}

/// Insertions a single block absorbs before its partitions reach the
/// half-full load of an optimal Bloom slice.
pub(crate) fn block_capacity(block_bits: u16, set_bits: u16) -> f64 {
    let x = set_bits as f64 / block_bits as f64;
    std::f64::consts::LN_2 / -(1.0 - x).ln()
}

#[derive(Debug, Clone)]
pub struct ApbbfFilter {
    k: u32,
    l: u32,
    num_blocks: u64,
    block_bits: u16,
    set_bits: u16,
    g: u64,
    n: u64,
    base: u32,
    buffer: Vec<Bits>,
    seed: Seed,
}

impl ApbbfFilter {
    /// New empty filter of `k + l` slices, each `num_blocks` blocks of
    /// `block_bits` bits split into `set_bits` partitions.
    ///
    /// `block_bits` and `set_bits` must be powers of two with
    /// `set_bits <= block_bits / 2`; the generation size is
    /// `g = floor(num_blocks * block_capacity / k)` and must be positive.
    pub fn new(
        k: u32,
        l: u32,
        num_blocks: u64,
        block_bits: u16,
        set_bits: u16,
        seed: Seed,
    ) -> Result<Self, FilterError> {
        if k == 0 {
            return Err(FilterError::InvalidParameter("k must be at least 1".into()));
        }
        if k.checked_add(l).is_none() || k + l > u16::MAX as u32 {
            return Err(FilterError::InvalidParameter(
                "k + l exceeds the supported slice count".into(),
            ));
        }
        if num_blocks == 0 {
            return Err(FilterError::InvalidParameter(
                "num_blocks must be at least 1".into(),
            ));
        }
        if block_bits > MAX_BLOCK_BITS {
            return Err(FilterError::InvalidParameter(format!(
                "block_bits = {block_bits} exceeds the maximum {MAX_BLOCK_BITS}"
            )));
        }
        validate_block_shape(block_bits as u32, set_bits as u32)?;
        let g = generation_size(num_blocks, block_bits, set_bits, k);
        if g == 0 {
            return Err(FilterError::InvalidParameter(format!(
                "num_blocks = {num_blocks} is too small for k = {k}: generation size would be 0"
            )));
        }
        let slices = k + l;
        let slice_bits = num_blocks * block_bits as u64;
        Ok(ApbbfFilter {
            k,
            l,
            num_blocks,
            block_bits,
            set_bits,
            g,
            n: 0,
            base: 0,
            buffer: (0..slices).map(|_| Bits::new(slice_bits)).collect(),
            seed,
        })
    }

    /// Sizes `num_blocks` for a given `(k, l)` block shape so the guaranteed
    /// window `l * g` covers `window` elements.
    pub fn for_window(
        k: u32,
        l: u32,
        window: u64,
        block_bits: u16,
        set_bits: u16,
        seed: Seed,
    ) -> Result<Self, FilterError> {
        if l == 0 {
            return Err(FilterError::InvalidParameter(
                "a sliding window requires l >= 1".into(),
            ));
        }
        if window == 0 {
            return Err(FilterError::InvalidParameter(
                "window must be at least 1".into(),
            ));
        }
        validate_block_shape(block_bits as u32, set_bits as u32)?;
        let g_req = window.div_ceil(l as u64);
        let per_block = block_capacity(block_bits, set_bits);
        let mut num_blocks = (g_req as f64 * k as f64 / per_block).ceil() as u64;
        while generation_size(num_blocks, block_bits, set_bits, k) < g_req {
            num_blocks += 1;
        }
        let filter = Self::new(k, l, num_blocks, block_bits, set_bits, seed)?;
        debug_assert!(filter.window() >= window);
        Ok(filter)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn num_blocks(&self) -> u64 {
        self.num_blocks
    }

    pub fn block_bits(&self) -> u16 {
        self.block_bits
    }

    pub fn set_bits(&self) -> u16 {
        self.set_bits
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn slices(&self) -> u32 {
        self.k + self.l
    }

    /// Guaranteed sliding window, `l * g`.
    pub fn window(&self) -> u64 {
        self.l as u64 * self.g
    }

    #[inline]
    fn buffer_pos(&self, logical: u32) -> u32 {
        (self.base + logical) % self.slices()
    }

    #[inline]
    fn probe(&self, pair: HashPair, logical: u32) -> bool {
        let pos = self.buffer_pos(logical);
        let coords = block_coords_raw(
            pair,
            pos,
            self.num_blocks,
            self.block_bits as u32,
            self.set_bits as u32,
        );
        let bits = &self.buffer[pos as usize];
        let block_start = coords.block * self.block_bits as u64;
        coords.offsets[..coords.count]
            .iter()
            .all(|&off| bits.get(block_start + off as u64))
    }

    fn shift(&mut self) {
        let slices = self.slices();
        self.base = (self.base + slices - 1) % slices;
        self.buffer[self.base as usize].clear();
    }

    /// Inserts an element: `set_bits` bits in one block of each of the `k`
    /// youngest slices. Shifts first when a generation just completed.
    pub fn add(&mut self, element: &[u8]) {
        if self.n > 0 && self.n % self.g == 0 {
            self.shift();
        }
        let pair = hash_pair(element, condition_seed(self.seed));
        for i in 0..self.k {
            let pos = self.buffer_pos(i);
            let coords = block_coords_raw(
                pair,
                pos,
                self.num_blocks,
                self.block_bits as u32,
                self.set_bits as u32,
            );
            let block_start = coords.block * self.block_bits as u64;
            let bits = &mut self.buffer[pos as usize];
            for &off in &coords.offsets[..coords.count] {
                bits.set(block_start + off as u64);
            }
        }
        self.n += 1;
    }

    /// True iff some `k` consecutive slices each match in their probed block.
    pub fn query(&self, element: &[u8]) -> bool {
        self.query_with_probes(element).0
    }

    /// Query result plus the number of block accesses performed (one per
    /// slice probed).
    pub fn query_with_probes(&self, element: &[u8]) -> (bool, u32) {
        let pair = hash_pair(element, condition_seed(self.seed));
        let mut i = self.l as i64;
        let mut p = 0u32;
        let mut c = 0u32;
        let mut probes = 0u32;
        while i >= 0 {
            probes += 1;
            if self.probe(pair, i as u32) {
                c += 1;
                if p + c == self.k {
                    return (true, probes);
                }
                i += 1;
            } else {
                i -= self.k as i64;
                p = c;
                c = 0;
            }
        }
        (false, probes)
    }

    /// Per-logical-slice fraction of set bits, youngest first.
    pub fn fill_ratios(&self) -> Vec<f64> {
        let slice_bits = (self.num_blocks * self.block_bits as u64) as f64;
        (0..self.slices())
            .map(|i| self.buffer[self.buffer_pos(i) as usize].count_ones() as f64 / slice_bits)
            .collect()
    }

    /// Fraction of set bits in each partition of one logical slice,
    /// aggregated over all its blocks. Insertions set one bit per partition,
    /// so a healthy slice fills its partitions evenly.
    pub fn partition_fill(&self, logical: u32) -> Vec<f64> {
        assert!(logical < self.slices(), "slice index out of range");
        let bits = &self.buffer[self.buffer_pos(logical) as usize];
        let width = (self.block_bits / self.set_bits) as u64;
        let partition_bits = (self.num_blocks * width) as f64;
        (0..self.set_bits as u64)
            .map(|j| {
                let mut ones = 0u64;
                for block in 0..self.num_blocks {
                    let start = block * self.block_bits as u64 + j * width;
                    for off in 0..width {
                        ones += bits.get(start + off) as u64;
                    }
                }
                ones as f64 / partition_bits
            })
            .collect()
    }

    /// Serializes the full state. Deterministic for a given state.
    pub fn snapshot(&self) -> Vec<u8> {
        let slice_bytes = Bits::byte_len(self.num_blocks * self.block_bits as u64);
        let mut out = Vec::with_capacity(47 + self.slices() as usize * slice_bytes);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&(self.l as u16).to_le_bytes());
        out.extend_from_slice(&self.num_blocks.to_le_bytes());
        out.extend_from_slice(&self.block_bits.to_le_bytes());
        out.extend_from_slice(&self.set_bits.to_le_bytes());
        out.extend_from_slice(&self.g.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&(self.base as u16).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for bits in &self.buffer {
            bits.write_bytes(&mut out);
        }
        out
    }

    /// Rebuilds a filter from [`snapshot`](Self::snapshot) bytes, validating
    /// magic, version, length, and structural invariants.
    pub fn restore(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        r.version()?;
        let k = r.u16()? as u32;
        let l = r.u16()? as u32;
        let num_blocks = r.u64()?;
        let block_bits = r.u16()?;
        let set_bits = r.u16()?;
        let g = r.u64()?;
        let n = r.u64()?;
        let base = r.u16()? as u32;
        let seed = r.u64()?;
        if k == 0 || num_blocks == 0 || g == 0 {
            return Err(SnapshotError::Invariant(format!(
                "k = {k}, num_blocks = {num_blocks}, g = {g} must all be positive"
            )));
        }
        if block_bits > MAX_BLOCK_BITS {
            return Err(SnapshotError::Invariant(format!(
                "block_bits = {block_bits} exceeds the maximum {MAX_BLOCK_BITS}"
            )));
        }
        if let Err(e) = validate_block_shape(block_bits as u32, set_bits as u32) {
            return Err(SnapshotError::Invariant(e.to_string()));
        }
        let slices = k + l;
        if base >= slices {
            return Err(SnapshotError::Invariant(format!(
                "base {base} out of range for {slices} slices"
            )));
        }
        if g != generation_size(num_blocks, block_bits, set_bits, k) {
            return Err(SnapshotError::Invariant(format!(
                "g = {g} inconsistent with num_blocks = {num_blocks}, \
                 block shape {block_bits}/{set_bits}, k = {k}"
            )));
        }
        let shifts = if n == 0 { 0 } else { (n - 1) / g };
        let expected_base = (slices as u64 - shifts % slices as u64) as u32 % slices;
        if base != expected_base {
            return Err(SnapshotError::Invariant(format!(
                "base {base} inconsistent with n = {n}: expected {expected_base}"
            )));
        }
        let slice_bits = num_blocks * block_bits as u64;
        let slice_bytes = Bits::byte_len(slice_bits);
        let mut buffer = Vec::with_capacity(slices as usize);
        for pos in 0..slices {
            let payload = r.payload(slice_bytes)?;
            let bits = Bits::from_bytes(slice_bits, payload).ok_or_else(|| {
                SnapshotError::Invariant(format!("stray bits beyond slice end in slice {pos}"))
            })?;
            buffer.push(bits);
        }
        r.finish()?;
        Ok(ApbbfFilter {
            k,
            l,
            num_blocks,
            block_bits,
            set_bits,
            g,
            n,
            base,
            buffer,
            seed,
        })
    }
}

fn generation_size(num_blocks: u64, block_bits: u16, set_bits: u16, k: u32) -> u64 {
    (num_blocks as f64 * block_capacity(block_bits, set_bits) / k as f64).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(id: u64) -> [u8; 8] {
        id.to_le_bytes()
    }

    #[test]
    fn capacity_factor_values() {
        assert!((capacity_factor(2, 1).unwrap() - 0.7213).abs() < 5e-5);
        for (bb, sb, want) in [(64u16, 4u16, 0.968), (64, 8, 0.936), (512, 4, 0.996), (512, 8, 0.992)] {
            let got = capacity_factor(bb, sb).unwrap();
            assert!(
                (got - want).abs() < 5e-4,
                "capacity_factor({bb},{sb}) = {got}, want ~{want}"
            );
        }
        assert!(capacity_factor(64, 0).is_err());
        assert!(capacity_factor(64, 64).is_err());
        assert!(capacity_factor(64, 65).is_err());
    }

    #[test]
    fn generation_size_examples() {
        let f = ApbbfFilter::new(2, 3, 64, 512, 4, 0).unwrap();
        assert_eq!(f.g(), 2828);
        assert_eq!(f.window(), 3 * 2828);
        let f = ApbbfFilter::new(2, 3, 8, 512, 4, 0).unwrap();
        assert_eq!(f.g(), 353);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ApbbfFilter::new(0, 3, 64, 512, 4, 0).is_err());
        assert!(ApbbfFilter::new(2, 3, 0, 512, 4, 0).is_err());
        // Non-power-of-two shapes and oversubscribed partitions.
        assert!(ApbbfFilter::new(2, 3, 64, 500, 4, 0).is_err());
        assert!(ApbbfFilter::new(2, 3, 64, 512, 3, 0).is_err());
        assert!(ApbbfFilter::new(2, 3, 64, 8, 8, 0).is_err());
        // Too few blocks for a whole generation.
        assert!(ApbbfFilter::new(128, 0, 1, 64, 4, 0).is_err());
    }

    #[test]
    fn first_add_sets_exactly_k_times_set_bits() {
        let mut f = ApbbfFilter::new(3, 2, 16, 64, 4, 9).unwrap();
        f.add(b"solo");
        let total: u64 = (0..f.slices())
            .map(|i| f.buffer[i as usize].count_ones())
            .sum();
        assert_eq!(total, 3 * 4);
        assert!(f.query(b"solo"));
        assert!(!f.query(b"missing"));
    }

    #[test]
    fn no_false_negatives_within_window() {
        let mut f = ApbbfFilter::for_window(2, 3, 1000, 512, 4, 3).unwrap();
        let w = f.window();
        for n in 1..=6000u64 {
            f.add(&el(n));
            let oldest = n.saturating_sub(w - 1).max(1);
            for probe in [oldest, n] {
                assert!(f.query(&el(probe)), "false negative at n={n} probe={probe}");
            }
        }
    }

    #[test]
    fn aged_slice_partitions_near_half_full() {
        let mut f = ApbbfFilter::new(2, 2, 32, 512, 4, 11).unwrap();
        let g = f.g();
        for n in 1..=(5 * g) {
            f.add(&el(n));
        }
        // Slices written by k full generations sit near the half-full load,
        // discounted by the block capacity factor: 1 - 2^(-0.996) ~ 0.4986.
        let expect = 1.0 - (-((2 * g) as f64) / 32.0 * (4.0 / 512.0)).exp();
        for logical in [2u32, 3] {
            let fills = f.partition_fill(logical);
            assert_eq!(fills.len(), 4);
            for (j, fill) in fills.iter().enumerate() {
                assert!(
                    (fill - expect).abs() < 0.03,
                    "slice {logical} partition {j}: fill {fill}, expect ~{expect}"
                );
            }
            let overall = f.fill_ratios()[logical as usize];
            assert!((overall - expect).abs() < 0.015);
        }
    }

    #[test]
    fn probe_counts_match_flat_filter_shape() {
        for (k, l) in [(2u32, 3u32), (4, 3), (1, 1)] {
            let f = ApbbfFilter::new(k, l, 16, 64, 4, 0).unwrap();
            let (hit, probes) = f.query_with_probes(b"none");
            assert!(!hit);
            assert_eq!(probes, (l + 1).div_ceil(k));
        }
    }

    #[test]
    fn snapshot_round_trip_byte_identical() {
        let mut f = ApbbfFilter::new(2, 3, 8, 512, 4, 0xFEED).unwrap();
        for n in 1..=1200u64 {
            f.add(&el(n));
        }
        let snap = f.snapshot();
        let restored = ApbbfFilter::restore(&snap).unwrap();
        assert_eq!(restored.snapshot(), snap);
        for n in 1..=1200u64 {
            assert_eq!(f.query(&el(n)), restored.query(&el(n)));
        }
    }

    #[test]
    fn restore_rejects_corruption() {
        let mut f = ApbbfFilter::new(2, 1, 4, 64, 4, 5).unwrap();
        f.add(b"x");
        let snap = f.snapshot();

        let mut bad = snap.clone();
        bad[3] = b'Z';
        assert!(matches!(
            ApbbfFilter::restore(&bad),
            Err(SnapshotError::BadMagic { .. })
        ));

        let mut bad = snap.clone();
        bad[4] = 2;
        assert!(matches!(
            ApbbfFilter::restore(&bad),
            Err(SnapshotError::BadVersion(2))
        ));

        assert!(matches!(
            ApbbfFilter::restore(&snap[..snap.len() - 3]),
            Err(SnapshotError::Truncated { .. })
        ));

        let mut bad = snap.clone();
        bad.push(0xFF);
        assert!(matches!(
            ApbbfFilter::restore(&bad),
            Err(SnapshotError::Invariant(_))
        ));

        // Flat filter snapshots are not interchangeable with blocked ones.
        let flat = crate::filter::ApbfFilter::new(2, 1, 64, 5).unwrap().snapshot();
        assert!(matches!(
            ApbbfFilter::restore(&flat),
            Err(SnapshotError::BadMagic { .. })
        ));

        // set_bits byte (offset 19) corrupted to a non-power-of-two.
        let mut bad = snap.clone();
        bad[19] = 3;
        assert!(matches!(
            ApbbfFilter::restore(&bad),
            Err(SnapshotError::Invariant(_))
        ));
    }
}
