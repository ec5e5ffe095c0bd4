//! Age-partitioned Bloom filter.
//!
//! `k + l` bit slices age in a circular buffer. Every insertion sets one bit
//! in each of the `k` youngest slices; after each batch of `g` insertions
//! (one generation) the oldest slice is zeroed and becomes the youngest. The
//! most recent `l*g` insertions are always reported; the count of insertions
//! reported with certainty oscillates between `l*g` and `(l+1)*g`.
//!
//! Querying needs `k` consecutive slice matches. It walks positions the way
//! a failed match dictates (jump back `k` slices), so a negative answer costs
//! far fewer probes than `k + l`.
//!
//! Writers require exclusive access; queries and diagnostics are read-only
//! and may run concurrently with each other on a quiescent filter.

use crate::analysis;
use crate::bits::Bits;
use crate::error::{FilterError, SnapshotError};
use crate::hash::{condition_seed, hash_pair, index_at_raw, HashPair, Seed};
use crate::snapshot::{Reader, VERSION};

const MAGIC: [u8; 4] = *b"APBF";

/// Upper bound for `k + l` in parameter search.
pub const MAX_SLICES: u32 = 64;

#[derive(Debug, Clone)]
pub struct ApbfFilter {
    k: u32,
    l: u32,
    m: u64,
    g: u64,
    n: u64,
    /// Buffer position of logical slice 0; decremented modulo `k+l` on shift.
    base: u32,
    buffer: Vec<Bits>,
    seed: Seed,
}

impl ApbfFilter {
    /// New empty filter with `g = floor(m * ln2 / k)`.
    pub fn new(k: u32, l: u32, m: u64, seed: Seed) -> Result<Self, FilterError> {
        if k == 0 {
            return Err(FilterError::InvalidParameter("k must be at least 1".into()));
        }
        if k.checked_add(l).is_none() || k + l > u16::MAX as u32 {
            return Err(FilterError::InvalidParameter(
                "k + l exceeds the supported slice count".into(),
            ));
        }
        let g = generation_size(m, k);
        if g == 0 {
            return Err(FilterError::InvalidParameter(format!(
                "m = {m} is too small for k = {k}: generation size would be 0"
            )));
        }
        let slices = k + l;
        Ok(ApbfFilter {
            k,
            l,
            m,
            g,
            n: 0,
            base: 0,
            buffer: (0..slices).map(|_| Bits::new(m)).collect(),
            seed,
        })
    }

    /// Picks the smallest-`k+l` configuration meeting `target_fp` (and
    /// `max_npws` when given), then sizes `m` so the guaranteed window
    /// `l*g` covers `window` elements.
    pub fn for_spec(window: u64, target_fp: f64, max_npws: Option<f64>) -> Result<Self, FilterError> {
        if window == 0 {
            return Err(FilterError::InvalidParameter(
                "window must be at least 1".into(),
            ));
        }
        let pairs = analysis::find_param_pairs(target_fp, MAX_SLICES, max_npws)?;
        let &(k, l) = pairs.iter().find(|&&(_, l)| l >= 1).ok_or_else(|| {
            FilterError::NoConfiguration(format!(
                "no configuration with a nonempty window for fp <= {target_fp}"
            ))
        })?;
        Self::with_window(k, l, window, 0)
    }

    /// Sizes `m` for a given `(k, l)` so that `l*g >= window`.
    pub fn with_window(k: u32, l: u32, window: u64, seed: Seed) -> Result<Self, FilterError> {
        if l == 0 {
            return Err(FilterError::InvalidParameter(
                "a sliding window requires l >= 1".into(),
            ));
        }
        let (m, _) = plan_for_window(k, l, window)?;
        let filter = Self::new(k, l, m, seed)?;
        debug_assert!(filter.window() >= window);
        Ok(filter)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Generation size: insertions between shifts.
    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Number of slices, `k + l`.
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
        // Each physical array keeps its own hash position for its lifetime.
        let pos = self.buffer_pos(logical);
        self.buffer[pos as usize].get(index_at_raw(pair, pos, self.m))
    }

    fn shift(&mut self) {
        // The oldest slice's array is zeroed and becomes the new slice 0.
        let slices = self.slices();
        self.base = (self.base + slices - 1) % slices;
        self.buffer[self.base as usize].clear();
    }

    /// Inserts an element, shifting first when a generation just completed.
    pub fn add(&mut self, element: &[u8]) {
        if self.n > 0 && self.n % self.g == 0 {
            self.shift();
        }
        let pair = hash_pair(element, condition_seed(self.seed));
        for i in 0..self.k {
            let pos = self.buffer_pos(i);
            let idx = index_at_raw(pair, pos, self.m);
            self.buffer[pos as usize].set(idx);
        }
        self.n += 1;
    }

    /// True iff some `k` consecutive slices all match. Does not mutate.
    pub fn query(&self, element: &[u8]) -> bool {
        self.query_with_probes(element).0
    }

    /// Query result plus the number of slice probes performed.
    ///
    /// Walks from slice `l` with `p` previous and `c` current consecutive
    /// matches; a miss at slice `i` rules out every window past `i - k`.
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

    /// Linear-scan oracle for the query condition: some window
    /// `s_j .. s_{j+k-1}`, `j` in `[0, l]`, has every slice matching.
    pub fn query_declarative(&self, element: &[u8]) -> bool {
        let pair = hash_pair(element, condition_seed(self.seed));
        (0..=self.l).any(|j| (j..j + self.k).all(|i| self.probe(pair, i)))
    }

    /// Per-logical-slice fraction of set bits, youngest first.
    pub fn fill_ratios(&self) -> Vec<f64> {
        (0..self.slices())
            .map(|i| self.buffer[self.buffer_pos(i) as usize].count_ones() as f64 / self.m as f64)
            .collect()
    }

    /// Serializes the full state. Deterministic for a given state.
    pub fn snapshot(&self) -> Vec<u8> {
        let slice_bytes = Bits::byte_len(self.m);
        let mut out = Vec::with_capacity(45 + self.slices() as usize * slice_bytes);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&(self.l as u16).to_le_bytes());
        out.extend_from_slice(&self.m.to_le_bytes());
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
        let m = r.u64()?;
        let g = r.u64()?;
        let n = r.u64()?;
        let base = r.u16()? as u32;
        let seed = r.u64()?;
        if k == 0 || m == 0 || g == 0 {
            return Err(SnapshotError::Invariant(format!(
                "k = {k}, m = {m}, g = {g} must all be positive"
            )));
        }
        let slices = k + l;
        if base >= slices {
            return Err(SnapshotError::Invariant(format!(
                "base {base} out of range for {slices} slices"
            )));
        }
        if g != generation_size(m, k) {
            return Err(SnapshotError::Invariant(format!(
                "g = {g} inconsistent with m = {m}, k = {k}"
            )));
        }
        let shifts = if n == 0 { 0 } else { (n - 1) / g };
        let expected_base = (slices as u64 - shifts % slices as u64) as u32 % slices;
        if base != expected_base {
            return Err(SnapshotError::Invariant(format!(
                "base {base} inconsistent with n = {n}: expected {expected_base}"
            )));
        }
        let slice_bytes = Bits::byte_len(m);
        let mut buffer = Vec::with_capacity(slices as usize);
        for pos in 0..slices {
            let payload = r.payload(slice_bytes)?;
            let bits = Bits::from_bytes(m, payload).ok_or_else(|| {
                SnapshotError::Invariant(format!("stray bits beyond m = {m} in slice {pos}"))
            })?;
            buffer.push(bits);
        }
        r.finish()?;
        Ok(ApbfFilter {
            k,
            l,
            m,
            g,
            n,
            base,
            buffer,
            seed,
        })
    }

    /// Logical slice an element's bits started in, given how many insertions
    /// ago it arrived. Kept for tests of the aging bookkeeping.
    #[cfg(test)]
    fn initial_slice_offset(&self, insert_ordinal: u64) -> u64 {
        ((self.n - 1) / self.g) - ((insert_ordinal - 1) / self.g)
    }
}

pub(crate) fn generation_size(m: u64, k: u32) -> u64 {
    (m as f64 * std::f64::consts::LN_2 / k as f64).floor() as u64
}

/// The `(m, g)` a filter gets when sized for `window` elements: the
/// smallest `m` whose generation size reaches `ceil(window / l)`. With
/// `l = 0` there is no guaranteed window; sizing falls back to one full
/// generation of `window` elements.
pub fn plan_for_window(k: u32, l: u32, window: u64) -> Result<(u64, u64), FilterError> {
    if k == 0 {
        return Err(FilterError::InvalidParameter("k must be at least 1".into()));
    }
    if window == 0 {
        return Err(FilterError::InvalidParameter(
            "window must be at least 1".into(),
        ));
    }
    let g_req = if l == 0 {
        window
    } else {
        window.div_ceil(l as u64)
    };
    let mut m = (g_req as f64 * k as f64 / std::f64::consts::LN_2).ceil() as u64;
    // Guard the float rounding edge: grow m until g reaches g_req.
    while generation_size(m, k) < g_req {
        m += 1;
    }
    Ok((m, generation_size(m, k)))
}
