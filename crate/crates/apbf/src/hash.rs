//! Seedable hash family for all filters.
//!
//! One 128-bit hash evaluation per element yields a [`HashPair`]; every
//! per-slice index is derived from it by double hashing, and APBBF block
//! coordinates by consuming bit groups of secondary mixes. All functions are
//! pure, so the module is safe for unrestricted concurrent use.

use crate::error::FilterError;

/// Seed fixed at filter construction and recorded in snapshots.
pub type Seed = u64;

/// Two 64-bit base hashes taken from disjoint halves of one 128-bit
/// evaluation of the element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashPair {
    pub h1: u64,
    pub h2: u64,
}

const C1: u64 = 0x87C3_7B91_1142_53D5;
const C2: u64 = 0x4CF5_AD43_2745_937F;

#[inline]
fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x = x.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    x ^= x >> 33;
    x
}

/// MurmurHash3 x64 128-bit variant.
fn murmur3_x64_128(data: &[u8], seed: u64) -> (u64, u64) {
    let mut h1 = seed;
    let mut h2 = seed;
    let nblocks = data.len() / 16;

    for blk in 0..nblocks {
        let k1 = u64::from_le_bytes(data[blk * 16..blk * 16 + 8].try_into().unwrap());
        let k2 = u64::from_le_bytes(data[blk * 16 + 8..blk * 16 + 16].try_into().unwrap());
        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
        h1 = h1
            .rotate_left(27)
            .wrapping_add(h2)
            .wrapping_mul(5)
            .wrapping_add(0x52DC_E729);
        h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
        h2 = h2
            .rotate_left(31)
            .wrapping_add(h1)
            .wrapping_mul(5)
            .wrapping_add(0x3849_5AB5);
    }

    let tail = &data[nblocks * 16..];
    if tail.len() >= 9 {
        let mut k2: u64 = 0;
        for i in (8..tail.len()).rev() {
            k2 ^= (tail[i] as u64) << ((i - 8) * 8);
        }
        h2 ^= k2.wrapping_mul(C2).rotate_left(33).wrapping_mul(C1);
    }
    if !tail.is_empty() {
        let mut k1: u64 = 0;
        for i in (0..tail.len().min(8)).rev() {
            k1 ^= (tail[i] as u64) << (i * 8);
        }
        h1 ^= k1.wrapping_mul(C1).rotate_left(31).wrapping_mul(C2);
    }

    h1 ^= data.len() as u64;
    h2 ^= data.len() as u64;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    (h1, h2)
}

/// Hashes an element (any length, may be empty) into its base pair.
///
/// For elements of at most eight bytes the x64_128 variant feeds data into
/// `h1` only, so `h2` enters finalization as the constant `seed ^ len`. The
/// two halves then differ by that constant before the final mixing, and when
/// it is zero (seed equal to the element length) they collapse onto one
/// value, which ruins double hashing. Filters therefore hash with
/// [`condition_seed`] applied to their construction seed; callers deriving
/// indexes themselves should do the same.
pub fn hash_pair(element: &[u8], seed: Seed) -> HashPair {
    let (h1, h2) = murmur3_x64_128(element, seed);
    HashPair { h1, h2 }
}

/// Scrambles a construction seed into the working seed used for hashing.
///
/// Keeps the degenerate short-input case of [`hash_pair`] (seed equal to
/// element length) out of reach for every practical seed while staying a
/// deterministic function of the recorded seed, so snapshots can store the
/// raw value.
pub fn condition_seed(seed: Seed) -> Seed {
    fmix64(seed ^ 0xBF58_476D_1CE4_E5B9)
}

#[inline]
pub(crate) fn index_at_raw(pair: HashPair, position: u32, m: u64) -> u64 {
    // Zero strides would collapse all positions onto one index.
    let stride = match pair.h2 % m {
        0 => 1,
        s => s,
    };
    ((pair.h1 as u128 + position as u128 * stride as u128) % m as u128) as u64
}

/// Bit index of hash position `position` in a slice of `m` bits, via double
/// hashing: `(h1 + position * h2') mod m` with `h2' = h2 mod m`, replaced by
/// 1 when zero.
pub fn index_at(pair: HashPair, position: u32, m: u64) -> Result<u64, FilterError> {
    if m == 0 {
        return Err(FilterError::InvalidParameter(
            "slice size m must be at least 1".into(),
        ));
    }
    Ok(index_at_raw(pair, position, m))
}

#[inline]
fn mix_word(pair: HashPair, position: u32, word_index: u32) -> u64 {
    fmix64(
        pair.h1
            ^ pair.h2.wrapping_mul(2 * position as u64 + 1)
            ^ (word_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

pub(crate) fn validate_block_shape(block_bits: u32, set_bits: u32) -> Result<(), FilterError> {
    if !block_bits.is_power_of_two() || !set_bits.is_power_of_two() {
        return Err(FilterError::InvalidParameter(format!(
            "block bits ({block_bits}) and set bits ({set_bits}) must be powers of two"
        )));
    }
    if set_bits > block_bits / 2 {
        return Err(FilterError::InvalidParameter(format!(
            "set bits ({set_bits}) must not exceed half the block ({block_bits})"
        )));
    }
    Ok(())
}

pub(crate) struct BlockCoords {
    pub block: u64,
    /// One offset per partition, `offsets[j]` in `[j*B/b, (j+1)*B/b)`.
    pub offsets: [u16; 64],
    pub count: usize,
}

pub(crate) fn block_coords_raw(
    pair: HashPair,
    position: u32,
    num_blocks: u64,
    block_bits: u32,
    set_bits: u32,
) -> BlockCoords {
    let block =
        ((pair.h1 as u128 + position as u128 * pair.h2 as u128) % num_blocks as u128) as u64;
    let partition = block_bits / set_bits;
    let width = partition.trailing_zeros();
    let mut coords = BlockCoords {
        block,
        offsets: [0; 64],
        count: set_bits as usize,
    };
    let mut word = mix_word(pair, position, 0);
    let mut word_index = 0;
    let mut avail = 64;
    for j in 0..set_bits {
        if avail < width {
            word_index += 1;
            word = mix_word(pair, position, word_index);
            avail = 64;
        }
        let offset = (word & ((1u64 << width) - 1)) as u32;
        word >>= width;
        avail -= width;
        coords.offsets[j as usize] = (j * partition + offset) as u16;
    }
    coords
}

/// Block index and per-partition bit offsets for one APBBF probe.
///
/// The block comes from `(h1 + position*h2) mod num_blocks`; the `set_bits`
/// offsets consume disjoint `log2(block_bits/set_bits)`-bit groups of
/// secondary 64-bit mixes of the pair, pulling further mix words whenever the
/// budget of one is exhausted.
pub fn block_coords(
    pair: HashPair,
    position: u32,
    num_blocks: u64,
    block_bits: u32,
    set_bits: u32,
) -> Result<(u64, Vec<u32>), FilterError> {
    validate_block_shape(block_bits, set_bits)?;
    if num_blocks == 0 {
        return Err(FilterError::InvalidParameter(
            "num_blocks must be at least 1".into(),
        ));
    }
    if set_bits > 64 {
        return Err(FilterError::InvalidParameter(
            "set bits per block is limited to 64".into(),
        ));
    }
    let raw = block_coords_raw(pair, position, num_blocks, block_bits, set_bits);
    let offsets = raw.offsets[..raw.count].iter().map(|&o| o as u32).collect();
    Ok((raw.block, offsets))
}
