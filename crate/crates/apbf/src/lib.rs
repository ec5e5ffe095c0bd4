//! Age-partitioned Bloom filters over sliding windows of a stream.
//!
//! An age-partitioned Bloom filter answers "was this element among the
//! last `w` insertions?" with no false negatives inside the window, a
//! bounded false-positive rate, and memory that never grows: the filter
//! holds `k + l` bit slices, every insertion sets one bit in each of the
//! `k` youngest, and after every `g` insertions the oldest slice is
//! recycled. A query walks the slices looking for `k` consecutive
//! matches. Elements are guaranteed for `l * g` insertions and expire
//! gradually over at most one extra generation.
//!
//! The crate provides:
//!
//! - [`filter::ApbfFilter`]: the bit-sliced filter with snapshot/restore.
//! - [`blocked::ApbbfFilter`]: the cache-friendly variant whose segments
//!   are arrays of small blocks; each insertion touches one block per
//!   segment.
//! - [`bloom`]: a plain partitioned Bloom filter baseline.
//! - [`analysis`]: exact metric computations: false-positive rates,
//!   expected probe costs, slack, efficiency, parameter search, and the
//!   blocked-filter false-positive model.
//! - [`workload`]: deterministic stream generation and measurement
//!   drivers that validate the analytic predictions by simulation.
//! - [`cli`]: the `apbf` command-line tool over all of the above.

pub mod analysis;
mod bits;
pub mod blocked;
pub mod bloom;
pub mod cli;
pub mod error;
pub mod filter;
pub mod hash;
mod snapshot;
pub mod workload;

pub use blocked::ApbbfFilter;
pub use error::{FilterError, SnapshotError};
pub use filter::ApbfFilter;
