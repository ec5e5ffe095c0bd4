//! Workload harness: deterministic stream generation and measurement
//! drivers that validate the analytic predictions by simulation.
//!
//! Streams are sequences of fixed-width byte elements. Fresh elements
//! encode a monotone 64-bit counter (little endian, zero padded); probe
//! elements used for false-positive sampling draw from a counter offset by
//! `2^63`, so probes are disjoint from every inserted element by
//! construction. Duplicate emissions re-send one of the last
//! `window` emitted elements, chosen uniformly or by a Zipf rank law over
//! recency (rank 1 = most recent).

use std::collections::VecDeque;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Zipf;

use crate::blocked::ApbbfFilter;
use crate::error::FilterError;
use crate::filter::ApbfFilter;

/// Probe identifiers start here; insert identifiers count up from 0.
const PROBE_BASE: u64 = 1 << 63;

/// How duplicate emissions choose among recently emitted elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DupDistribution {
    /// Uniform over the recency window.
    Uniform,
    /// Zipf over recency rank (rank 1 = most recent) with this exponent.
    Zipf(f64),
}

/// Parameters of a synthetic element stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    /// Number of elements to emit.
    pub length: u64,
    /// Probability that an emission repeats a recent element; in `[0, 1)`.
    pub dup_rate: f64,
    /// Recency law for duplicate draws.
    pub distribution: DupDistribution,
    /// RNG seed; identical specs yield identical streams.
    pub seed: u64,
    /// Bytes per element; at least 8.
    pub element_width: usize,
    /// Recency window (in emissions) duplicates are drawn from.
    pub window: u64,
}

impl StreamSpec {
    /// A stream of all-distinct 8-byte elements.
    pub fn distinct(length: u64, seed: u64) -> Self {
        StreamSpec {
            length,
            dup_rate: 0.0,
            distribution: DupDistribution::Uniform,
            seed,
            element_width: 8,
            window: 1,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(0.0..1.0).contains(&self.dup_rate) {
            return Err(FilterError::InvalidParameter(format!(
                "dup_rate = {} must lie in [0, 1)",
                self.dup_rate
            )));
        }
        if let DupDistribution::Zipf(s) = self.distribution {
            if !(s > 0.0) {
                return Err(FilterError::InvalidParameter(format!(
                    "zipf exponent = {s} must be positive"
                )));
            }
        }
        if self.element_width < 8 {
            return Err(FilterError::InvalidParameter(
                "element_width must be at least 8 bytes".into(),
            ));
        }
        if self.window == 0 {
            return Err(FilterError::InvalidParameter(
                "duplicate window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn encode(id: u64, width: usize) -> Vec<u8> {
    let mut v = vec![0u8; width];
    v[..8].copy_from_slice(&id.to_le_bytes());
    v
}

/// Incremental stream generator; see [`StreamSpec`].
pub struct StreamGen {
    rng: ChaCha12Rng,
    next_fresh: u64,
    recent: VecDeque<Vec<u8>>,
    dup_rate: f64,
    distribution: DupDistribution,
    window: usize,
    width: usize,
}

impl StreamGen {
    pub fn new(spec: &StreamSpec) -> Result<Self, FilterError> {
        spec.validate()?;
        Ok(StreamGen {
            rng: ChaCha12Rng::seed_from_u64(spec.seed),
            next_fresh: 0,
            recent: VecDeque::with_capacity(spec.window.min(1 << 20) as usize),
            dup_rate: spec.dup_rate,
            distribution: spec.distribution,
            window: spec.window as usize,
            width: spec.element_width,
        })
    }

    /// Emits the next element of the stream.
    pub fn next_element(&mut self) -> Vec<u8> {
        let emit = if !self.recent.is_empty() && self.rng.random::<f64>() < self.dup_rate {
            let len = self.recent.len();
            let index = match self.distribution {
                DupDistribution::Uniform => self.rng.random_range(0..len),
                DupDistribution::Zipf(s) => {
                    let zipf = Zipf::new(len as f64, s).expect("validated zipf parameters");
                    let rank = (zipf.sample(&mut self.rng) as usize).clamp(1, len);
                    len - rank
                }
            };
            self.recent[index].clone()
        } else {
            let v = encode(self.next_fresh, self.width);
            self.next_fresh += 1;
            v
        };
        self.recent.push_back(emit.clone());
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
        emit
    }
}

/// Materializes the whole stream described by `spec`.
pub fn gen_stream(spec: &StreamSpec) -> Result<Vec<Vec<u8>>, FilterError> {
    let mut g = StreamGen::new(spec)?;
    Ok((0..spec.length).map(|_| g.next_element()).collect())
}

/// Fraction of emissions that repeat an element emitted earlier in the
/// stream. Fresh elements never collide, so this equals the realized
/// duplicate-draw rate.
pub fn emission_duplicate_rate(stream: &[Vec<u8>]) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    let mut seen = std::collections::HashSet::new();
    let mut dups = 0u64;
    for e in stream {
        if !seen.insert(e.clone()) {
            dups += 1;
        }
    }
    dups as f64 / stream.len() as f64
}

/// Filter geometry a measurement runs against.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterParams {
    Apbf {
        k: u32,
        l: u32,
        m: u64,
        seed: u64,
    },
    Apbbf {
        k: u32,
        l: u32,
        num_blocks: u64,
        block_bits: u16,
        set_bits: u16,
        seed: u64,
    },
}

impl FilterParams {
    pub fn build(&self) -> Result<AnyFilter, FilterError> {
        match *self {
            FilterParams::Apbf { k, l, m, seed } => {
                Ok(AnyFilter::Flat(ApbfFilter::new(k, l, m, seed)?))
            }
            FilterParams::Apbbf {
                k,
                l,
                num_blocks,
                block_bits,
                set_bits,
                seed,
            } => Ok(AnyFilter::Blocked(ApbbfFilter::new(
                k, l, num_blocks, block_bits, set_bits, seed,
            )?)),
        }
    }
}

/// Either filter flavor behind one insertion/query surface.
pub enum AnyFilter {
    Flat(ApbfFilter),
    Blocked(ApbbfFilter),
}

impl AnyFilter {
    pub fn add(&mut self, element: &[u8]) {
        match self {
            AnyFilter::Flat(f) => f.add(element),
            AnyFilter::Blocked(f) => f.add(element),
        }
    }

    pub fn query_with_probes(&self, element: &[u8]) -> (bool, u32) {
        match self {
            AnyFilter::Flat(f) => f.query_with_probes(element),
            AnyFilter::Blocked(f) => f.query_with_probes(element),
        }
    }

    pub fn query(&self, element: &[u8]) -> bool {
        self.query_with_probes(element).0
    }

    /// Generation size `g`.
    pub fn generation(&self) -> u64 {
        match self {
            AnyFilter::Flat(f) => f.g(),
            AnyFilter::Blocked(f) => f.g(),
        }
    }

    /// Guaranteed window `l * g`.
    pub fn window(&self) -> u64 {
        match self {
            AnyFilter::Flat(f) => f.window(),
            AnyFilter::Blocked(f) => f.window(),
        }
    }

    pub fn slices(&self) -> u32 {
        match self {
            AnyFilter::Flat(f) => f.slices(),
            AnyFilter::Blocked(f) => f.slices(),
        }
    }

    pub fn inserts(&self) -> u64 {
        match self {
            AnyFilter::Flat(f) => f.n(),
            AnyFilter::Blocked(f) => f.n(),
        }
    }
}

/// One false-positive sample from [`measure_fp`].
#[derive(Debug, Clone, PartialEq)]
pub struct FpSample {
    /// Insertions performed when the sample was taken.
    pub insert_count: u64,
    /// Fresh never-inserted probes issued for this sample.
    pub probes_issued: u64,
    /// Probes the filter (wrongly) reported present.
    pub false_positives: u64,
    /// `false_positives / probes_issued`; NaN when no probes were issued.
    pub measured_fp: f64,
    /// Mean slice probes per probe query (negatives and false positives).
    pub mean_probes: f64,
    /// Mean slice probes restricted to negative-result probe queries.
    pub negative_probes_mean: f64,
    /// Mean slice probes over the guaranteed-window member queries.
    pub member_probes_mean: f64,
    /// Window members missed so far (cumulative; should stay 0).
    pub false_negatives_so_far: u64,
}

/// Result of a measurement run. Drivers fill the fields they produce and
/// leave the rest empty/zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementReport {
    pub fp_series: Vec<FpSample>,
    pub false_negative_count: u64,
    /// (age in generations past the window, measured report probability).
    pub decay_curve: Vec<(u32, f64)>,
    /// Probability-weighted slack in elements, measured at peaks.
    pub pws_estimate: f64,
    /// `pws_estimate / (l * g)`.
    pub npws_estimate: f64,
    pub mean_accesses_negative: f64,
    pub mean_accesses_member: f64,
}

/// Streams `spec` into the filter and samples the false-positive rate with
/// fresh probes every `sample_every` insertions. Each sample also queries
/// every element of the current guaranteed window, counting false
/// negatives and member access costs.
pub fn measure_fp(
    params: &FilterParams,
    spec: &StreamSpec,
    probes_per_sample: u64,
    sample_every: u64,
) -> Result<MeasurementReport, FilterError> {
    if sample_every == 0 {
        return Err(FilterError::InvalidParameter(
            "sample_every must be at least 1".into(),
        ));
    }
    let mut filter = params.build()?;
    let mut stream = StreamGen::new(spec)?;
    let window = filter.window() as usize;
    let mut recent_inserts: VecDeque<Vec<u8>> = VecDeque::with_capacity(window.min(1 << 20));

    let mut report = MeasurementReport::default();
    let mut probe_id = PROBE_BASE;
    let mut neg_queries = 0u64;
    let mut neg_probes = 0u64;
    let mut member_queries = 0u64;
    let mut member_probes = 0u64;

    for n in 1..=spec.length {
        let element = stream.next_element();
        filter.add(&element);
        recent_inserts.push_back(element);
        if recent_inserts.len() > window {
            recent_inserts.pop_front();
        }
        if n % sample_every != 0 {
            continue;
        }

        let mut sample_member_probes = 0u64;
        for member in &recent_inserts {
            let (present, probes) = filter.query_with_probes(member);
            if !present {
                report.false_negative_count += 1;
            }
            sample_member_probes += probes as u64;
        }
        member_queries += recent_inserts.len() as u64;
        member_probes += sample_member_probes;

        let mut false_positives = 0u64;
        let mut sample_probes = 0u64;
        let mut sample_neg_probes = 0u64;
        let mut sample_negatives = 0u64;
        for _ in 0..probes_per_sample {
            let probe = encode(probe_id, spec.element_width);
            probe_id += 1;
            let (present, probes) = filter.query_with_probes(&probe);
            sample_probes += probes as u64;
            if present {
                false_positives += 1;
            } else {
                sample_negatives += 1;
                sample_neg_probes += probes as u64;
            }
        }
        neg_queries += sample_negatives;
        neg_probes += sample_neg_probes;

        let ratio = |num: u64, den: u64| if den > 0 { num as f64 / den as f64 } else { f64::NAN };
        report.fp_series.push(FpSample {
            insert_count: n,
            probes_issued: probes_per_sample,
            false_positives,
            measured_fp: ratio(false_positives, probes_per_sample),
            mean_probes: ratio(sample_probes, probes_per_sample),
            negative_probes_mean: ratio(sample_neg_probes, sample_negatives),
            member_probes_mean: ratio(sample_member_probes, recent_inserts.len() as u64),
            false_negatives_so_far: report.false_negative_count,
        });
    }

    report.mean_accesses_negative = if neg_queries > 0 {
        neg_probes as f64 / neg_queries as f64
    } else {
        0.0
    };
    report.mean_accesses_member = if member_queries > 0 {
        member_probes as f64 / member_queries as f64
    } else {
        0.0
    };
    Ok(report)
}

/// Inserts `stream_length` distinct elements and, after every insertion,
/// queries the last `min(n, l * g)` of them. Returns the number of window
/// violations (guaranteed members reported absent); zero for a correct
/// filter.
pub fn verify_window(params: &FilterParams, stream_length: u64) -> Result<u64, FilterError> {
    let mut filter = params.build()?;
    let window = filter.window() as usize;
    let mut recent: VecDeque<Vec<u8>> = VecDeque::with_capacity(window.min(1 << 20));
    let mut violations = 0u64;
    for id in 0..stream_length {
        let element = encode(id, 8);
        filter.add(&element);
        recent.push_back(element);
        if recent.len() > window {
            recent.pop_front();
        }
        for member in &recent {
            if !filter.query(member) {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// Measures the report probability of elements aged past the window.
///
/// Inserts distinct generations of `g` elements each. At every pre-shift
/// peak it queries, for each age `j` in `0..=generations_past_window`, all
/// `g` elements of the generation that is `j` generations older than the
/// oldest guaranteed one, accumulating at least `trials` queries per age.
/// Age 0 is the window edge and must report with probability 1; older
/// generations decay toward the false-positive floor.
pub fn measure_decay(
    params: &FilterParams,
    generations_past_window: u32,
    trials: u64,
) -> Result<MeasurementReport, FilterError> {
    if trials == 0 {
        return Err(FilterError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    let mut filter = params.build()?;
    let slices = filter.slices();
    let g = filter.generation();
    let window = filter.window();
    if window == 0 {
        return Err(FilterError::InvalidParameter(
            "decay measurement requires l >= 1".into(),
        ));
    }
    let l = (window / g) as u32;
    let gpw = generations_past_window;

    let mut next_id = 0u64;
    let insert_generation = |filter: &mut AnyFilter, next_id: &mut u64| {
        for _ in 0..g {
            filter.add(&encode(*next_id, 8));
            *next_id += 1;
        }
    };

    let warm_generations = (slices + 2).max(l + gpw + 2);
    for _ in 0..warm_generations {
        insert_generation(&mut filter, &mut next_id);
    }

    let peaks = trials.div_ceil(g);
    let mut reported = vec![0u64; gpw as usize + 1];
    let mut queried = vec![0u64; gpw as usize + 1];
    for peak in 0..peaks {
        if peak > 0 {
            insert_generation(&mut filter, &mut next_id);
        }
        let completed = filter.inserts() / g;
        for j in 0..=gpw {
            let generation = completed - 1 - (l + j) as u64;
            let first = generation * g;
            for id in first..first + g {
                if filter.query(&encode(id, 8)) {
                    reported[j as usize] += 1;
                }
                queried[j as usize] += 1;
            }
        }
    }

    let mut report = MeasurementReport::default();
    for j in 0..=gpw {
        report
            .decay_curve
            .push((j, reported[j as usize] as f64 / queried[j as usize] as f64));
    }
    let prob_sum: f64 = report.decay_curve.iter().map(|&(_, p)| p).sum();
    report.pws_estimate = g as f64 * prob_sum;
    report.npws_estimate = report.pws_estimate / window as f64;
    Ok(report)
}
