//! Analytic engine for age-partitioned filters.
//!
//! Everything here is a pure function of the parameters: the steady-state
//! fill gradient, the false-positive recursion over consecutive-match runs,
//! expected probe counts per query scenario, peak slack metrics, relative
//! space efficiency, the blocked-filter false-positive model, parameter
//! search, and a brute-force enumeration oracle used to validate the
//! recursions in tests.
//!
//! Fill gradients are plain `Vec<f64>` of length `k + l`, youngest slice
//! first. The worst case (just before a shift) is the linear ramp
//! `min(i+1, k) / (2k)`: the youngest slice has seen one generation of its
//! share of bits, the next two, and every slice past `k - 1` is half full.
//!
//! The recursions treat slices as independent. A concrete filter derives
//! all of an element's slice indexes from one 128-bit hash pair, so a probe
//! whose pair collides modulo `m` with a recently inserted element matches
//! every slice that element still occupies, not just one. That aliasing
//! adds roughly `(l + 1) * g / m^2` to the measured false-positive rate at
//! peak fill: about `(l + 1) * g` elements are present in all `k` of some
//! run of slices, and each aliases a given probe with probability `1 / m^2`.
//! The excess is far below the rate itself for any practical geometry, but
//! simulations tight enough to resolve it must account for it.

use crate::blocked::block_capacity;
use crate::error::FilterError;

/// Worst-case (pre-shift) fill gradient: `min(i+1, k) / (2k)`.
pub fn steady_fill(k: u32, l: u32) -> Vec<f64> {
    assert!(k >= 1, "k must be at least 1");
    (0..k + l)
        .map(|i| (i + 1).min(k) as f64 / (2 * k) as f64)
        .collect()
}

/// Exact pre-shift fill gradient for a concrete geometry: slice `i` holds
/// `min(i+1, k)` complete generations of `g` insertions into `m` bits.
pub fn exact_peak_fill(k: u32, l: u32, m: u64, g: u64) -> Vec<f64> {
    assert!(k >= 1 && m >= 1 && g >= 1, "parameters must be positive");
    (0..k + l)
        .map(|i| {
            let inserts = ((i + 1).min(k) as u64 * g) as f64;
            1.0 - (1.0 - 1.0 / m as f64).powf(inserts)
        })
        .collect()
}

/// False-positive probability under the worst-case gradient.
pub fn fp_rate(k: u32, l: u32) -> f64 {
    fp_rate_with_ratios(k, l, &steady_fill(k, l))
}

/// False-positive probability for an arbitrary per-slice match gradient:
/// the probability that a never-inserted element finds `k` consecutive
/// matching slices among the `k + l`.
///
/// Evaluates F(a, i) = 1 when a = k; 0 when i > l + a; otherwise
/// `r_i * F(a+1, i+1) + (1 - r_i) * F(0, i+1)`, memoized over `(a, i)`;
/// the result is F(0, 0). `a` counts current consecutive matches and `i`
/// is the next slice to examine, so reaching `i > l + a` means no window
/// of `k` consecutive matches can be completed any more.
pub fn fp_rate_with_ratios(k: u32, l: u32, ratios: &[f64]) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(ratios.len(), (k + l) as usize, "gradient length must be k + l");
    let (k, l) = (k as usize, l as usize);
    let width = l + k + 1;
    let mut memo = vec![f64::NAN; (k + 1) * width];

    fn f(a: usize, i: usize, k: usize, l: usize, r: &[f64], memo: &mut [f64], width: usize) -> f64 {
        if a == k {
            return 1.0;
        }
        if i > l + a {
            return 0.0;
        }
        let key = a * width + i;
        if !memo[key].is_nan() {
            return memo[key];
        }
        let ri = r[i];
        let v = ri * f(a + 1, i + 1, k, l, r, memo, width)
            + (1.0 - ri) * f(0, i + 1, k, l, r, memo, width);
        memo[key] = v;
        v
    }

    f(0, 0, k, l, ratios, &mut memo, width)
}

/// Query scenario for [`expected_accesses`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessScenario {
    /// Element absent, query returns false.
    Negative,
    /// Element absent, query returns true.
    FalsePositive,
    /// Element within the guaranteed window; averaged over its age.
    WindowMember,
}

/// Expected slice probes of a query under the worst-case gradient.
pub fn expected_accesses(k: u32, l: u32, scenario: AccessScenario) -> f64 {
    expected_accesses_with_ratios(k, l, scenario, &steady_fill(k, l))
}

/// Expected slice probes for an arbitrary gradient.
///
/// The query walk visits states `(p, c, i)`: `p` matches before the last
/// miss, `c` consecutive matches since, `i` the slice about to be probed.
/// Each state yields the pair (probability of ending in the scenario's
/// outcome, expected probes restricted to those outcomes); the conditional
/// expectation is their quotient at the start state `(0, 0, l)`. For
/// `WindowMember` the element's own `k` slices match with certainty, every
/// walk terminates positive, and probes are counted unconditionally; the
/// result averages over the member's possible ages (generations `0..l`,
/// or the single generation when `l = 0`).
pub fn expected_accesses_with_ratios(
    k: u32,
    l: u32,
    scenario: AccessScenario,
    ratios: &[f64],
) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(ratios.len(), (k + l) as usize, "gradient length must be k + l");
    match scenario {
        AccessScenario::Negative => {
            let (p, e) = probe_walk(k, l, ratios, None, false, false);
            if p > 0.0 {
                e / p
            } else {
                0.0
            }
        }
        AccessScenario::FalsePositive => {
            let (p, e) = probe_walk(k, l, ratios, None, true, false);
            if p > 0.0 {
                e / p
            } else {
                0.0
            }
        }
        AccessScenario::WindowMember => {
            let ages: Vec<u32> = if l == 0 { vec![0] } else { (0..l).collect() };
            let total: f64 = ages
                .iter()
                .map(|&j| probe_walk(k, l, ratios, Some(j), true, true).1)
                .sum();
            total / ages.len() as f64
        }
    }
}

/// Core query-walk recursion shared by all scenarios.
///
/// Returns `(P, E)` for the start state `(0, 0, l)`: `P` is the probability
/// of the tracked outcome (`accept_outcome` selects accept vs reject) and
/// `E` the expected probe count, weighted by outcome paths unless
/// `unconditional` counts every path. `forced` marks a member's own
/// generation `j`: slices `j..j+k` match with probability 1.
fn probe_walk(
    k: u32,
    l: u32,
    ratios: &[f64],
    forced: Option<u32>,
    accept_outcome: bool,
    unconditional: bool,
) -> (f64, f64) {
    let k = k as i64;
    let l = l as i64;
    let width = (l + k) as usize;
    let mut memo: Vec<Option<(f64, f64)>> = vec![None; (k * k) as usize * width];

    struct Ctx<'a> {
        k: i64,
        r: &'a [f64],
        forced: Option<(i64, i64)>,
        accept_outcome: bool,
        unconditional: bool,
        width: usize,
    }

    fn walk(p: i64, c: i64, i: i64, ctx: &Ctx, memo: &mut [Option<(f64, f64)>]) -> (f64, f64) {
        if i < 0 {
            // Walked off the oldest slice: the query returns false.
            return (if ctx.accept_outcome { 0.0 } else { 1.0 }, 0.0);
        }
        let key = ((p * ctx.k + c) as usize) * ctx.width + i as usize;
        if let Some(v) = memo[key] {
            return v;
        }
        let ri = match ctx.forced {
            Some((lo, hi)) if lo <= i && i < hi => 1.0,
            _ => ctx.r[i as usize],
        };
        let (pm, em) = if p + c + 1 == ctx.k {
            // A match here completes k consecutive: the query returns true.
            (if ctx.accept_outcome { 1.0 } else { 0.0 }, 0.0)
        } else {
            walk(p, c + 1, i + 1, ctx, memo)
        };
        let (pf, ef) = walk(c, 0, i - ctx.k, ctx, memo);
        let prob = ri * pm + (1.0 - ri) * pf;
        let base = if ctx.unconditional { 1.0 } else { prob };
        let e = base + ri * em + (1.0 - ri) * ef;
        memo[key] = Some((prob, e));
        (prob, e)
    }

    let ctx = Ctx {
        k,
        r: ratios,
        forced: forced.map(|j| (j as i64, j as i64 + k)),
        accept_outcome,
        unconditional,
        width,
    };
    walk(0, 0, l, &ctx, &mut memo)
}

/// Peak normalized probability-weighted slack, `(2 - 2^(1-k)) / l`: the
/// expected number of just-expired elements still reported, as a fraction
/// of the window, measured just before a shift.
pub fn peak_npws(k: u32, l: u32) -> Result<f64, FilterError> {
    if k == 0 {
        return Err(FilterError::InvalidParameter("k must be at least 1".into()));
    }
    if l == 0 {
        return Err(FilterError::InvalidParameter(
            "peak NPWS is undefined for l = 0: there is no guaranteed window".into(),
        ));
    }
    Ok((2.0 - (2.0f64).powi(1 - k as i32)) / l as f64)
}

/// Peak NPWS from an explicit gradient: a generation `j` steps past the
/// window is still reported when the `j` mature slices below its surviving
/// run all match, so its report probability is the product of
/// `ratios[l..l+j]`. Sums the first `k` ages and normalizes by `l`.
pub fn npws_from_gradient(k: u32, l: u32, ratios: &[f64]) -> f64 {
    assert!(l >= 1, "NPWS requires l >= 1");
    assert_eq!(ratios.len(), (k + l) as usize, "gradient length must be k + l");
    let mut sum = 0.0;
    let mut product = 1.0;
    for j in 0..k {
        sum += product;
        let idx = (l + j) as usize;
        if idx < ratios.len() {
            product *= ratios[idx];
        }
    }
    sum / l as f64
}

/// Space efficiency relative to a plain Bloom filter with the same
/// false-positive rate: `(log2(1/fp) / k) * (l / (k + l))`.
pub fn efficiency(k: u32, l: u32, fp: f64) -> f64 {
    assert!(fp > 0.0 && fp < 1.0, "fp must lie in (0, 1)");
    let kb = (1.0 / fp).log2();
    (kb / k as f64) * (l as f64 / (k + l) as f64)
}

/// One candidate configuration from [`find_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub k: u32,
    pub l: u32,
    pub fp: f64,
    pub eff: f64,
    pub acc_window: f64,
    pub acc_fp: f64,
    pub acc_false: f64,
    /// `f64::INFINITY` when `l = 0` (no guaranteed window).
    pub npws: f64,
}

/// Full metric row for one `(k, l)` configuration.
pub fn metrics_row(k: u32, l: u32) -> MetricsRow {
    let fp = fp_rate(k, l);
    MetricsRow {
        k,
        l,
        fp,
        eff: efficiency(k, l, fp),
        acc_window: expected_accesses(k, l, AccessScenario::WindowMember),
        acc_fp: expected_accesses(k, l, AccessScenario::FalsePositive),
        acc_false: expected_accesses(k, l, AccessScenario::Negative),
        npws: peak_npws(k, l).unwrap_or(f64::INFINITY),
    }
}

/// Candidate configurations for a target false-positive rate, one per `k`
/// from `ceil(log2(1/target_fp))` up to `max_k_plus_l`, each with the `l`
/// whose fp sits closest to the target in log space (bounded by the slice
/// budget), filtered by `max_npws` when given. Rows are sorted by `k`;
/// the smallest `k + l` row is the natural default choice.
pub fn find_params(
    target_fp: f64,
    max_k_plus_l: u32,
    max_npws: Option<f64>,
) -> Result<Vec<MetricsRow>, FilterError> {
    let pairs = find_param_pairs(target_fp, max_k_plus_l, max_npws)?;
    Ok(pairs.into_iter().map(|(k, l)| metrics_row(k, l)).collect())
}

/// The `(k, l)` pairs underlying [`find_params`], without the metric
/// columns. Cheap enough for sizing decisions.
pub(crate) fn find_param_pairs(
    target_fp: f64,
    max_k_plus_l: u32,
    max_npws: Option<f64>,
) -> Result<Vec<(u32, u32)>, FilterError> {
    if !(target_fp > 0.0 && target_fp < 1.0) {
        return Err(FilterError::InvalidParameter(format!(
            "target fp = {target_fp} must lie in (0, 1)"
        )));
    }
    if max_k_plus_l == 0 {
        return Err(FilterError::InvalidParameter(
            "max_k_plus_l must be at least 1".into(),
        ));
    }
    if let Some(cap) = max_npws {
        if !(cap > 0.0) {
            return Err(FilterError::InvalidParameter(format!(
                "max_npws = {cap} must be positive"
            )));
        }
    }
    let k_min = ((1.0 / target_fp).log2().ceil() as u32).max(1);
    let mut pairs = Vec::new();
    for k in k_min..=max_k_plus_l {
        let l = select_l(k, target_fp, max_k_plus_l - k);
        if let Some(cap) = max_npws {
            let npws = peak_npws(k, l).unwrap_or(f64::INFINITY);
            if npws > cap {
                continue;
            }
        }
        pairs.push((k, l));
    }
    if pairs.is_empty() {
        return Err(FilterError::NoConfiguration(format!(
            "no (k, l) with k + l <= {max_k_plus_l} reaches fp <= {target_fp}{}",
            max_npws.map_or(String::new(), |c| format!(" and NPWS <= {c}"))
        )));
    }
    Ok(pairs)
}

/// Largest `l <= l_max` with `fp_rate(k, l) <= target`, then the closer of
/// it and `l + 1` in log distance (ties to the smaller). fp is strictly
/// increasing in `l`, which makes the doubling + binary search sound.
fn select_l(k: u32, target: f64, l_max: u32) -> u32 {
    if fp_rate(k, 0) > target {
        return 0;
    }
    let mut hi = 1u32;
    while hi <= l_max && fp_rate(k, hi) <= target {
        hi *= 2;
    }
    let mut lo = hi / 2;
    let mut hip = hi.min(l_max + 1);
    while lo + 1 < hip {
        let mid = lo + (hip - lo) / 2;
        if fp_rate(k, mid) <= target {
            lo = mid;
        } else {
            hip = mid;
        }
    }
    let best = lo.min(l_max);
    if best + 1 <= l_max {
        let below = (fp_rate(k, best) / target).ln().abs();
        let above = (fp_rate(k, best + 1) / target).ln().abs();
        if above < below {
            return best + 1;
        }
    }
    best
}

/// Probability that all `set_bits` probed bits of one block are set, when
/// the block has absorbed a Poisson(`lambda`) number of insertions, each
/// setting one bit per partition: `E[(1 - (1 - b/B)^J)^b]`.
///
/// The mixture is summed outward from the Poisson mode with weights
/// relative to the mode and normalized at the end, so it stays accurate
/// for `lambda` far beyond the range where `e^-lambda` underflows.
pub fn subfilter_match_prob(lambda: f64, block_bits: u16, set_bits: u16) -> f64 {
    assert!(
        set_bits >= 1 && set_bits < block_bits,
        "need 1 <= set_bits < block_bits"
    );
    assert!(lambda >= 0.0 && lambda.is_finite(), "lambda must be finite and >= 0");
    if lambda == 0.0 {
        return 0.0;
    }
    let b = set_bits as f64;
    let miss = 1.0 - set_bits as f64 / block_bits as f64;
    let value = |j: f64| (1.0 - miss.powf(j)).powf(b);

    let mode = lambda.floor();
    let mut weight_sum = 1.0;
    let mut value_sum = value(mode);

    let mut w = 1.0;
    let mut j = mode;
    while j >= 1.0 && w >= 1e-14 {
        // Poisson(j-1)/Poisson(j) = j / lambda.
        w *= j / lambda;
        j -= 1.0;
        weight_sum += w;
        value_sum += w * value(j);
    }
    let mut w = 1.0;
    let mut j = mode;
    loop {
        w *= lambda / (j + 1.0);
        j += 1.0;
        if w < 1e-14 {
            break;
        }
        weight_sum += w;
        value_sum += w * value(j);
    }
    value_sum / weight_sum
}

/// Per-slice match gradient of a blocked filter at its pre-shift peak,
/// for the concrete geometry: slice `i` holds `min(i+1, k) * g` insertions
/// spread over `num_blocks` blocks.
pub fn apbbf_match_gradient(
    k: u32,
    l: u32,
    num_blocks: u64,
    block_bits: u16,
    set_bits: u16,
) -> Vec<f64> {
    assert!(k >= 1 && num_blocks >= 1, "k and num_blocks must be positive");
    let g = generation_size_blocked(num_blocks, block_bits, set_bits, k);
    assert!(g >= 1, "num_blocks too small for k: generation size is 0");
    (0..k + l)
        .map(|i| {
            let lambda = (i + 1).min(k) as f64 * g as f64 / num_blocks as f64;
            subfilter_match_prob(lambda, block_bits, set_bits)
        })
        .collect()
}

/// Large-filter limit of [`apbbf_match_gradient`]: per-block load
/// `min(i+1, k) / k` of the block capacity, independent of `num_blocks`.
pub fn apbbf_match_gradient_steady(k: u32, l: u32, block_bits: u16, set_bits: u16) -> Vec<f64> {
    assert!(k >= 1, "k must be at least 1");
    let per_block = block_capacity(block_bits, set_bits);
    (0..k + l)
        .map(|i| {
            let lambda = (i + 1).min(k) as f64 * per_block / k as f64;
            subfilter_match_prob(lambda, block_bits, set_bits)
        })
        .collect()
}

/// Model false-positive rate of a blocked filter with the given geometry.
pub fn apbbf_fp_model(k: u32, l: u32, num_blocks: u64, block_bits: u16, set_bits: u16) -> f64 {
    let q = apbbf_match_gradient(k, l, num_blocks, block_bits, set_bits);
    fp_rate_with_ratios(k, l, &q)
}

/// Model false-positive rate in the large-filter limit.
pub fn apbbf_fp_model_steady(k: u32, l: u32, block_bits: u16, set_bits: u16) -> f64 {
    let q = apbbf_match_gradient_steady(k, l, block_bits, set_bits);
    fp_rate_with_ratios(k, l, &q)
}

fn generation_size_blocked(num_blocks: u64, block_bits: u16, set_bits: u16, k: u32) -> u64 {
    (num_blocks as f64 * block_capacity(block_bits, set_bits) / k as f64).floor() as u64
}

/// Brute-force oracle: enumerates all `2^(k+l)` per-slice match patterns,
/// runs the query walk on each, and accumulates exact probabilities.
/// Returns `(fp, expected probes per negative query)`.
pub fn enumerate_oracle(k: u32, l: u32, ratios: &[f64]) -> Result<(f64, f64), FilterError> {
    let n = k + l;
    if n > 24 {
        return Err(FilterError::ResourceLimit(format!(
            "enumeration over 2^{n} patterns refused; k + l must be <= 24"
        )));
    }
    assert!(k >= 1, "k must be at least 1");
    assert_eq!(ratios.len(), n as usize, "gradient length must be k + l");
    let mut fp = 0.0;
    let mut p_false = 0.0;
    let mut acc_false = 0.0;
    for pattern in 0u64..(1u64 << n) {
        let mut prob = 1.0;
        for i in 0..n {
            if pattern >> i & 1 == 1 {
                prob *= ratios[i as usize];
            } else {
                prob *= 1.0 - ratios[i as usize];
            }
        }
        let (accepted, probes) = walk_pattern(|i| pattern >> i & 1 == 1, k, l);
        if accepted {
            fp += prob;
        } else {
            p_false += prob;
            acc_false += prob * probes as f64;
        }
    }
    let acc = if p_false > 0.0 { acc_false / p_false } else { 0.0 };
    Ok((fp, acc))
}

/// The query walk on a concrete match pattern; returns (result, probes).
pub(crate) fn walk_pattern(matches: impl Fn(u32) -> bool, k: u32, l: u32) -> (bool, u32) {
    let k = k as i64;
    let mut i = l as i64;
    let mut p = 0i64;
    let mut c = 0i64;
    let mut probes = 0u32;
    while i >= 0 {
        probes += 1;
        if matches(i as u32) {
            c += 1;
            if p + c == k {
                return (true, probes);
            }
            i += 1;
        } else {
            i -= k;
            p = c;
            c = 0;
        }
    }
    (false, probes)
}
