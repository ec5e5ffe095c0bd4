//! Command-line interface: reference metric tables, simulation runs,
//! parameter search, and snapshot save/load.
//!
//! CSV goes to stdout (or `--output`); diagnostics go to stderr. Exit
//! codes: 0 success, 2 usage error, 3 no satisfying configuration,
//! 4 I/O failure, 5 snapshot parse failure.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, AccessScenario};
use crate::blocked::{capacity_factor, ApbbfFilter};
use crate::bloom;
use crate::error::{FilterError, SnapshotError};
use crate::filter::{plan_for_window, ApbfFilter};
use crate::workload::{self, DupDistribution, FilterParams, StreamSpec};

/// Reference APBF configurations printed by `tables --which apbf`.
const APBF_ROWS: [(f64, u32, u32); 25] = [
    (0.1, 4, 3),
    (0.1, 5, 7),
    (0.1, 6, 14),
    (0.1, 7, 28),
    (0.1, 8, 56),
    (0.01, 7, 5),
    (0.01, 8, 8),
    (0.01, 9, 14),
    (0.01, 10, 25),
    (0.01, 11, 46),
    (0.001, 10, 7),
    (0.001, 11, 9),
    (0.001, 12, 14),
    (0.001, 13, 23),
    (0.001, 14, 40),
    (0.0001, 14, 11),
    (0.0001, 15, 15),
    (0.0001, 16, 22),
    (0.0001, 17, 36),
    (0.0001, 18, 63),
    (0.00001, 17, 13),
    (0.00001, 18, 16),
    (0.00001, 19, 22),
    (0.00001, 20, 33),
    (0.00001, 21, 54),
];

/// Reference blocked configurations printed by `tables --which apbbf`.
const APBBF_ROWS: [(u32, u32, u16, u16); 16] = [
    (2, 3, 64, 4),
    (2, 3, 512, 4),
    (2, 5, 64, 4),
    (2, 5, 512, 4),
    (3, 5, 64, 4),
    (3, 5, 512, 4),
    (3, 8, 64, 4),
    (3, 8, 512, 4),
    (2, 3, 64, 8),
    (2, 3, 512, 8),
    (2, 5, 64, 8),
    (2, 5, 512, 8),
    (3, 5, 64, 8),
    (3, 5, 512, 8),
    (3, 8, 64, 8),
    (3, 8, 512, 8),
];

/// Aimed rates of the plain-Bloom baseline table.
const BF_AIMED: [f64; 5] = [0.1, 0.01, 0.001, 0.0001, 0.00001];

#[derive(Parser, Debug)]
#[command(
    name = "apbf",
    version,
    about = "Age-partitioned Bloom filters: metrics, simulation, snapshots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a reference metric table as CSV.
    Tables(TablesArgs),
    /// Stream elements into a filter and sample its false-positive rate.
    Simulate(SimulateArgs),
    /// Search configurations for a target false-positive rate and window.
    Params(ParamsArgs),
    /// Save a filter snapshot to a file, or load and describe one.
    Snapshot(SnapshotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableKind {
    Bf,
    Apbf,
    Apbbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FilterKind {
    Apbf,
    Apbbf,
}

#[derive(Args, Debug)]
struct TablesArgs {
    /// Which table to print.
    #[arg(long, value_enum)]
    which: TableKind,
    /// Restrict bf/apbf rows to these aimed false-positive rates.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    aimed: Vec<f64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: FilterKind,
    /// Slices a query must match consecutively.
    #[arg(short = 'k', long = "k")]
    k: u32,
    /// Extra (aged) slices.
    #[arg(short = 'l', long = "l")]
    l: u32,
    /// Size the filter for this guaranteed window.
    #[arg(long)]
    window: Option<u64>,
    /// Bits per slice (apbf only; alternative to --window).
    #[arg(long)]
    bits: Option<u64>,
    /// Blocks per segment (apbbf only; alternative to --window).
    #[arg(long)]
    num_blocks: Option<u64>,
    /// Bits per block (apbbf only).
    #[arg(long)]
    block_bits: Option<u16>,
    /// Bits set per block and insertion (apbbf only).
    #[arg(long)]
    set_bits: Option<u16>,
    /// Elements streamed into the filter.
    #[arg(long)]
    inserts: u64,
    /// Fresh never-inserted probes per sample (0 skips fp sampling).
    #[arg(long)]
    probes: u64,
    /// Insertions between samples; defaults to the generation size.
    #[arg(long)]
    sample_every: Option<u64>,
    /// Probability an emission repeats a recent element.
    #[arg(long, default_value_t = 0.0)]
    dup_rate: f64,
    /// Zipf exponent for duplicate recency (uniform when omitted).
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recency window for duplicate draws; defaults to the filter window.
    #[arg(long)]
    dup_window: Option<u64>,
    /// Bytes per element.
    #[arg(long, default_value_t = 8)]
    element_width: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    /// Target false-positive rate, in (0, 1).
    #[arg(long)]
    fp: f64,
    /// Sliding window the filter must guarantee.
    #[arg(long)]
    window: u64,
    /// Reject configurations whose peak NPWS exceeds this.
    #[arg(long)]
    max_npws: Option<f64>,
    /// Largest k + l considered.
    #[arg(long, default_value_t = 64)]
    max_slices: u32,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SnapshotArgs {
    #[command(subcommand)]
    action: SnapshotAction,
}

#[derive(Subcommand, Debug)]
enum SnapshotAction {
    /// Build a filter, insert elements, and write its snapshot.
    Save(SaveArgs),
    /// Read a snapshot and report the filter parameters.
    Load(LoadArgs),
}

#[derive(Args, Debug)]
struct SaveArgs {
    #[arg(long, value_enum)]
    kind: FilterKind,
    #[arg(short = 'k', long = "k")]
    k: u32,
    #[arg(short = 'l', long = "l")]
    l: u32,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    bits: Option<u64>,
    #[arg(long)]
    num_blocks: Option<u64>,
    #[arg(long)]
    block_bits: Option<u16>,
    #[arg(long)]
    set_bits: Option<u16>,
    /// Distinct elements to insert before saving.
    #[arg(long, default_value_t = 0)]
    inserts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Snapshot destination path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LoadArgs {
    /// Snapshot file to read.
    #[arg(long)]
    path: PathBuf,
    /// Require the snapshot to be of this kind instead of sniffing.
    #[arg(long, value_enum)]
    kind: Option<FilterKind>,
}

/// Errors carrying their process exit code.
enum CliError {
    Usage(String),
    NoConfiguration(String),
    Io(String, io::Error),
    Snapshot(SnapshotError),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NoConfiguration(_) => 3,
            CliError::Io(..) => 4,
            CliError::Snapshot(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::NoConfiguration(m) => m.clone(),
            CliError::Io(path, e) => format!("{path}: {e}"),
            CliError::Snapshot(e) => format!("snapshot: {e}"),
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::NoConfiguration(m) => CliError::NoConfiguration(m),
            FilterError::InvalidParameter(m) => CliError::Usage(m),
            FilterError::ResourceLimit(m) => CliError::Usage(m),
        }
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        CliError::Snapshot(e)
    }
}

/// Parses the process arguments, runs the command, and returns the exit
/// code. Argument syntax errors exit directly via clap with code 2.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Tables(a) => cmd_tables(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Params(a) => cmd_params(a),
        Command::Snapshot(a) => match a.action {
            SnapshotAction::Save(s) => cmd_snapshot_save(s),
            SnapshotAction::Load(s) => cmd_snapshot_load(s),
        },
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = fs::File::create(p)
                .map_err(|e| CliError::Io(p.display().to_string(), e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

fn write_err(e: io::Error) -> CliError {
    CliError::Io("output".into(), e)
}

/// Truncates toward zero at `digits` decimal places, matching how the
/// reference tables print bit counts and power-of-two rates.
fn trunc(x: f64, digits: i32) -> f64 {
    let p = 10f64.powi(digits);
    (x * p).floor() / p
}

fn cmd_tables(a: TablesArgs) -> Result<(), CliError> {
    for &v in &a.aimed {
        if !(v > 0.0 && v < 1.0) {
            return Err(CliError::Usage(format!(
                "aimed fp = {v} must lie in (0, 1)"
            )));
        }
    }
    let mut out = open_output(&a.output)?;
    match a.which {
        TableKind::Bf => {
            let aimed: Vec<f64> = if a.aimed.is_empty() {
                BF_AIMED.to_vec()
            } else {
                a.aimed.clone()
            };
            writeln!(out, "aimed_fp,k,bits_per_item,actual_fp,acc_true,acc_false")
                .map_err(write_err)?;
            for v in aimed {
                let k = ((1.0 / v).log2().ceil() as u32).max(1);
                let row = bloom::bf_metrics(k)?;
                writeln!(
                    out,
                    "{},{},{:.2},{:.10},{:.2},{:.2}",
                    v,
                    row.k,
                    trunc(row.bits_per_item, 2),
                    trunc(row.fp, 10),
                    row.acc_true,
                    row.acc_false
                )
                .map_err(write_err)?;
            }
        }
        TableKind::Apbf => {
            let matches_aimed = |row_aimed: f64| {
                a.aimed.is_empty()
                    || a.aimed
                        .iter()
                        .any(|&v| (v - row_aimed).abs() <= row_aimed * 1e-9)
            };
            for &v in &a.aimed {
                if !APBF_ROWS.iter().any(|&(ra, ..)| (v - ra).abs() <= ra * 1e-9) {
                    eprintln!("warning: no tabulated apbf rows for aimed fp = {v}");
                }
            }
            writeln!(
                out,
                "aimed_fp,k,l,actual_fp,eff,acc_window,acc_fp,acc_false,npws"
            )
            .map_err(write_err)?;
            for &(aimed, k, l) in APBF_ROWS.iter().filter(|&&(ra, ..)| matches_aimed(ra)) {
                let row = analysis::metrics_row(k, l);
                writeln!(
                    out,
                    "{},{},{},{:.6},{:.2},{:.2},{:.2},{:.2},{:.2}",
                    aimed, k, l, row.fp, row.eff, row.acc_window, row.acc_fp, row.acc_false,
                    row.npws
                )
                .map_err(write_err)?;
            }
        }
        TableKind::Apbbf => {
            if !a.aimed.is_empty() {
                return Err(CliError::Usage(
                    "--aimed does not apply to the apbbf table".into(),
                ));
            }
            writeln!(
                out,
                "k,l,B,b,apbf_fp,actual_fp,cap,acc_window,acc_fp,acc_false,npws"
            )
            .map_err(write_err)?;
            for &(k, l, bb, sb) in &APBBF_ROWS {
                let q = analysis::apbbf_match_gradient_steady(k, l, bb, sb);
                let fp = analysis::fp_rate_with_ratios(k, l, &q);
                let flat_fp = analysis::fp_rate(k * sb as u32, l * sb as u32);
                let cap = capacity_factor(bb, sb)?;
                let win =
                    analysis::expected_accesses_with_ratios(k, l, AccessScenario::WindowMember, &q);
                let fpa =
                    analysis::expected_accesses_with_ratios(k, l, AccessScenario::FalsePositive, &q);
                let fal = analysis::expected_accesses_with_ratios(k, l, AccessScenario::Negative, &q);
                let npws = analysis::npws_from_gradient(k, l, &q);
                writeln!(
                    out,
                    "{},{},{},{},{:.7},{:.7},{:.3},{:.2},{:.2},{:.2},{:.2}",
                    k, l, bb, sb, flat_fp, fp, cap, win, fpa, fal, npws
                )
                .map_err(write_err)?;
            }
        }
    }
    out.flush().map_err(write_err)
}

/// Builds the filter described by the shared simulate/save flags and
/// returns it with its workload parameter form.
fn build_filter(
    kind: FilterKind,
    k: u32,
    l: u32,
    window: Option<u64>,
    bits: Option<u64>,
    num_blocks: Option<u64>,
    block_bits: Option<u16>,
    set_bits: Option<u16>,
    seed: u64,
) -> Result<(FilterParams, workload::AnyFilter), CliError> {
    match kind {
        FilterKind::Apbf => {
            if num_blocks.is_some() || block_bits.is_some() || set_bits.is_some() {
                return Err(CliError::Usage(
                    "--num-blocks/--block-bits/--set-bits require --kind apbbf".into(),
                ));
            }
            let filter = match (window, bits) {
                (Some(w), None) => ApbfFilter::with_window(k, l, w, seed)?,
                (None, Some(m)) => ApbfFilter::new(k, l, m, seed)?,
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --window or --bits is required for apbf".into(),
                    ))
                }
            };
            let params = FilterParams::Apbf {
                k,
                l,
                m: filter.m(),
                seed,
            };
            Ok((params, workload::AnyFilter::Flat(filter)))
        }
        FilterKind::Apbbf => {
            if bits.is_some() {
                return Err(CliError::Usage(
                    "--bits applies to apbf; size apbbf with --num-blocks or --window".into(),
                ));
            }
            let (bb, sb) = match (block_bits, set_bits) {
                (Some(bb), Some(sb)) => (bb, sb),
                _ => {
                    return Err(CliError::Usage(
                        "--block-bits and --set-bits are required for apbbf".into(),
                    ))
                }
            };
            let filter = match (window, num_blocks) {
                (Some(w), None) => ApbbfFilter::for_window(k, l, w, bb, sb, seed)?,
                (None, Some(nb)) => ApbbfFilter::new(k, l, nb, bb, sb, seed)?,
                _ => {
                    return Err(CliError::Usage(
                        "exactly one of --window or --num-blocks is required for apbbf".into(),
                    ))
                }
            };
            let params = FilterParams::Apbbf {
                k,
                l,
                num_blocks: filter.num_blocks(),
                block_bits: bb,
                set_bits: sb,
                seed,
            };
            Ok((params, workload::AnyFilter::Blocked(filter)))
        }
    }
}

fn describe(params: &FilterParams, filter: &workload::AnyFilter) -> String {
    match params {
        FilterParams::Apbf { k, l, m, seed } => format!(
            "kind=apbf k={} l={} m={} g={} window={} seed={}",
            k,
            l,
            m,
            filter.generation(),
            filter.window(),
            seed
        ),
        FilterParams::Apbbf {
            k,
            l,
            num_blocks,
            block_bits,
            set_bits,
            seed,
        } => format!(
            "kind=apbbf k={} l={} num_blocks={} block_bits={} set_bits={} g={} window={} seed={}",
            k,
            l,
            num_blocks,
            block_bits,
            set_bits,
            filter.generation(),
            filter.window(),
            seed
        ),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let (params, filter) = build_filter(
        a.kind,
        a.k,
        a.l,
        a.window,
        a.bits,
        a.num_blocks,
        a.block_bits,
        a.set_bits,
        a.seed,
    )?;
    let spec = StreamSpec {
        length: a.inserts,
        dup_rate: a.dup_rate,
        distribution: a
            .zipf
            .map(DupDistribution::Zipf)
            .unwrap_or(DupDistribution::Uniform),
        seed: a.seed,
        element_width: a.element_width,
        window: a.dup_window.unwrap_or(filter.window().max(1)),
    };
    let sample_every = a.sample_every.unwrap_or(filter.generation());
    eprintln!("{}", describe(&params, &filter));
    let report = workload::measure_fp(&params, &spec, a.probes, sample_every)?;

    let mut out = open_output(&a.output)?;
    writeln!(out, "n,measured_fp,mean_probes,false_negatives").map_err(write_err)?;
    for s in &report.fp_series {
        let fp_cell = if s.measured_fp.is_nan() {
            String::new()
        } else {
            format!("{:.8}", s.measured_fp)
        };
        let probes_cell = if s.mean_probes.is_nan() {
            String::new()
        } else {
            format!("{:.4}", s.mean_probes)
        };
        writeln!(
            out,
            "{},{},{},{}",
            s.insert_count, fp_cell, probes_cell, s.false_negatives_so_far
        )
        .map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

fn cmd_params(a: ParamsArgs) -> Result<(), CliError> {
    if a.window == 0 {
        return Err(CliError::Usage("window must be at least 1".into()));
    }
    let rows = analysis::find_params(a.fp, a.max_slices, a.max_npws)?;
    let default = rows
        .iter()
        .enumerate()
        .min_by_key(|(_, r)| (r.k + r.l, r.k))
        .map(|(i, _)| i)
        .expect("find_params never returns an empty set");

    let mut out = open_output(&a.output)?;
    writeln!(
        out,
        "k,l,m,g,memory_bits,bits_per_element,eff,npws,default"
    )
    .map_err(write_err)?;
    for (i, row) in rows.iter().enumerate() {
        let (m, g) = plan_for_window(row.k, row.l, a.window)?;
        let memory_bits = (row.k + row.l) as u64 * m;
        let bits_per_element = memory_bits as f64 / a.window as f64;
        let npws_cell = if row.npws.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.4}", row.npws)
        };
        writeln!(
            out,
            "{},{},{},{},{},{:.2},{:.2},{},{}",
            row.k,
            row.l,
            m,
            g,
            memory_bits,
            bits_per_element,
            row.eff,
            npws_cell,
            if i == default { "yes" } else { "no" }
        )
        .map_err(write_err)?;
    }
    out.flush().map_err(write_err)
}

fn cmd_snapshot_save(a: SaveArgs) -> Result<(), CliError> {
    let (params, mut filter) = build_filter(
        a.kind,
        a.k,
        a.l,
        a.window,
        a.bits,
        a.num_blocks,
        a.block_bits,
        a.set_bits,
        a.seed,
    )?;
    for id in 0..a.inserts {
        let mut element = [0u8; 8];
        element.copy_from_slice(&id.to_le_bytes());
        filter.add(&element);
    }
    let bytes = match &filter {
        workload::AnyFilter::Flat(f) => f.snapshot(),
        workload::AnyFilter::Blocked(f) => f.snapshot(),
    };
    fs::write(&a.out, &bytes).map_err(|e| CliError::Io(a.out.display().to_string(), e))?;
    eprintln!(
        "{} ({} bytes, {} inserts)",
        describe(&params, &filter),
        bytes.len(),
        a.inserts
    );
    Ok(())
}

fn cmd_snapshot_load(a: LoadArgs) -> Result<(), CliError> {
    let bytes =
        fs::read(&a.path).map_err(|e| CliError::Io(a.path.display().to_string(), e))?;
    let kind = match a.kind {
        Some(k) => k,
        None => match bytes.get(..4) {
            Some(b"APBF") => FilterKind::Apbf,
            Some(b"APBB") => FilterKind::Apbbf,
            // Let the flat parser produce the magic/truncation error.
            _ => FilterKind::Apbf,
        },
    };
    match kind {
        FilterKind::Apbf => {
            let f = ApbfFilter::restore(&bytes)?;
            println!(
                "kind=apbf k={} l={} m={} g={} n={} window={} seed={}",
                f.k(),
                f.l(),
                f.m(),
                f.g(),
                f.n(),
                f.window(),
                f.seed()
            );
        }
        FilterKind::Apbbf => {
            let f = ApbbfFilter::restore(&bytes)?;
            println!(
                "kind=apbbf k={} l={} num_blocks={} block_bits={} set_bits={} g={} n={} window={} seed={}",
                f.k(),
                f.l(),
                f.num_blocks(),
                f.block_bits(),
                f.set_bits(),
                f.g(),
                f.n(),
                f.window(),
                f.seed()
            );
        }
    }
    Ok(())
}
