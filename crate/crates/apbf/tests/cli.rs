//! End-to-end tests of the `apbf` binary: table pins, simulation
//! determinism, parameter search, snapshot round trips, and the exit-code
//! contract (0 success, 2 usage, 3 no configuration, 4 I/O, 5 snapshot).

use std::fs;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_apbf"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8(out.stdout).expect("utf-8 stdout"),
        String::from_utf8(out.stderr).expect("utf-8 stderr"),
    )
}

fn lines(s: &str) -> Vec<&str> {
    s.lines().collect()
}

#[test]
fn tables_apbf_prints_the_reference_rows() {
    let (code, stdout, _) = run(&["tables", "--which", "apbf", "--aimed", "0.01"]);
    assert_eq!(code, 0);
    assert_eq!(
        lines(&stdout),
        vec![
            "aimed_fp,k,l,actual_fp,eff,acc_window,acc_fp,acc_false,npws",
            "0.01,7,5,0.011232,0.39,7.81,7.40,2.02,0.40",
            "0.01,8,8,0.010244,0.41,8.88,8.62,3.09,0.25",
            "0.01,9,14,0.010212,0.45,10.50,9.89,3.79,0.14",
            "0.01,10,25,0.010076,0.47,12.46,11.80,5.85,0.08",
            "0.01,11,46,0.009948,0.49,15.23,14.56,9.55,0.04",
        ]
    );
    // Unfiltered, the table holds all 25 configurations.
    let (code, stdout, _) = run(&["tables", "--which", "apbf"]);
    assert_eq!(code, 0);
    assert_eq!(lines(&stdout).len(), 26);
}

#[test]
fn tables_bf_prints_the_baseline_rows() {
    let (code, stdout, _) = run(&["tables", "--which", "bf"]);
    assert_eq!(code, 0);
    assert_eq!(
        lines(&stdout),
        vec![
            "aimed_fp,k,bits_per_item,actual_fp,acc_true,acc_false",
            "0.1,4,5.77,0.0625000000,4.00,1.73",
            "0.01,7,10.09,0.0078125000,7.00,1.94",
            "0.001,10,14.42,0.0009765625,10.00,1.99",
            "0.0001,14,20.19,0.0000610351,14.00,2.00",
            "0.00001,17,24.52,0.0000076293,17.00,2.00",
        ]
    );
}

#[test]
fn tables_apbbf_prints_the_blocked_rows() {
    let (code, stdout, _) = run(&["tables", "--which", "apbbf"]);
    assert_eq!(code, 0);
    let rows = lines(&stdout);
    assert_eq!(rows.len(), 17, "header plus 16 block configurations");
    assert_eq!(
        rows[0],
        "k,l,B,b,apbf_fp,actual_fp,cap,acc_window,acc_fp,acc_false,npws"
    );
    assert!(
        rows.contains(&"2,3,512,4,0.0180539,0.0121825,0.996,3.31,2.71,2.23,0.35"),
        "missing the (2,3,512,4) row in {stdout}"
    );
    assert!(
        rows.contains(&"2,3,64,4,0.0180539,0.0159865,0.968,3.30,2.72,2.25,0.36"),
        "missing the (2,3,64,4) row in {stdout}"
    );
}

#[test]
fn tables_output_flag_writes_the_same_csv_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bf.csv");
    let (code, stdout, _) = run(&["tables", "--which", "bf", "--output", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty(), "CSV must go to the file, not stdout");
    let file = fs::read_to_string(&path).unwrap();
    let (_, direct, _) = run(&["tables", "--which", "bf"]);
    assert_eq!(file, direct);
}

#[test]
fn tables_unmatched_aimed_warns_and_prints_nothing() {
    let (code, stdout, stderr) = run(&["tables", "--which", "apbf", "--aimed", "0.02"]);
    assert_eq!(code, 0);
    assert_eq!(lines(&stdout).len(), 1, "header only");
    assert!(
        stderr.contains("warning: no tabulated apbf rows for aimed fp = 0.02"),
        "stderr: {stderr}"
    );
}

#[test]
fn simulate_is_deterministic_and_describes_the_filter() {
    let args = [
        "simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "1500", "--probes", "1000", "--seed", "9",
    ];
    let (code, stdout, stderr) = run(&args);
    assert_eq!(code, 0);
    assert!(
        stderr.contains("kind=apbf k=4 l=3 m=1928 g=334 window=1002 seed=9"),
        "stderr: {stderr}"
    );
    let rows = lines(&stdout);
    assert_eq!(rows[0], "n,measured_fp,mean_probes,false_negatives");
    assert_eq!(rows.len(), 5, "samples at each of the four generation marks");
    assert!(rows[1].starts_with("334,"), "first sample at n = g: {}", rows[1]);
    for row in &rows[1..] {
        assert!(row.ends_with(",0"), "no false negatives expected: {row}");
    }
    let (code2, stdout2, _) = run(&args);
    assert_eq!(code2, 0);
    assert_eq!(stdout, stdout2, "same arguments must reproduce the same CSV");
}

#[test]
fn simulate_with_zero_probes_leaves_rate_cells_empty() {
    let (code, stdout, _) = run(&[
        "simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "700", "--probes", "0", "--seed", "9",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        lines(&stdout),
        vec!["n,measured_fp,mean_probes,false_negatives", "334,,,0", "668,,,0"]
    );
}

#[test]
fn simulate_honors_sample_every_and_duplicates() {
    let (code, stdout, _) = run(&[
        "simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "300", "--probes", "50", "--sample-every", "100",
        "--dup-rate", "0.5", "--zipf", "1.2", "--dup-window", "200", "--seed", "5",
    ]);
    assert_eq!(code, 0);
    let rows = lines(&stdout);
    let ns: Vec<&str> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(ns, vec!["100", "200", "300"]);
    for row in &rows[1..] {
        assert!(row.ends_with(",0"), "duplicates must never cause false negatives: {row}");
    }
}

#[test]
fn simulate_sizes_blocked_filters_from_a_window() {
    let (code, stdout, stderr) = run(&[
        "simulate", "--kind", "apbbf", "-k", "2", "-l", "3", "--window", "1000",
        "--block-bits", "512", "--set-bits", "4", "--inserts", "706", "--probes", "100",
    ]);
    assert_eq!(code, 0);
    assert!(
        stderr.contains(
            "kind=apbbf k=2 l=3 num_blocks=8 block_bits=512 set_bits=4 g=353 window=1059 seed=0"
        ),
        "stderr: {stderr}"
    );
    assert_eq!(lines(&stdout).len(), 3, "samples at n = 353 and n = 706");
}

#[test]
fn params_lists_configurations_with_the_smallest_marked_default() {
    let (code, stdout, _) = run(&["params", "--fp", "0.001", "--window", "1000"]);
    assert_eq!(code, 0);
    let rows = lines(&stdout);
    assert_eq!(
        rows[0],
        "k,l,m,g,memory_bits,bits_per_element,eff,npws,default"
    );
    assert_eq!(
        rows[1], "10,7,2064,143,35088,35.09,0.40,0.2854,yes",
        "the smallest-footprint configuration leads and is the default"
    );
    assert_eq!(rows.iter().filter(|r| r.ends_with(",yes")).count(), 1);
}

#[test]
fn params_npws_cap_moves_the_default() {
    let (code, stdout, _) = run(&[
        "params", "--fp", "0.001", "--window", "1000", "--max-npws", "0.1",
    ]);
    assert_eq!(code, 0);
    let rows = lines(&stdout);
    assert_eq!(rows[1], "13,23,826,44,29736,29.74,0.49,0.0869,yes");
    for row in &rows[1..] {
        let npws: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
        assert!(npws <= 0.1, "row violates the slack cap: {row}");
    }
}

#[test]
fn params_degenerate_target_includes_the_windowless_row() {
    let (code, stdout, _) = run(&["params", "--fp", "0.5", "--window", "1"]);
    assert_eq!(code, 0);
    assert_eq!(
        lines(&stdout)[1],
        "1,0,2,1,2,2.00,0.00,inf,yes",
        "l = 0 has no window guarantee, so its slack prints as inf"
    );
}

#[test]
fn params_reports_unsatisfiable_targets() {
    let (code, stdout, stderr) = run(&[
        "params", "--fp", "0.001", "--window", "100", "--max-slices", "8",
    ]);
    assert_eq!(code, 3, "no configuration under 8 slices reaches fp 0.001");
    assert!(stdout.is_empty());
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
}

#[test]
fn snapshot_save_load_round_trips_the_flat_filter() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.apbf");
    let path_s = path.to_str().unwrap();
    let (code, _, stderr) = run(&[
        "snapshot", "save", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "5000", "--seed", "9", "--out", path_s,
    ]);
    assert_eq!(code, 0);
    assert!(stderr.contains("5000 inserts"), "stderr: {stderr}");
    assert_eq!(
        fs::metadata(&path).unwrap().len(),
        1730,
        "fixed format: 43-byte header plus 7 slices of 241 bytes"
    );

    let (code, stdout, _) = run(&["snapshot", "load", "--path", path_s]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        "kind=apbf k=4 l=3 m=1928 g=334 n=5000 window=1002 seed=9"
    );

    // Saving the same filter again produces identical bytes.
    let again = dir.path().join("f2.apbf");
    run(&[
        "snapshot", "save", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "5000", "--seed", "9", "--out", again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn snapshot_save_load_round_trips_the_blocked_filter() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.apbb");
    let path_s = path.to_str().unwrap();
    let (code, _, _) = run(&[
        "snapshot", "save", "--kind", "apbbf", "-k", "2", "-l", "3",
        "--num-blocks", "8", "--block-bits", "512", "--set-bits", "4",
        "--inserts", "1000", "--seed", "3", "--out", path_s,
    ]);
    assert_eq!(code, 0);
    // The kind is sniffed from the magic; no --kind needed.
    let (code, stdout, _) = run(&["snapshot", "load", "--path", path_s]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        "kind=apbbf k=2 l=3 num_blocks=8 block_bits=512 set_bits=4 g=353 n=1000 window=1059 seed=3"
    );
}

#[test]
fn snapshot_failures_use_exit_codes_four_and_five() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("f.apbf");
    run(&[
        "snapshot", "save", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
        "--inserts", "10", "--seed", "9", "--out", flat.to_str().unwrap(),
    ]);

    // Forcing the wrong kind fails on the magic.
    let (code, _, stderr) = run(&[
        "snapshot", "load", "--path", flat.to_str().unwrap(), "--kind", "apbbf",
    ]);
    assert_eq!(code, 5);
    assert!(stderr.contains("bad magic"), "stderr: {stderr}");

    // A truncated file reports how many bytes were needed.
    let cut = dir.path().join("cut.apbf");
    fs::write(&cut, &fs::read(&flat).unwrap()[..20]).unwrap();
    let (code, _, stderr) = run(&["snapshot", "load", "--path", cut.to_str().unwrap()]);
    assert_eq!(code, 5);
    assert!(
        stderr.contains("truncated snapshot: need 25 bytes, got 20"),
        "stderr: {stderr}"
    );

    // A missing file is an I/O error, not a parse error.
    let missing = dir.path().join("missing.apbf");
    let (code, _, stderr) = run(&["snapshot", "load", "--path", missing.to_str().unwrap()]);
    assert_eq!(code, 4);
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let cases: [&[&str]; 10] = [
        // apbbf-only flags on an apbf run
        &["simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
          "--block-bits", "64", "--inserts", "10", "--probes", "0"],
        // --aimed has no meaning for the apbbf table
        &["tables", "--which", "apbbf", "--aimed", "0.01"],
        // unknown table name (rejected by argument parsing)
        &["tables", "--which", "nope"],
        // missing required --which
        &["tables"],
        // neither --window nor --bits
        &["simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--inserts", "10", "--probes", "0"],
        // both --window and --bits
        &["simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
          "--window", "500", "--inserts", "10", "--probes", "0"],
        // aimed rate outside (0, 1)
        &["tables", "--which", "bf", "--aimed", "1.5"],
        // duplicate rate outside [0, 1)
        &["simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
          "--inserts", "10", "--probes", "0", "--dup-rate", "1.5"],
        // element width below the 8-byte identifier prefix
        &["simulate", "--kind", "apbf", "-k", "4", "-l", "3", "--bits", "1928",
          "--inserts", "10", "--probes", "0", "--element-width", "4"],
        // target rate outside (0, 1)
        &["params", "--fp", "1.5", "--window", "10"],
    ];
    for args in cases {
        let (code, _, _) = run(args);
        assert_eq!(code, 2, "expected usage error for {args:?}");
    }
}

#[test]
fn help_succeeds() {
    let (code, stdout, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("Age-partitioned Bloom filters"));
}
