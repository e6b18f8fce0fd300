//! End-to-end tests that spawn the real binary and check tables, exit
//! codes, manifests, and format parity.

#![allow(clippy::excessive_precision)]

use serde_json::Value;
use sha2::{Digest, Sha256};
use std::process::{Command, Output};

fn optstop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optstop"))
        .args(args)
        .output()
        .expect("failed to spawn the binary")
}

fn hex_encode(bytes: impl AsRef<[u8]>) -> String {
    bytes.as_ref().iter().map(|b| format!("{b:02x}")).collect()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is not UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is not UTF-8")
}

/// Naive CSV split; none of the emitted tables quote their fields.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .expect("empty output")
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|line| line.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn field<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    let idx = header.iter().position(|c| c == name).unwrap_or_else(|| {
        panic!("no column {name} in {header:?}");
    });
    &row[idx]
}

#[test]
fn h_table_rows_round_to_the_reference_constants() {
    let out = optstop(&[
        "h-table", "--alpha", "0.05", "--alpha", "0.025", "--alpha", "0.01", "--alpha", "0.005",
        "--alpha", "0.001", "--alpha", "0.0005",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    assert_eq!(header, ["alpha", "h", "h_rounded_2dp"]);
    let rounded: Vec<&str> = rows.iter().map(|r| field(&header, r, "h_rounded_2dp")).collect();
    assert_eq!(rounded, ["0.82", "0.93", "1.06", "1.15", "1.34", "1.42"]);
}

#[test]
fn h_at_one_half_equals_one_over_pi() {
    let out = optstop(&["h-table", "--alpha", "0.5"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    let h: f64 = field(&header, &rows[0], "h").parse().unwrap();
    let rel = (h - std::f64::consts::FRAC_1_PI).abs() / std::f64::consts::FRAC_1_PI;
    assert!(rel < 1e-14, "h(1/2) = {h}, expected 1/pi, rel {rel:.2e}");
}

#[test]
fn h_table_with_no_levels_prints_only_the_header() {
    let out = optstop(&["h-table"]);
    assert!(out.status.success());
    assert_eq!(stdout_str(&out), "alpha,h,h_rounded_2dp\n");
}

#[test]
fn h_table_rejects_bad_levels_with_their_position() {
    let out = optstop(&["h-table", "--alpha", "0.05", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_str(&out);
    assert!(err.contains("#2"), "stderr does not name the bad entry: {err}");
}

#[test]
fn predict_reproduces_the_known_gauss_percentages() {
    let out = optstop(&["predict", "--family", "gauss", "--n", "100", "--k", "1", "--alpha", "0.05"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    let total = rows.iter().find(|r| r[0] == "total").expect("no total row");
    let percent: f64 = field(&header, total, "percent_of_alpha").parse().unwrap();
    assert!(
        (percent - 8.229033512402547).abs() < 1e-12,
        "one extra observation at n=100 should inflate by 8.229 percent, got {percent}"
    );
    let implied: f64 = field(&header, total, "implied_alpha_nk").parse().unwrap();
    assert!((implied - 0.05 * 1.08229033512402547).abs() < 1e-15);

    let out = optstop(&["predict", "--family", "gauss", "--n", "100", "--k", "2", "--alpha", "0.05"]);
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    let total = rows.iter().find(|r| r[0] == "total").expect("no total row");
    let percent: f64 = field(&header, total, "percent_of_alpha").parse().unwrap();
    assert_eq!(format!("{percent:.2}"), "14.05");
    let multiplier: f64 = field(&header, total, "term").parse().unwrap();
    assert!((multiplier - (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
}

#[test]
fn predict_exp_scales_the_gauss_rate_by_the_first_positive_part() {
    let out = optstop(&["predict", "--family", "exp", "--n", "100", "--k", "1", "--alpha", "0.05"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    let total = rows.iter().find(|r| r[0] == "total").expect("no total row");
    let rho: f64 = field(&header, total, "rho").parse().unwrap();
    // sqrt(2 pi) / e, the exponential-walk factor relative to the Gauss rate.
    let factor = (2.0 * std::f64::consts::PI).sqrt() / std::f64::consts::E;
    let expected = 0.8229033512402547 * factor / 10.0;
    assert!((rho - expected).abs() < 1e-13, "rho {rho} vs {expected}");
    assert_eq!(format!("{factor:.4}"), "0.9221");
}

#[test]
fn predict_mc_esl_source_stays_near_the_closed_form() {
    let out = optstop(&[
        "predict", "--family", "gauss", "--n", "400", "--k", "3", "--alpha", "0.05",
        "--esl-source", "mc", "--reps", "200000", "--seed", "7",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let text = stdout_str(&out);
    let (header, rows) = parse_csv(&text);
    let total = rows.iter().find(|r| r[0] == "total").expect("no total row");
    let rho: f64 = field(&header, total, "rho").parse().unwrap();

    let closed = optstop(&["predict", "--family", "gauss", "--n", "400", "--k", "3", "--alpha", "0.05"]);
    let text = stdout_str(&closed);
    let (header, rows) = parse_csv(&text);
    let total = rows.iter().find(|r| r[0] == "total").expect("no total row");
    let rho_closed: f64 = field(&header, total, "rho").parse().unwrap();
    let rel = (rho / rho_closed - 1.0).abs();
    assert!(rel < 0.02, "mc-sourced rho {rho} vs closed {rho_closed}, rel {rel:.3}");
}

#[test]
fn kac_check_matches_the_exact_fair_table() {
    let out = optstop(&["kac-check", "--preset", "fair", "--k-max", "3"]);
    assert!(out.status.success());
    assert_eq!(
        stdout_str(&out),
        "k,lhs,rhs,equal\n1,1/2,1/2,true\n2,3/4,3/4,true\n3,1,1,true\n"
    );

    let out = optstop(&["kac-check", "--preset", "lopsided", "--k-max", "0"]);
    assert!(out.status.success());
    assert_eq!(stdout_str(&out), "k,lhs,rhs,equal\n");
}

#[test]
fn csv_and_json_outputs_carry_identical_values() {
    let args = ["simulate", "--family", "exp", "--n", "20", "--k", "2", "--alpha", "0.05",
        "--reps", "20000", "--seed", "9"];
    let csv_out = optstop(&args);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json_out = optstop(&json_args);
    assert!(csv_out.status.success() && json_out.status.success());

    let (header, rows) = parse_csv(&stdout_str(&csv_out));
    let parsed: Value = serde_json::from_slice(&json_out.stdout).unwrap();
    let json_cols: Vec<&str> =
        parsed["columns"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(header, json_cols);
    let json_rows = parsed["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (csv_row, json_row) in rows.iter().zip(json_rows) {
        for (csv_cell, json_cell) in csv_row.iter().zip(json_row.as_array().unwrap()) {
            match json_cell {
                // Float fields must agree to the bit after a CSV round trip.
                Value::Number(x) if x.is_f64() => {
                    let reparsed: f64 = csv_cell.parse().unwrap();
                    assert_eq!(reparsed, x.as_f64().unwrap(), "cell {csv_cell}");
                }
                Value::Number(x) => assert_eq!(csv_cell.parse::<i64>().unwrap(), x.as_i64().unwrap()),
                Value::String(s) => assert_eq!(csv_cell, s),
                Value::Bool(b) => assert_eq!(csv_cell, &b.to_string()),
                Value::Null => assert_eq!(csv_cell, ""),
                other => panic!("unexpected JSON cell {other:?}"),
            }
        }
    }
}

#[test]
fn manifest_digest_matches_the_written_table_and_reruns_reproduce_it() {
    let dir = std::env::temp_dir();
    let path = dir.join(format!("optstop-manifest-test-{}.csv", std::process::id()));
    let path_str = path.to_str().unwrap();
    let args = ["simulate", "--family", "gauss", "--n", "50", "--k", "1", "--alpha", "0.05",
        "--reps", "30000", "--seed", "11", "--out", path_str];

    let out = optstop(&args);
    assert!(out.status.success(), "stderr: {}", stderr_str(&out));
    let table_bytes = std::fs::read(&path).unwrap();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(format!("{path_str}.manifest.json")).unwrap())
            .unwrap();
    let digest = hex_encode(Sha256::digest(&table_bytes));
    assert_eq!(manifest["output_sha256"].as_str().unwrap(), digest);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["params"]["n"], 50);
    assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);

    let rerun = optstop(&args);
    assert!(rerun.status.success());
    let manifest2: Value =
        serde_json::from_slice(&std::fs::read(format!("{path_str}.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest2["output_sha256"].as_str().unwrap(), digest);

    std::fs::remove_file(&path).ok();
    std::fs::remove_file(format!("{path_str}.manifest.json")).ok();
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["vbe-check", "--family", "t", "--n", "10", "--p", "1.5", "--reps", "100"],
        vec!["simulate", "--family", "gauss", "--n", "10", "--k", "1", "--alpha", "1.5",
            "--reps", "100"],
        vec!["simulate", "--family", "gauss", "--n", "10", "--k", "1", "--alpha", "0.05",
            "--reps", "0"],
        vec!["compare", "--family", "gauss", "--n-grid", "", "--k-grid", "1", "--alpha", "0.05",
            "--reps", "10"],
        vec!["esl", "--family", "gauss", "--k", "0"],
        vec!["predict", "--family", "gauss", "--n", "100", "--k", "0", "--alpha", "0.05"],
    ] {
        let out = optstop(&args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}, stderr: {}", stderr_str(&out));
    }
}

#[test]
fn oversized_grids_are_rejected_up_front() {
    let ks: Vec<String> = (1..=3500).map(|k| k.to_string()).collect();
    let k_grid = ks.join(",");
    let out = optstop(&["compare", "--family", "gauss", "--n-grid", "1,2,3", "--k-grid", &k_grid,
        "--alpha", "0.05", "--reps", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("10500 cells"));
}

#[test]
fn sqrt_strain_warning_goes_to_stderr_and_the_run_succeeds() {
    let out = optstop(&["predict", "--family", "gauss", "--n", "10", "--k", "5", "--alpha", "0.05",
        "--mode", "sqrt"]);
    assert!(out.status.success());
    assert!(stderr_str(&out).contains("warning"));
    let (header, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(rows.len(), 1, "sqrt mode emits the total row only");
    let rho: f64 = field(&header, &rows[0], "rho").parse().unwrap();
    let expected = 2.0 * 0.8229033512402547 * (0.5f64).sqrt();
    assert!((rho - expected).abs() < 1e-12);
}

#[test]
fn compare_fills_the_quadrature_column_only_for_gauss_k1() {
    let out = optstop(&["compare", "--family", "gauss", "--n-grid", "100", "--k-grid", "1,2",
        "--alpha", "0.05", "--reps", "5000"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(rows.len(), 2);
    let quad_k1 = field(&header, &rows[0], "rho_exact_quad");
    let quad_k2 = field(&header, &rows[1], "rho_exact_quad");
    assert!(!quad_k1.is_empty());
    assert!(quad_k2.is_empty());
    let rho_exact: f64 = quad_k1.parse().unwrap();
    assert!((rho_exact - 0.08192582192133480).abs() < 1e-10);
}

#[test]
fn esl_monte_carlo_columns_appear_only_with_reps() {
    let out = optstop(&["esl", "--family", "gauss", "--k", "4"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(rows.len(), 4);
    assert!(field(&header, &rows[0], "mc_mean").is_empty());
    let closed: f64 = field(&header, &rows[0], "closed_form").parse().unwrap();
    assert!((closed - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);

    let out = optstop(&["esl", "--family", "gauss", "--k", "4", "--reps", "50000", "--seed", "3"]);
    let (header, rows) = parse_csv(&stdout_str(&out));
    for row in &rows {
        let closed: f64 = field(&header, row, "closed_form").parse().unwrap();
        let mc: f64 = field(&header, row, "mc_mean").parse().unwrap();
        let se: f64 = field(&header, row, "mc_se").parse().unwrap();
        assert!((mc - closed).abs() < 5.0 * se, "ell {}: {mc} vs {closed}", row[0]);
    }
}

#[test]
fn vbe_check_reports_a_holding_bound() {
    let out = optstop(&["vbe-check", "--family", "exp", "--n", "5", "--p", "2", "--reps", "20000",
        "--seed", "5"]);
    assert!(out.status.success());
    let (header, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(field(&header, &rows[0], "holds"), "true");
    let margin: f64 = field(&header, &rows[0], "margin_sigmas").parse().unwrap();
    assert!(margin > 5.0, "margin {margin}");
}
