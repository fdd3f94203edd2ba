//! End-to-end tests of the `sedsim` binary: determinism, provenance,
//! format equivalence, exit-code semantics, and agreement with direct
//! library calls.

use std::process::{Command, Output};

use sedsim_core::{solve_closed_form, FirstPassageSpec};

/// Runs the built binary with `args` and returns its captured output.
fn sedsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sedsim"))
        .args(args)
        .output()
        .expect("the sedsim binary must spawn")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout must be UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr must be UTF-8")
}

/// Splits a CSV document into (comment lines, header fields, records).
fn parse_csv(text: &str) -> (Vec<&str>, Vec<&str>, Vec<Vec<&str>>) {
    let mut comments = Vec::new();
    let mut header = Vec::new();
    let mut records = Vec::new();
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            comments.push(comment);
        } else if header.is_empty() {
            header = line.split(',').collect();
        } else {
            records.push(line.split(',').collect());
        }
    }
    (comments, header, records)
}

/// Column lookup in a parsed CSV record.
fn field<'a>(header: &[&str], record: &[&'a str], name: &str) -> &'a str {
    let idx = header
        .iter()
        .position(|&h| h == name)
        .unwrap_or_else(|| panic!("column {name} missing from header {header:?}"));
    record[idx]
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "sweep", "--k-min", "1", "--k-max", "4", "--trials", "300", "--seed", "99",
    ];
    let first = sedsim(&args);
    let second = sedsim(&args);
    assert!(
        first.status.success(),
        "sweep failed: {}",
        stderr_of(&first)
    );
    assert_eq!(
        first.stdout, second.stdout,
        "rerunning the same invocation must reproduce the output byte for byte"
    );
}

#[test]
fn worker_count_does_not_change_the_output() {
    let base = [
        "sweep", "--k-min", "2", "--k-max", "5", "--trials", "300", "--seed", "7",
    ];
    let one = sedsim(&[&base[..], &["--workers", "1"]].concat());
    let two = sedsim(&[&base[..], &["--workers", "2"]].concat());
    assert!(one.status.success(), "sweep failed: {}", stderr_of(&one));
    assert_eq!(
        one.stdout, two.stdout,
        "aggregates are folded in a fixed order, so workers must not matter"
    );
}

#[test]
fn json_document_carries_schema_and_provenance() {
    let output = sedsim(&[
        "simulate", "--k", "6", "--trials", "200", "--seed", "31", "--format", "json",
    ]);
    assert!(
        output.status.success(),
        "simulate failed: {}",
        stderr_of(&output)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&stdout_of(&output)).expect("stdout must be one JSON object");
    assert_eq!(
        doc["schema_version"], "1",
        "schema_version must be the string \"1\""
    );
    assert_eq!(doc["tool"], "sedsim");
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["command"], "simulate");
    let params = &doc["params"];
    assert_eq!(params["seed"], 31, "the master seed must be embedded");
    assert_eq!(params["p"], 0.05);
    assert_eq!(params["epsilon"], 0.001);
    assert_eq!(params["trials"], 200);
    assert_eq!(
        doc["rows"].as_array().map(Vec::len),
        Some(1),
        "one row per point"
    );
}

#[test]
fn csv_comments_embed_seed_and_version_and_rows_fit_the_header() {
    let output = sedsim(&[
        "sweep", "--k-min", "1", "--k-max", "3", "--trials", "200", "--seed", "123",
    ]);
    assert!(
        output.status.success(),
        "sweep failed: {}",
        stderr_of(&output)
    );
    let text = stdout_of(&output);
    let (comments, header, records) = parse_csv(&text);
    let comment_block = comments.join("\n");
    assert!(
        comment_block.contains(concat!("v", env!("CARGO_PKG_VERSION"))),
        "the tool version must appear in the comment block: {comment_block}"
    );
    assert!(
        comment_block.contains("\"seed\":123"),
        "the master seed must appear in the params comment: {comment_block}"
    );
    assert!(
        comment_block.contains("\"p\":0.05") && comment_block.contains("\"epsilon\":0.001"),
        "the channel parameters must appear in the params comment: {comment_block}"
    );
    assert_eq!(records.len(), 3, "one record per k");
    for record in &records {
        assert_eq!(
            record.len(),
            header.len(),
            "every record must have exactly one field per header column"
        );
    }
}

#[test]
fn csv_and_json_encode_identical_numbers() {
    let args = [
        "bounds",
        "--p",
        "0.05",
        "--epsilon",
        "0.001",
        "--k-min",
        "10",
        "--k-max",
        "10",
    ];
    let csv = sedsim(&args);
    let json = sedsim(&[&args[..], &["--format", "json"]].concat());
    assert!(csv.status.success() && json.status.success());
    let text = stdout_of(&csv);
    let (_, header, records) = parse_csv(&text);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&json)).unwrap();
    let row = &doc["rows"][0];
    for column in [
        "general_upper",
        "tightened_upper",
        "two_phase_upper",
        "stop_feedback_vlf",
        "epsilon_star",
    ] {
        let csv_text = field(&header, &records[0], column);
        let json_text = serde_json::to_string(&row[column]).unwrap();
        assert_eq!(
            csv_text, json_text,
            "{column} must be rendered identically in CSV and JSON"
        );
    }
}

#[test]
fn bounds_emits_the_crossover_error_target_above_one_percent() {
    let output = sedsim(&[
        "bounds", "--p", "0.05", "--k-min", "5", "--k-max", "5", "--format", "json",
    ]);
    assert!(
        output.status.success(),
        "bounds failed: {}",
        stderr_of(&output)
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let star = doc["rows"][0]["epsilon_star"]
        .as_f64()
        .expect("epsilon_star must be a number");
    assert!(
        star > 1e-2,
        "the crossover error target at p=0.05 must exceed 1e-2, got {star}"
    );
    assert_eq!(doc["rows"][0]["epsilon_star_underflowed"], false);
    assert_eq!(doc["summary"]["all_hold"], true);
}

#[test]
fn first_passage_matches_a_direct_library_call() {
    let spec = FirstPassageSpec::new(5, 0.11, 4.25).unwrap();
    let expected = solve_closed_form(&spec).unwrap();
    let output = sedsim(&[
        "first-passage",
        "--n",
        "5",
        "--p",
        "0.11",
        "--delta0",
        "4.25",
        "--format",
        "json",
    ]);
    assert!(
        output.status.success(),
        "first-passage failed: {}",
        stderr_of(&output)
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), expected.v.len(), "one row per transient state");
    for (row, &v) in rows.iter().zip(&expected.v) {
        assert_eq!(
            row["closed_form"].as_f64().unwrap(),
            v,
            "the CLI must report exactly the library's closed-form value"
        );
    }
    assert_eq!(
        doc["summary"]["delta0_star"].as_f64().unwrap(),
        expected.delta0_star
    );
}

#[test]
fn exact_first_passage_reports_zero_gap_and_monte_carlo_agrees() {
    let output = sedsim(&[
        "first-passage",
        "--n",
        "3",
        "--p",
        "0.25",
        "--delta0",
        "3",
        "--exact",
        "--mc-trials",
        "5000",
        "--seed",
        "2",
        "--format",
        "json",
    ]);
    assert!(
        output.status.success(),
        "first-passage failed: {}",
        stderr_of(&output)
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(
        doc["summary"]["max_relative_gap"].as_f64().unwrap(),
        0.0,
        "the exact solvers must agree bit for bit"
    );
    // Dyadic collapse point: delta0 = delta0* = 3 gives V_0 = 2n exactly.
    assert_eq!(doc["summary"]["v0_differential"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["rows"][0]["closed_form"].as_f64().unwrap(), 6.0);
    let z = doc["summary"]["monte_carlo"]["z_score"].as_f64().unwrap();
    assert!(z.abs() <= 4.0, "Monte Carlo z-score {z} out of range");
}

#[test]
fn verify_passes_with_all_hard_invariants_green() {
    let output = sedsim(&[
        "verify", "--k", "6", "--trials", "1500", "--seed", "8", "--format", "json",
    ]);
    assert!(
        output.status.success(),
        "verify must exit 0 when the hard invariants hold: {}",
        stderr_of(&output)
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(doc["summary"]["hard_pass"], true);
    let rows = doc["rows"].as_array().unwrap();
    for name in [
        "partition_balance",
        "bounded_step",
        "stopping_time_ordering",
        "step_guard",
    ] {
        let row = rows
            .iter()
            .find(|r| r["name"] == name)
            .unwrap_or_else(|| panic!("hard check {name} missing"));
        assert_eq!(row["hard"], true, "{name} must be marked hard");
        assert_eq!(row["passed"], true, "{name} failed: {}", row["detail"]);
    }
    assert_eq!(
        doc["params"]["encoder"], "sed",
        "verification is defined for the partition encoder"
    );
}

#[test]
fn partition_encoder_beats_the_interval_baseline() {
    // Soft comparison at k=10: the partition encoder's mean decision time
    // should not exceed the interval baseline's under the same seed.
    let mean_tau = |encoder: &str| -> f64 {
        let output = sedsim(&[
            "simulate",
            "--k",
            "10",
            "--trials",
            "400",
            "--seed",
            "14",
            "--encoder",
            encoder,
            "--format",
            "json",
        ]);
        let doc: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
        doc["rows"][0]["mean_tau"].as_f64().unwrap()
    };
    let sed = mean_tau("sed");
    let horstein = mean_tau("horstein");
    assert!(
        sed <= horstein,
        "partition encoder mean tau {sed} should not exceed the baseline's {horstein}"
    );
}

#[test]
fn out_flag_writes_the_document_to_a_file() {
    let dir = std::env::temp_dir().join(format!("sedsim-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bounds.csv");
    let output = sedsim(&[
        "bounds",
        "--k-min",
        "3",
        "--k-max",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "bounds failed: {}",
        stderr_of(&output)
    );
    assert!(output.stdout.is_empty(), "--out must suppress stdout");
    let written = std::fs::read_to_string(&path).expect("--out must create the file");
    assert!(
        written.starts_with("# sedsim"),
        "file must hold the document"
    );
    let inline = sedsim(&["bounds", "--k-min", "3", "--k-max", "4"]);
    assert_eq!(
        written,
        stdout_of(&inline),
        "--out must write exactly what stdout would have carried"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_with_code_two() {
    let bad_encoder = sedsim(&["simulate", "--encoder", "turbo", "--trials", "10"]);
    assert_eq!(
        bad_encoder.status.code(),
        Some(2),
        "an unknown encoder is a usage error"
    );
    assert!(
        stderr_of(&bad_encoder).contains("turbo"),
        "the offending value must be named"
    );
    let bad_range = sedsim(&["sweep", "--k-min", "5", "--k-max", "2", "--trials", "10"]);
    assert_eq!(
        bad_range.status.code(),
        Some(2),
        "an inverted k range is a usage error"
    );
}

#[test]
fn bound_violations_exit_with_code_one_and_name_the_row() {
    // The interval baseline genuinely misses the partition-scheme bound
    // at k=10, which is exactly what the exit contract must surface.
    let output = sedsim(&[
        "simulate",
        "--k",
        "10",
        "--trials",
        "400",
        "--seed",
        "14",
        "--encoder",
        "horstein",
    ]);
    assert_eq!(
        output.status.code(),
        Some(1),
        "a failed assertion must exit 1"
    );
    let err = stderr_of(&output);
    assert!(
        err.contains("FAIL") && err.contains("k=10"),
        "the violating row must be named on stderr: {err}"
    );
    let text = stdout_of(&output);
    assert!(
        text.contains("within_bound"),
        "the document must still be emitted in full"
    );
}
