//! End-to-end tests of the command-line interface, run against the built
//! binary.

use std::process::{Command, Output};

fn hdqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn verify_mubs_passes_and_dumps_auditable_grid() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("mubs.txt");
    let out = hdqkd(&["verify-mubs", "--dump", dump.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("PASS 2 bases"), "{text}");
    assert!(text.contains("256 cross pairs"), "{text}");

    let grid = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(grid.lines().filter(|l| !l.trim().is_empty()).count(), 32);

    // the dumped grid loads and verifies again
    let out = hdqkd(&["verify-mubs", "--load", dump.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("PASS"));
}

#[test]
fn verify_mubs_flags_a_corrupted_family() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("mubs.txt");
    assert!(hdqkd(&["verify-mubs", "--dump", dump.to_str().unwrap()])
        .status
        .success());
    // flip one sign in the first row
    let grid = std::fs::read_to_string(&dump).unwrap();
    let mut lines: Vec<String> = grid.lines().map(String::from).collect();
    lines[0] = lines[0].replacen(" 1", "-1", 1);
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, lines.join("\n")).unwrap();

    let out = hdqkd(&["verify-mubs", "--load", bad.to_str().unwrap()]);
    assert!(!out.status.success(), "corrupted family must fail");
    assert!(stdout_of(&out).contains("FAIL"));
}

#[test]
fn thresholds_table_contains_the_reference_row() {
    let out = hdqkd(&["thresholds"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("16, 0.3750, 0.2897"), "{text}");
    assert!(text.contains("2, 0.1464, 0.1100"), "{text}");
}

#[test]
fn pattern_emits_csv_with_pinhole_annotation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pattern.csv");
    let out = hdqkd(&[
        "pattern",
        "--alice-basis",
        "alpha",
        "--alice-k",
        "13",
        "--bob-basis",
        "alpha",
        "--bob-k",
        "7",
        "--points",
        "101",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("# pinhole_boundary_m = -5e-6,5e-6\n"));
    assert!(csv.contains("u_meters,intensity"));
    assert_eq!(csv.lines().count(), 2 + 101);
}

#[test]
fn run_requires_seeds() {
    let out = hdqkd(&["run", "--preset", "mu-a", "--cycles", "100"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--seed-alice"), "{err}");
}

#[test]
fn run_from_config_file_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("session.conf");
    std::fs::write(
        &config_path,
        "preset = mu-b\ncycles = 5000\nseed.alice = 4\nseed.bob = 5\nseed.channel = 6\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = hdqkd(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "session_log.csv",
        "sift_result.json",
        "security_report.json",
        "config_snapshot.json",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let report = std::fs::read_to_string(out_dir.join("security_report.json")).unwrap();
    assert!(report.contains("\"threshold_individual\": 0.375"));
    let snapshot = std::fs::read_to_string(out_dir.join("config_snapshot.json")).unwrap();
    assert!(snapshot.contains("\"mu\": 0.18"), "mu-b preset applied");
}

#[test]
fn rejected_config_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.conf");
    std::fs::write(&config_path, "preset = mu-a\nwhatever = 1\n").unwrap();
    let out = hdqkd(&["run", "--config", config_path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn two_process_mode_reconciles_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let port = {
        let probe = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        probe.local_addr().unwrap().port()
    };
    let addr = format!("127.0.0.1:{port}");
    let common = [
        "--preset",
        "mu-a",
        "--cycles",
        "3000",
        "--seed-alice",
        "17",
        "--seed-bob",
        "18",
        "--seed-channel",
        "19",
    ];
    let record = dir.path().join("bob.wirelog");

    let mut alice = Command::new(env!("CARGO_BIN_EXE_hdqkd"))
        .arg("serve-alice")
        .args(common)
        .args(["--addr", &addr, "--out-dir", dir.path().to_str().unwrap()])
        .spawn()
        .expect("alice spawns");

    let bob = Command::new(env!("CARGO_BIN_EXE_hdqkd"))
        .arg("serve-bob")
        .args(common)
        .args([
            "--addr",
            &addr,
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--record",
            record.to_str().unwrap(),
        ])
        .output()
        .expect("bob runs");
    let alice_status = alice.wait().expect("alice exits");
    assert!(
        bob.status.success() && alice_status.success(),
        "bob: {}\nalice status: {alice_status:?}",
        String::from_utf8_lossy(&bob.stderr)
    );

    let alice_json = std::fs::read_to_string(dir.path().join("wire_sift_alice.json")).unwrap();
    let bob_json = std::fs::read_to_string(dir.path().join("wire_sift_bob.json")).unwrap();
    assert_eq!(alice_json, bob_json, "both sides agree on the sift");

    // the recorded byte stream replays to the same result
    let out = Command::new(env!("CARGO_BIN_EXE_hdqkd"))
        .arg("replay")
        .args(common)
        .args([
            "--recording",
            record.to_str().unwrap(),
            "--role",
            "bob",
        ])
        .output()
        .expect("replay runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replayed = stdout_of(&out);
    let direct: serde_json::Value = serde_json::from_str(&bob_json).unwrap();
    let from_replay: serde_json::Value = serde_json::from_str(&replayed).unwrap();
    assert_eq!(direct, from_replay);
}
