// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psc-sim"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_to(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--contract",
        "auction",
        "--values",
        "0,5,3",
        "--ell",
        "8",
        "--seed",
        "7",
    ];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--transcript", path.to_str().unwrap()]);
    sim(&args)
}

#[test]
fn honest_auction_finalizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_to(&dir.path().join("t.jsonl"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("phase      finalized"));
    assert!(out.contains("recovered  5,0,3"));
    assert!(out.contains("out        \"1\""));
    assert!(out.contains("invariants hold"));
}

#[test]
fn verify_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    assert_eq!(run_to(&path, &[]).status.code(), Some(0));
    let p = path.to_str().unwrap();

    let v = sim(&["verify", p]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("checked 48 bit proofs, 1 balance proofs; 0 failed"));

    let r = sim(&["replay", p]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).trim_end().ends_with("match"));
}

#[test]
fn adversaries_are_rejected_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, code) in [
        ("corrupt-bit-proof", "bit-proof-invalid"),
        ("swap-candidate", "schnorr-failed"),
        ("bad-contract", "schnorr-failed"),
        ("duplicate-freeze", "already-frozen"),
        ("early-finalize", "wrong-phase"),
    ] {
        let path = dir.path().join(format!("{mode}.jsonl"));
        let o = run_to(&path, &["--adversary", mode]);
        assert_eq!(o.status.code(), Some(0), "{mode}: {}", stdout(&o));
        assert!(stdout(&o).contains(code), "{mode}: {}", stdout(&o));
        let r = sim(&["replay", path.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "{mode}");
    }
}

#[test]
fn corrupted_transcript_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    run_to(&path, &["--adversary", "corrupt-bit-proof"]);
    let v = sim(&["verify", path.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("FAIL line"));
}

#[test]
fn tampered_state_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    run_to(&path, &[]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.last_mut().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(last).unwrap();
    v["state_hash"] = serde_json::Value::String("00".repeat(32));
    *last = v.to_string();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let r = sim(&["replay", path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1), "{}", stdout(&r));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "contract = \"identity\"\nvalues = [1, 2]\nell = 4\ngroup = \"production\"\nseed = 3\nfinalizer = \"all\"\n",
    )
    .unwrap();
    let o = sim(&["run", "--config", cfg.to_str().unwrap(), "--values", "9,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("recovered  9,4"));
}

#[test]
fn toy_group_runs() {
    let o = sim(&[
        "run",
        "--contract",
        "identity",
        "--values",
        "1",
        "--ell",
        "2",
        "--group",
        "toy-insecure",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("modp-toy-insecure"));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("bad.toml");
    std::fs::write(
        &unknown,
        "contract = \"identity\"\nvalues = [1]\ncolour = 3\n",
    )
    .unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--contract", "identity"],
        vec!["run", "--contract", "nope", "--values", "1"],
        vec![
            "run",
            "--contract",
            "identity",
            "--values",
            "1",
            "--adversary",
            "sneaky",
        ],
        vec![
            "run",
            "--contract",
            "identity",
            "--values",
            "16",
            "--ell",
            "4",
        ],
        vec![
            "run",
            "--contract",
            "identity",
            "--values",
            "1,1,1",
            "--ell",
            "3",
            "--group",
            "toy-insecure",
        ],
        vec!["run", "--config", unknown.to_str().unwrap()],
        vec!["verify", "/nonexistent/t.jsonl"],
    ];
    for args in cases {
        let o = sim(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stdout(&o));
    }
}
