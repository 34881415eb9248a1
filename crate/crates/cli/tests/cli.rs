use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use ntcf::ntcf::{NtcfKey, NtcfTrapdoor};
use ntcf::params::{b_p_formula, NtcfParams};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ntcf-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn ntcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntcf")).args(args).env_remove("NTCF_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn keygen_files_parse_back_and_are_seeded() {
    let a = scratch("keygen-a");
    let b = scratch("keygen-b");
    for dir in [&a, &b] {
        let o = ntcf(&["keygen", "--preset", "desk-k3", "--seed", "5", "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let key_text = fs::read_to_string(a.join("key.txt")).unwrap();
    let sk_text = fs::read_to_string(a.join("secret.txt")).unwrap();
    assert_eq!(key_text, fs::read_to_string(b.join("key.txt")).unwrap());
    assert_eq!(sk_text, fs::read_to_string(b.join("secret.txt")).unwrap());
    let key = NtcfKey::from_text(&key_text).unwrap();
    assert_eq!(key.to_text(), key_text);
    let (rebuilt, td) = NtcfTrapdoor::from_text(&sk_text).unwrap();
    assert_eq!(rebuilt, key);
    assert!(td.matches(&key));

    let p = NtcfParams::desk(3);
    let printed = stdout(&ntcf(&["keygen", "--seed", "5", "--out", a.to_str().unwrap()]));
    let expected = format!("B_P (formula) = {:.6}", b_p_formula(p.q, p.n, p.m, p.kappa, p.c_t));
    assert!(printed.contains(&expected), "{printed}");
}

#[test]
fn protocol_exit_codes() {
    let dir = scratch("protocol");
    let out = dir.to_str().unwrap();
    let honest = ntcf(&["protocol", "--rounds", "20", "--seed", "1", "--out", out]);
    assert_eq!(honest.status.code(), Some(0), "{}", stdout(&honest));
    assert!(stdout(&honest).contains("accept_rate=1.0000"));
    assert!(fs::read_to_string(dir.join("transcript.txt")).unwrap().starts_with("transcript v1\n"));
    assert!(fs::read_to_string(dir.join("stats.txt")).unwrap().contains("rounds=20"));

    let cheat = ntcf(&["protocol", "--rounds", "60", "--prover", "cheat-commit", "--out", out]);
    assert_eq!(cheat.status.code(), Some(1));
    assert_eq!(ntcf(&["protocol", "--rounds", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(ntcf(&["protocol", "--transport", "pigeon", "--out", out]).status.code(), Some(2));
}

#[test]
fn socket_and_inproc_transcripts_match() {
    let a = scratch("inproc");
    let b = scratch("tcp");
    let run = |dir: &PathBuf, transport: &str| {
        let o = ntcf(&[
            "protocol",
            "--rounds",
            "6",
            "--seed",
            "3",
            "--transport",
            transport,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(dir.join("transcript.txt")).unwrap()
    };
    assert_eq!(run(&a, "inproc"), run(&b, "tcp:127.0.0.1:0"));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let a = scratch("env-a");
    let b = scratch("env-b");
    ntcf(&["keygen", "--seed", "77", "--out", a.to_str().unwrap()]);
    let o = Command::new(env!("CARGO_BIN_EXE_ntcf"))
        .args(["keygen", "--out", b.to_str().unwrap()])
        .env("NTCF_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(a.join("key.txt")).unwrap(), fs::read(b.join("key.txt")).unwrap());
}

#[test]
fn stats_table_passes_and_is_deterministic() {
    let first = ntcf(&["stats"]);
    assert_eq!(first.status.code(), Some(0));
    let text = stdout(&first);
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS")).count(), 3, "{text}");
    let zero_row = text.lines().find(|l| l.trim_start().starts_with("0 ")).unwrap();
    assert_eq!(zero_row.split_whitespace().nth(1), Some("0.000000e0"));
    assert_eq!(stdout(&ntcf(&["stats"])), text);
}

#[test]
fn reduce_paths() {
    let dir = scratch("reduce");
    let out = dir.to_str().unwrap();
    let dcp = ntcf(&["reduce", "--path", "dcp", "--seed", "2", "--out", out]);
    assert_eq!(dcp.status.code(), Some(0), "{}", stdout(&dcp));
    let text = stdout(&dcp);
    let rec = text.lines().find(|l| l.starts_with("recovered=")).unwrap();
    let plant = text.lines().find(|l| l.starts_with("planted=")).unwrap();
    assert_eq!(rec["recovered=".len()..], plant["planted=".len()..]);
    assert_eq!(ntcf(&["reduce", "--path", "edcp", "--kappa", "5", "--out", out]).status.code(), Some(0));
    assert_eq!(ntcf(&["reduce", "--corrupt", "--out", out]).status.code(), Some(1));
}

#[test]
fn oracle_compare_detects_a_mis_shift() {
    let ok = ntcf(&["oracle-compare"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("analytic"));
    assert_eq!(ntcf(&["oracle-compare", "--mis-shift"]).status.code(), Some(1));
}

#[test]
fn invalid_parameters_exit_two() {
    let o = ntcf(&["keygen", "--preset", "desk-k3", "--m", "3", "--out", scratch("bad").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(ntcf(&["keygen", "--preset", "nope"]).status.code(), Some(2));
}
