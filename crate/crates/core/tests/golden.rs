//! Checked-in frames and key files. `UPDATE_GOLDEN=1` rewrites them.

use std::fs;
use std::path::PathBuf;

use ntcf::ntcf::{gen, NtcfKey, NtcfTrapdoor};
use ntcf::params::NtcfParams;
use ntcf::protocol::{frame_decode, frame_encode, Challenge, Message, Verdict};
use ntcf::zq::{BitString, ZqVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(name: &str, bytes: &[u8]) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, bytes).unwrap();
        return;
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    assert!(expected == bytes, "{name} differs from its golden file");
}

fn tiny_pair() -> (NtcfKey, NtcfTrapdoor) {
    gen(&NtcfParams::tiny_exact(), &mut ChaCha8Rng::seed_from_u64(2024)).unwrap()
}

fn messages() -> Vec<(&'static str, Message)> {
    let (key, _) = tiny_pair();
    let q = key.params.q;
    vec![
        ("key", Message::Key(key)),
        ("image", Message::Image(ZqVector::new(vec![4, 1], q).unwrap())),
        ("challenge-g", Message::Challenge(Challenge::Generation)),
        ("challenge-t", Message::Challenge(Challenge::Test)),
        ("preimage", Message::PreimageResp { b: 2, x: ZqVector::new(vec![6], q).unwrap() }),
        ("equation", Message::EquationResp { b_prime: 1, c: 0, d: BitString::new(vec![1, 0, 1]).unwrap() }),
        ("red-failure", Message::RedFailure),
        ("result-accept", Message::RoundResult { verdict: Verdict::Accept, reason: "equation holds".into() }),
        ("result-reject", Message::RoundResult { verdict: Verdict::Reject, reason: "preimage fails chk".into() }),
        ("result-retry", Message::RoundResult { verdict: Verdict::Retry, reason: "RED failure".into() }),
    ]
}

#[test]
fn frames_match_golden_files() {
    for (name, msg) in messages() {
        let bytes = frame_encode(&msg);
        check(&format!("{name}.frame"), &bytes);
        let stored = fs::read(golden_dir().join(format!("{name}.frame"))).unwrap();
        assert_eq!(frame_decode(&stored).unwrap(), msg, "{name}");
    }
}

#[test]
fn key_files_match_golden_files() {
    let (key, td) = tiny_pair();
    check("tiny-key.txt", key.to_text().as_bytes());
    check("tiny-secret.txt", td.to_text(&key).as_bytes());
    let (dkey, dtd) = gen(&NtcfParams::desk(3), &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
    check("desk-k3-key.txt", dkey.to_text().as_bytes());
    check("desk-k3-secret.txt", dtd.to_text(&dkey).as_bytes());

    let stored = fs::read_to_string(golden_dir().join("desk-k3-secret.txt")).unwrap();
    let (k2, td2) = NtcfTrapdoor::from_text(&stored).unwrap();
    assert_eq!(k2, dkey);
    assert_eq!(td2.to_text(&k2), stored);
    let stored_key = fs::read_to_string(golden_dir().join("tiny-key.txt")).unwrap();
    assert_eq!(NtcfKey::from_text(&stored_key).unwrap().to_text(), stored_key);
}
