use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn quillmate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quillmate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn batch(dir: &Path, input: &str, sample: &str, output: &str) -> Output {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    quillmate(&["batch", "--input", &p(input), "--sample", &p(sample), "--output", &p(output)])
}

/// `[RW:xxxxxxxx]` followed by the selection, where the hash is the first
/// four bytes of SHA-256 over the style markdown and the selection joined
/// by U+001F.
fn expected_rewrite(style_md: &str, selection: &str) -> String {
    let digest = Sha256::digest(format!("{style_md}\u{1f}{selection}").as_bytes());
    format!("[RW:{}]{selection}", hex::encode(&digest[..4]))
}

#[test]
fn batch_rewrites_under_the_sample_style() {
    let dir = tempfile::tempdir().unwrap();
    let input = "We met at noon.\nThe talk ran long!";
    std::fs::write(dir.path().join("input.txt"), input).unwrap();
    std::fs::write(dir.path().join("sample.txt"), "I write short lines. Then longer ones follow them.").unwrap();

    let out = batch(dir.path(), "input.txt", "sample.txt", "out.txt");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let style = std::fs::read_to_string(dir.path().join("out.txt.style.md")).unwrap();
    // 4 + 5 words over 2 sentences
    assert!(style.contains("avg_sentence_len=4.5)"), "{style}");
    let rewritten = std::fs::read_to_string(dir.path().join("out.txt")).unwrap();
    assert_eq!(rewritten, expected_rewrite(&style, input));

    let again = batch(dir.path(), "input.txt", "sample.txt", "out2.txt");
    assert!(again.status.success());
    assert_eq!(std::fs::read(dir.path().join("out.txt")).unwrap(), std::fs::read(dir.path().join("out2.txt")).unwrap());
    assert_eq!(style, std::fs::read_to_string(dir.path().join("out2.txt.style.md")).unwrap());
}

#[test]
fn unreadable_sample_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("input.txt"), "text").unwrap();
    let out = batch(dir.path(), "input.txt", "missing.txt", "out.txt");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[ReadFailed]"));
    assert!(!dir.path().join("out.txt").exists());
    assert!(!dir.path().join("out.txt.style.md").exists());
}

#[test]
fn replay_without_fixtures_is_a_provider_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("input.txt"), "text").unwrap();
    std::fs::write(dir.path().join("sample.txt"), "A sample.").unwrap();
    let fixtures = dir.path().join("fixtures");
    std::fs::create_dir(&fixtures).unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = quillmate(&[
        "batch",
        "--input",
        &p("input.txt"),
        "--sample",
        &p("sample.txt"),
        "--output",
        &p("out.txt"),
        "--provider",
        "replay",
        "--fixtures",
        fixtures.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out.txt").exists());
}

#[test]
fn replay_fixtures_reports_rejected_files() {
    let dir = tempfile::tempdir().unwrap();
    let ok = quillmate(&["replay-fixtures", "--fixtures", dir.path().to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("0 fixtures loaded, 0 rejected"));

    std::fs::write(dir.path().join("bogus.json"), "{not json").unwrap();
    let bad = quillmate(&["replay-fixtures", "--fixtures", dir.path().to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("0 fixtures loaded, 1 rejected"));
}
