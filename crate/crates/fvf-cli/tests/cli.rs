//! Exit-code and output contract of the binary, exercised over the full
//! matrix: a verified program, a failing program, and an ill-formed file,
//! against each of the three subcommands, plus flag validation.

use std::path::PathBuf;
use std::process::Command;

use fvf_core::corpus::corpus_dir;

struct Run {
    status: i32,
    stdout: String,
    stderr: String,
}

fn fvf(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_fvf"))
        .args(args)
        .output()
        .expect("spawn fvf");
    Run {
        status: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn corpus_file(name: &str) -> String {
    corpus_dir().join(name).to_string_lossy().into_owned()
}

/// A file that cannot parse, created fresh so the corpus stays clean.
fn ill_formed() -> String {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ill_formed.fvf");
    std::fs::write(&path, "routine broken( = skip\nskip\n").expect("write fixture");
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_exit_codes_cover_the_matrix() {
    let verified = fvf(&["verify", &corpus_file("range.fvf")]);
    assert_eq!(verified.status, 0, "{}", verified.stdout);
    assert_eq!(verified.stdout, "verified: 1 routines, main ok\n");

    let failing = fvf(&["verify", &corpus_file("leak.fvf")]);
    assert_eq!(failing.status, 1);
    assert!(failing.stdout.starts_with("failed: grab\n"));
    assert!(failing.stdout.contains("leak check failed"));

    let bad = fvf(&["verify", &ill_formed()]);
    assert_eq!(bad.status, 2);
    assert!(bad.stdout.is_empty(), "diagnostics belong on stderr");
    assert!(bad.stderr.contains("expected"));
}

#[test]
fn run_exit_codes_cover_the_matrix() {
    let ok = fvf(&[
        "run",
        &corpus_file("range.fvf"),
        "--depth",
        "4",
        "--seed",
        "1",
    ]);
    assert_eq!(ok.status, 0);
    assert_eq!(ok.stdout, "ok\n");

    // Verification failures are not run failures: the leaking program
    // runs fine concretely.
    let leak = fvf(&[
        "run",
        &corpus_file("leak.fvf"),
        "--depth",
        "8",
        "--choices",
        "5,1",
    ]);
    assert_eq!(leak.status, 0);
    assert_eq!(leak.stdout, "ok\n");

    let failing = fvf(&[
        "run",
        &corpus_file("fig15.fvf"),
        "--depth",
        "2",
        "--choices",
        "43,0",
    ]);
    assert_eq!(failing.status, 1);
    assert!(failing.stdout.starts_with("failed: "));

    let bad = fvf(&["run", &ill_formed(), "--depth", "4", "--seed", "1"]);
    assert_eq!(bad.status, 2);
    assert!(bad.stdout.is_empty());
}

#[test]
fn trace_exit_codes_cover_the_matrix() {
    let ok = fvf(&["trace", &corpus_file("range.fvf"), "--routine", "range"]);
    assert_eq!(ok.status, 0);
    assert!(ok.stdout.starts_with("routine range(i, n, r)"));

    let failing = fvf(&["trace", &corpus_file("leak.fvf"), "--routine", "grab"]);
    assert_eq!(failing.status, 1);
    assert!(failing.stdout.contains("leak check failed"));

    let unknown = fvf(&["trace", &corpus_file("range.fvf"), "--routine", "nosuch"]);
    assert_eq!(unknown.status, 2);
    assert!(unknown.stderr.contains("unknown routine"));

    let bad = fvf(&["trace", &ill_formed(), "--routine", "range"]);
    assert_eq!(bad.status, 2);
}

#[test]
fn run_blocks_and_exhausts_with_exit_zero() {
    let blocked = fvf(&[
        "run",
        &corpus_file("fig2.fvf"),
        "--depth",
        "2",
        "--choices",
        "100,42,24",
    ]);
    assert_eq!(blocked.status, 0);
    assert!(blocked.stdout.starts_with("blocked: "));

    let exhausted = fvf(&[
        "run",
        &corpus_file("fig2.fvf"),
        "--depth",
        "8",
        "--choices",
        "7",
    ]);
    assert_eq!(exhausted.status, 0);
    assert!(exhausted.stdout.starts_with("script-exhausted: "));
}

#[test]
fn run_validates_its_choice_source_flags() {
    let file = corpus_file("fig2.fvf");

    let neither = fvf(&["run", &file, "--depth", "4"]);
    assert_eq!(neither.status, 2);
    assert!(neither.stderr.contains("--choices or --seed"));

    let both = fvf(&[
        "run",
        &file,
        "--depth",
        "4",
        "--choices",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(both.status, 2, "clap rejects conflicting sources");

    let orphan_trials = fvf(&["run", &file, "--depth", "4", "--trials", "3"]);
    assert_eq!(orphan_trials.status, 2, "--trials needs --seed");

    let junk = fvf(&["run", &file, "--depth", "4", "--choices", "1,x"]);
    assert_eq!(junk.status, 2);
    assert!(junk.stderr.contains("--choices"));
}

#[test]
fn seeded_trials_summarize_and_carry_replay_scripts() {
    let out = fvf(&[
        "run",
        &corpus_file("fig15.fvf"),
        "--depth",
        "4",
        "--seed",
        "3",
        "--trials",
        "2",
    ]);
    assert_eq!(out.status, 1);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert!(lines[0].starts_with("trial 0: failed: "));
    assert!(lines.last().unwrap().starts_with("trials: 2, "));

    // Each failed trial prints a script that reproduces it exactly.
    let replay = lines
        .iter()
        .find_map(|l| l.trim().strip_prefix("replay: --choices \""))
        .expect("replay line");
    let script = replay.trim_end_matches('"');
    let again = fvf(&[
        "run",
        &corpus_file("fig15.fvf"),
        "--depth",
        "4",
        "--choices",
        script,
    ]);
    assert_eq!(again.status, 1);
    assert_eq!(
        again.stdout.lines().next(),
        Some(lines[0].trim_start_matches("trial 0: "))
    );
}

#[test]
fn verify_trace_prints_routines_in_declaration_order() {
    let out = fvf(&["verify", &corpus_file("range_dispose.fvf"), "--trace"]);
    assert_eq!(out.status, 0);
    let range_at = out.stdout.find("routine range(").expect("range trace");
    let dispose_at = out.stdout.find("routine dispose(").expect("dispose trace");
    let main_at = out.stdout.find("main | ").expect("main trace");
    assert!(range_at < dispose_at && dispose_at < main_at);
    assert!(out.stdout.ends_with("verified: 2 routines, main ok\n"));
}

#[test]
fn smtlib_dir_collects_every_query() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("smt_dump");
    let _ = std::fs::remove_dir_all(&dir);
    let out = fvf(&[
        "verify",
        &corpus_file("range.fvf"),
        "--smtlib-dir",
        &dir.to_string_lossy(),
    ]);
    assert_eq!(out.status, 0);
    let names: Vec<String> = std::fs::read_dir(&dir)
        .expect("dump dir exists")
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(!names.is_empty());
    assert!(names.iter().all(|n| n.ends_with(".smt2")));
    assert!(names.iter().any(|n| n.ends_with("_proved.smt2")));
}
