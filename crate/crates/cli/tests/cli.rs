//! End-to-end runs of the binary against the bundled models: exit codes,
//! deterministic report sections, and a few full-output expectations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_preorderlab"))
}

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(rel)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

/// The report above the `---` separator; the only part runs may be compared by.
fn comparable(out: &Output) -> String {
    let text = stdout(out);
    text.split("\n---\n").next().expect("report separator").to_owned()
}

fn temp_model(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("preorderlab-{}-{name}", std::process::id()));
    std::fs::write(&path, text).expect("write temp model");
    path
}

#[test]
fn outcomes_are_exact_and_deterministic() {
    let run = || {
        bin()
            .args(["outcomes"])
            .arg(corpus("restart/t1.test"))
            .arg(corpus("restart/q2.proc"))
            .args(["--method", "derivation"])
            .output()
            .expect("run binary")
    };
    let first = run();
    let second = run();
    assert_eq!(first.status.code(), Some(0));
    let body = comparable(&first);
    assert_eq!(body, comparable(&second), "comparable section must not drift");
    assert!(body.contains("sha256:"));
    assert!(body.contains("  (1/2)\n"), "{body}");
    assert!(body.contains("  (1)"), "{body}");
    assert!(body.contains("schedulers explored: 2"), "{body}");
}

#[test]
fn parse_flags_broken_tests_but_exits_two_on_garbage() {
    let ok = bin()
        .args(["parse"])
        .arg(corpus("restart/t1.test"))
        .args(["--kind", "test"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("test shape: ok"));

    let broken = bin()
        .args(["parse"])
        .arg(corpus("bad/two.test"))
        .args(["--kind", "test"])
        .output()
        .unwrap();
    assert_eq!(broken.status.code(), Some(1));
    assert!(stdout(&broken).contains("test shape: INVALID"));

    let garbage = temp_model("garbage.test", "model test oops\nalphabet a\nstate { nope");
    let bad = bin().args(["parse"]).arg(&garbage).args(["--kind", "test"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error:"));
}

#[test]
fn compose_names_paired_states() {
    let out = bin()
        .args(["compose"])
        .arg(corpus("restart/t1.test"))
        .arg(corpus("restart/q1.proc"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let body = stdout(&out);
    assert!(body.contains("t0|q0"), "{body}");
    assert!(body.contains("success states shielded: true"), "{body}");
}

#[test]
fn prune_shields_what_compose_leaves_exposed() {
    let raw = bin()
        .args(["compose"])
        .arg(corpus("single/ta.test"))
        .arg(corpus("single/stall.proc"))
        .output()
        .unwrap();
    assert_eq!(raw.status.code(), Some(0));
    assert!(stdout(&raw).contains("success states shielded: false"), "{}", stdout(&raw));

    let cleaned = bin()
        .args(["prune"])
        .arg(corpus("single/ta.test"))
        .arg(corpus("single/stall.proc"))
        .output()
        .unwrap();
    assert_eq!(cleaned.status.code(), Some(0));
    let body = stdout(&cleaned);
    assert!(body.contains("success states shielded: true"), "{body}");
    assert!(body.contains("1 internal move(s) cleaned"), "{body}");
}

#[test]
fn compare_verdicts_drive_the_exit_code() {
    let fails = bin()
        .args(["compare"])
        .arg(corpus("refine/divL.proc"))
        .arg(corpus("refine/divC.proc"))
        .args(["--kind", "rrmust", "--method", "derivation", "--tests"])
        .arg(corpus("refine"))
        .output()
        .unwrap();
    assert_eq!(fails.status.code(), Some(1));
    let body = stdout(&fails);
    assert!(body.contains("tdiv: FAILS"), "{body}");
    assert!(body.contains("verdict: FAILS"), "{body}");

    let holds = bin()
        .args(["compare"])
        .arg(corpus("refine/divL.proc"))
        .arg(corpus("refine/divC.proc"))
        .args(["--kind", "nrmust", "--method", "derivation", "--tests"])
        .arg(corpus("refine"))
        .output()
        .unwrap();
    assert_eq!(holds.status.code(), Some(0));
    assert!(stdout(&holds).contains("verdict: holds"));
}

#[test]
fn converges_reports_both_ways() {
    let diverges = bin().args(["converges"]).arg(corpus("single/loop.proc")).output().unwrap();
    assert_eq!(diverges.status.code(), Some(1));
    assert!(stdout(&diverges).contains("DIVERGENT"));

    let fine = bin().args(["converges"]).arg(corpus("single/a.proc")).output().unwrap();
    assert_eq!(fine.status.code(), Some(0));
    assert!(stdout(&fine).contains("convergent from init main"));
}

#[test]
fn derivable_decides_convergent_inputs_exactly() {
    let model = temp_model(
        "restart-with-targets.proc",
        "model process restart\nalphabet a, c\n\
         state q0 { tau -> { 1 q1 } }\nstate q1 { tau -> { 1/2 q0, 1/2 q2 } }\n\
         state q2 { c -> { 1 qc } }\nstate qc { }\n\
         init main = { 1 q0 }\ninit settled = { 1 q2 }\ninit hidden = { 1 qc }\n",
    );
    let yes = bin().args(["derivable"]).arg(&model).args(["--to", "settled"]).output().unwrap();
    assert_eq!(yes.status.code(), Some(0));
    assert!(stdout(&yes).contains("derivable: yes"));

    // qc sits behind a visible move, out of reach of internal derivation
    let no = bin().args(["derivable"]).arg(&model).args(["--to", "hidden"]).output().unwrap();
    assert_eq!(no.status.code(), Some(1));
    assert!(stdout(&no).contains("derivable: no"));
}

#[test]
fn derivable_falls_back_to_unrolling_on_divergence() {
    let model = temp_model(
        "spinner.proc",
        "model process spinner\nalphabet a\nstate d { tau -> { 1 d } }\n\
         init main = { 1 d }\ninit same = { 1 d }\n",
    );
    // staying put is a zero-round derivation, found despite the divergence
    let lax = bin().args(["derivable"]).arg(&model).args(["--to", "same"]).output().unwrap();
    assert_eq!(lax.status.code(), Some(0));
    let body = stdout(&lax);
    assert!(body.contains("falling back to staged unrolling"), "{body}");
    assert!(body.contains("derivable: yes"), "{body}");

    // an extreme derivation may never rest on the spinning state
    let strict = bin()
        .args(["derivable"])
        .arg(&model)
        .args(["--to", "same", "--extreme", "--unroll-depth", "8"])
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("inconclusive"));
}

#[test]
fn failsim_check_and_search_agree_on_the_bundled_pair() {
    let check = bin()
        .args(["failsim", "check"])
        .arg(corpus("restart/q2.proc"))
        .arg(corpus("restart/q1.proc"))
        .arg(corpus("restart/q2q1.cand"))
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(0));
    assert!(stdout(&check).contains("q2 below q1: holds"));

    let search = bin()
        .args(["failsim", "search"])
        .arg(corpus("restart/q1.proc"))
        .arg(corpus("restart/q2.proc"))
        .args(["--depth", "2"])
        .output()
        .unwrap();
    assert_eq!(search.status.code(), Some(1));
    assert!(stdout(&search).contains("no witness within depth 2"));
}

#[test]
fn corpus_run_is_green() {
    let out = bin().args(["corpus", "run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let body = stdout(&out);
    assert!(body.contains("PASS restart-outcomes-q1"), "{body}");
    assert!(!body.contains("\nFAIL "), "{body}");
    assert!(body.contains(", 0 failed"), "{body}");
}
