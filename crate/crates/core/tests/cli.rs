use std::path::PathBuf;
use std::process::{Command, Output};

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name).display().to_string()
}

fn flamesmith(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flamesmith"));
    cmd.args(args).env_remove("FLAMESMITH_SEED");
    if let Some(s) = seed_env {
        cmd.env("FLAMESMITH_SEED", s);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str, contents: &str) -> String {
    let dir = std::env::temp_dir().join(format!("flamesmith-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.display().to_string()
}

#[test]
fn run_prints_result() {
    let o = flamesmith(&["run", &example("horner_indexed.wks"), "--coeffs", "1,2,3", "--x", "2"], None);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "y = 17\niterations = 3\n");
}

#[test]
fn run_accepts_negative_and_fractional_input() {
    let o = flamesmith(&["run", &example("horner.wks"), "--coeffs", "-1,1/2", "--x", "-3"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("y = -5/2\n"));
}

#[test]
fn run_with_empty_coefficients() {
    let o = flamesmith(&["run", &example("horner.wks"), "--coeffs", "", "--x", "4"], None);
    assert_eq!(stdout(&o), "y = 0\niterations = 0\n");
}

#[test]
fn trace_lists_every_iteration() {
    let o = flamesmith(&["run", &example("horner_indexed.wks"), "--coeffs", "1,2,3", "--x", "2", "--trace"], None);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[3].contains("y = 17") && lines[3].contains("k = 0"), "{lines:?}");
}

#[test]
fn corrupted_update_fails_at_runtime() {
    let o = flamesmith(
        &["run", &example("mutant_update.wks"), "--coeffs", "1,2", "--x", "1", "--check-invariants"],
        None,
    );
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("error:"));
}

#[test]
fn verify_reports_tiers() {
    let o = flamesmith(&["verify", &example("horner.wks")], None);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.matches("Proved (tier 1)").count(), 5, "{out}");
    assert!(out.ends_with("all obligations hold\n"));
}

#[test]
fn verify_falsified_exit_code() {
    let o = flamesmith(&["verify", &example("mutant_init.wks")], None);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("initialization: Falsified (tier 2) at {"), "{out}");
    assert!(out.contains("counterexample replayed"));
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let wks = example("mutant_update.wks");
    let by_flag = stdout(&flamesmith(&["verify", &wks, "--seed", "5"], None));
    let by_env = stdout(&flamesmith(&["verify", &wks], Some("5")));
    assert_eq!(by_flag, by_env);
    let both = stdout(&flamesmith(&["verify", &wks, "--seed", "3"], Some("5")));
    assert_eq!(both, stdout(&flamesmith(&["verify", &wks, "--seed", "3"], None)));
    assert_ne!(both, by_env);
}

#[test]
fn trials_flag_appears_in_verdicts() {
    // A nonlinear guard equivalent to `0 < k` is beyond the bounds prover.
    let text = std::fs::read_to_string(example("horner_indexed.wks")).unwrap();
    let squared: String = text
        .lines()
        .map(|l| if l.starts_with("guard ") { "guard 3 given: 0 < k * k" } else { l })
        .map(|l| format!("{l}\n"))
        .collect();
    let path = scratch("squared.wks", &squared);
    let o = flamesmith(&["verify", &path, "--trials", "250"], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("Tested (tier 2, 250 trials, seed 42)"), "{}", stdout(&o));
}

#[test]
fn parse_errors_exit_2() {
    let bad = scratch("bad.spec", "op p\nvar y : scalar, out\npost: y = = 1\n");
    let o = flamesmith(&["invariants", &bad], None);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));

    let wks = scratch("bad.wks", "not a worksheet\n");
    assert_eq!(code(&flamesmith(&["verify", &wks], None)), 2);
    assert_eq!(code(&flamesmith(&["render", &example("missing.wks")], None)), 2);
    assert_eq!(code(&flamesmith(&["frobnicate"], None)), 2);
}

#[test]
fn semantic_errors_exit_2() {
    let undeclared = scratch("undeclared.spec", "op p\nvar y : scalar, out\npre: 0 <= n\npost: y = q\n");
    assert_eq!(code(&flamesmith(&["invariants", &undeclared], None)), 2);
}

#[test]
fn open_worksheet_is_incomplete() {
    let text = std::fs::read_to_string(example("horner_indexed.wks")).unwrap();
    let open: String = text.lines().filter(|l| !l.starts_with("update ")).map(|l| format!("{l}\n")).collect();
    let path = scratch("open.wks", &open);
    let o = flamesmith(&["verify", &path], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("update"));
}

#[test]
fn derivation_failures_exit_3() {
    let spec = example("polyeval.spec");
    let o = flamesmith(&["derive", &spec, "--invariant", "7"], None);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("non-vacuity"), "{}", stderr(&o));
    assert_eq!(code(&flamesmith(&["derive", &spec, "--invariant", "42"], None)), 3);

    let product = scratch(
        "product.spec",
        "op p\nvar y : scalar, out\nvar a : vector(n), in\npre: 0 <= n\npost: y = a[0] * a[1]\n",
    );
    assert_eq!(code(&flamesmith(&["invariants", &product], None)), 3);
}

#[test]
fn derive_writes_worksheet_file() {
    let dir = std::env::temp_dir().join(format!("flamesmith-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("h.wks").display().to_string();
    let o = flamesmith(&["derive", &example("polyeval.spec"), "--invariant", "5", "-o", &path], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with(&format!("wrote {path}\n")));
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("flamesmith-worksheet 1\n"));
    let o = flamesmith(&["run", &path, "--coeffs", "2,0,1", "--x", "3"], None);
    assert_eq!(stdout(&o), "y = 11\niterations = 3\n");
}

#[test]
fn shipped_worksheets_are_current() {
    for (mode, file) in [("flame", "horner.wks"), ("indexed", "horner_indexed.wks")] {
        let o = flamesmith(&["derive", &example("polyeval.spec"), "--invariant", "5", "--mode", mode], None);
        assert_eq!(stdout(&o), std::fs::read_to_string(example(file)).unwrap(), "{file}");
    }
}

#[test]
fn render_formats() {
    let wks = example("horner.wks");
    let latex = stdout(&flamesmith(&["render", &wks, "--format", "latex"], None));
    assert!(latex.starts_with("\\documentclass{article}"));
    assert!(latex.contains("$\\psi := \\alpha_1 + \\psi \\cdot \\chi$"), "{latex}");
    assert!(latex.contains("\\text{ repartition }"), "{latex}");
    assert!(latex.is_ascii(), "non-ASCII in LaTeX output");
    let md = stdout(&flamesmith(&["render", &wks, "--format", "markdown"], None));
    assert!(md.contains("| 8 |"));
    let text = stdout(&flamesmith(&["render", &wks], None));
    assert!(text.contains("ψ := α_1 + ψ·χ"));
}

#[test]
fn cost_of_unsupported_update_exits_3() {
    let text = std::fs::read_to_string(example("horner_indexed.wks")).unwrap();
    let swapped: String = text
        .lines()
        .filter(|l| !l.starts_with("cost-") && !l.starts_with("check "))
        .map(|l| if l.starts_with("update ") { "update 8 given: y := a[k - 1] + y * x^k".to_string() } else { l.to_string() })
        .map(|l| format!("{l}\n"))
        .collect();
    let path = scratch("pow.wks", &swapped);
    assert_eq!(code(&flamesmith(&["cost", &path], None)), 3);
}

#[test]
fn derive_all_table() {
    let o = flamesmith(&["derive-all", &example("polyeval.spec"), "--mode", "indexed"], None);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 7);
    assert!(out.lines().nth(5).unwrap().contains("y := a[k - 1] + y * x"));
    assert!(out.lines().nth(5).unwrap().contains("2*k"));
}
