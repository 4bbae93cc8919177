//! The acceptance criteria. Runs without the libtest harness so that each
//! criterion always prints its own PASS or FAIL line.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num::BigRational;

use flamesmith::dsl::{parse_expr, parse_predicate, parse_spec, parse_stmt};
use flamesmith::interp::{admits, input_state, nested_form, run, Inputs, RunError};
use flamesmith::invariants::{enumerate_invariants, Mode, Rejection, Validity};
use flamesmith::normal::{normalize_in, Sizes};
use flamesmith::predicate::Predicate;
use flamesmith::render::{render, Format};
use flamesmith::sample::{TrialConfig, Verdict};
use flamesmith::spec::OperationSpec;
use flamesmith::state::{rat, State};
use flamesmith::stmt::{Side, Stmt};
use flamesmith::verify::{replay, verify, Obligation};
use flamesmith::wks::parse_wks;
use flamesmith::worksheet::{derive, normalized_update, Worksheet};
use flamesmith::wp::{wp, wp_normalized};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name).display().to_string()
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_flamesmith"))
        .args(args)
        .env_remove("FLAMESMITH_SEED")
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<String, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))?;
    Ok(format!("{:.2} s", t.as_secs_f64()))
}

fn polyeval() -> OperationSpec {
    parse_spec(&std::fs::read_to_string(example("polyeval.spec")).unwrap()).unwrap()
}

fn sizes() -> Sizes {
    Sizes::new().with("a", "n")
}

fn norm(p: &str) -> Predicate {
    parse_predicate(p).unwrap().normalize_in(&sizes())
}

/// Conjuncts as an unordered set, so that conjunct order does not matter.
fn conjunct_set(p: &Predicate) -> BTreeSet<String> {
    p.conjuncts.iter().map(|a| format!("{a:?}")).collect()
}

fn update_matches(ws: &Worksheet, target: &str, expr: &str) -> bool {
    let expected = vec![(target.to_string(), normalize_in(&parse_expr(expr).unwrap(), &ws.sizes()))];
    normalized_update(ws).as_ref() == Some(&expected)
}

/// `Σ a_i x^i` by explicit powers.
fn reference_value(a: &[BigRational], x: &BigRational) -> BigRational {
    a.iter().enumerate().map(|(i, c)| c * num::pow(x.clone(), i)).sum()
}

fn derive_from_cli(mode: &str) -> Result<Worksheet, String> {
    let out = cli(&["derive", &example("polyeval.spec"), "--invariant", "5", "--mode", mode]);
    ensure(out.code == 0, || format!("exit {}: {}", out.code, out.stderr))?;
    parse_wks(&out.stdout).map_err(|e| e.to_string())
}

fn horner_indexed() -> Outcome {
    let start = Instant::now();
    let ws = derive_from_cli("indexed")?;
    ensure(ws.guard.as_ref().map(|g| g.normalize_in(&sizes())) == Some(norm("k > 0")), || {
        format!("guard {:?}", ws.guard)
    })?;
    ensure(ws.init == Some(parse_stmt("y := 0; k := n").unwrap()), || format!("init {:?}", ws.init))?;
    let step = ws.traversal.as_ref().map(|t| t.1.clone());
    ensure(step == Some(parse_stmt("k := k - 1").unwrap()), || format!("index update {step:?}"))?;
    ensure(update_matches(&ws, "y", "a[k - 1] + y * x"), || format!("update {:?}", ws.update))?;
    within(start, Duration::from_secs(5))
}

fn horner_flame() -> Outcome {
    let start = Instant::now();
    let ws = derive_from_cli("flame")?;
    ensure(ws.guard == Some(parse_predicate("len(a.B) < len(a)").unwrap()), || format!("guard {:?}", ws.guard))?;
    ensure(ws.init == Some(parse_stmt("y := 0; partition a empty-bottom").unwrap()), || {
        format!("init {:?}", ws.init)
    })?;
    let first = ws.traversal.as_ref().map(|t| t.0.clone());
    ensure(first == Some(Stmt::Repartition { vector: "a".into(), from: Side::Bottom }), || {
        format!("repartition {first:?}")
    })?;
    ensure(update_matches(&ws, "y", "a.1 + y * x"), || format!("update {:?}", ws.update))?;
    let text = render(&ws, Format::Text);
    for line in ["ψ := 0", "(a_0; α_1; a_2)", "ψ := α_1 + ψ·χ", "while m(a_B) < m(a) do"] {
        ensure(text.contains(line), || format!("rendering lacks `{line}`"))?;
    }
    within(start, Duration::from_secs(5))
}

fn invariant_family() -> Outcome {
    let cands = enumerate_invariants(&polyeval(), Mode::Indexed).map_err(|e| e.to_string())?;
    let left = "y = sum(i, 0, k - 1, a[i] * x^i)";
    let right = "y = sum(i, k, n - 1, a[i] * x^i)";
    let range = "0 <= k && k <= n";
    let rows = [
        format!("{left} && {range}"),
        format!("{right} && {range}"),
        format!("{left} && z = x^k && {range}"),
        format!("{right} && z = x^k && {range}"),
        format!("y = sum(i, k, n - 1, a[i] * x^(i - k)) && {range}"),
    ];
    for (i, row) in rows.iter().enumerate() {
        let c = cands.iter().find(|c| c.id == i + 1).ok_or_else(|| format!("no candidate {}", i + 1))?;
        ensure(c.is_valid(), || format!("candidate {} is {:?}", c.id, c.validity))?;
        let got = conjunct_set(&c.predicate.normalize_in(&sizes()));
        ensure(got == conjunct_set(&norm(row)), || format!("candidate {} differs from `{row}`", c.id))?;
    }
    for id in [1, 3] {
        ensure(cands[id - 1].repair.is_some(), || format!("candidate {id} carries no repair note"))?;
    }
    let valid = cands.iter().filter(|c| c.is_valid()).count();
    ensure(valid >= 5, || format!("{valid} valid candidates"))?;
    ensure(cands.iter().any(|c| c.validity == Validity::Rejected(Rejection::NonVacuity)), || {
        "no candidate rejected for non-vacuity".into()
    })?;
    let out = cli(&["invariants", &example("polyeval.spec")]);
    ensure(out.code == 0 && out.stdout.contains("non-vacuity"), || out.stdout.clone())?;
    Ok(format!("{valid} valid, {} rejected", cands.len() - valid))
}

fn family_correctness() -> Outcome {
    let start = Instant::now();
    let out = cli(&["derive-all", &example("polyeval.spec")]);
    ensure(out.code == 0, || format!("exit {}: {}{}", out.code, out.stdout, out.stderr))?;
    let spec = polyeval();
    let mut derived = 0;
    for mode in [Mode::Indexed, Mode::Flame] {
        for c in enumerate_invariants(&spec, mode).unwrap().iter().filter(|c| c.is_valid()) {
            let ws = derive(&spec, mode, c.id).map_err(|e| format!("{mode:?} {}: {e}", c.id))?.worksheet;
            let mut checked = 0;
            for (a, x) in Inputs::new(42) {
                if checked == 1000 {
                    break;
                }
                let input = input_state(&spec, &a, &x);
                if !admits(&ws, &input) {
                    continue;
                }
                checked += 1;
                let got = run(&ws, &input, false).map_err(|e| format!("{mode:?} {}: {e}", c.id))?;
                let y = got.state.get("y").cloned().unwrap_or_default();
                ensure(y == reference_value(&a, &x), || format!("{mode:?} {} wrong on {a:?}, x = {x}", c.id))?;
            }
            derived += 1;
        }
    }
    ensure(derived == 12, || format!("{derived} derivations"))?;
    let summary = within(start, Duration::from_secs(60))?;
    Ok(format!("{derived} algorithms x 1000 inputs, {summary}"))
}

fn wp_suite() -> Outcome {
    let inv = parse_predicate("y = sum(i, k, n - 1, a[i] * x^(i - k)) && 0 <= k && k <= n").unwrap();
    let step = wp_normalized(&parse_stmt("k := k - 1").unwrap(), &inv, &sizes()).map_err(|e| e.to_string())?;
    let expected = norm("y = a[k - 1] + sum(i, k, n - 1, a[i] * x^(i - k)) * x && 1 <= k && k <= n + 1");
    ensure(step == expected, || format!("wp(k := k - 1) = {step:?}"))?;
    let init = wp(&parse_stmt("y, k := e0, e1").unwrap(), &inv).map_err(|e| e.to_string())?;
    let expected = parse_predicate("e0 = sum(i, e1, n - 1, a[i] * x^(i - e1)) && 0 <= e1 && e1 <= n").unwrap();
    ensure(init == expected, || format!("wp(y, k := e0, e1) = {init:?}"))?;
    Ok("index step and simultaneous initialization".into())
}

fn cost() -> Outcome {
    let out = cli(&["cost", &example("horner.wks")]);
    ensure(out.code == 0, || format!("exit {}: {}", out.code, out.stderr))?;
    for line in [
        "recurrence:     C_0 = 0, C_{k+1} = C_k + 2",
        "closed form:    C_k = 2·k",
        "cost invariant: C = 2·m(a_B)",
        "total cost:     2·m(a)",
    ] {
        ensure(out.stdout.lines().any(|l| l == line), || format!("missing `{line}` in\n{}", out.stdout))?;
    }
    let rows: Vec<(u64, u64)> = out
        .stdout
        .lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some((it.next()?.parse().ok()?, it.next()?.parse().ok()?))
        })
        .collect();
    ensure(rows.len() == 65, || format!("{} measured rows", rows.len()))?;
    for (i, (n, c)) in rows.iter().enumerate() {
        ensure(*n == i as u64 && *c == 2 * n, || format!("n = {n}: counted {c}"))?;
    }
    Ok("C = 2n for n in 0..=64".into())
}

fn falsification() -> Outcome {
    let mutants = [
        ("mutant_update.wks", Obligation::Preservation),
        ("mutant_guard.wks", Obligation::Preservation),
        ("mutant_init.wks", Obligation::Initialization),
        ("mutant_counter.wks", Obligation::Cost),
        ("mutant_exit.wks", Obligation::Exit),
    ];
    for (file, expected) in mutants {
        let ws = parse_wks(&std::fs::read_to_string(example(file)).unwrap()).map_err(|e| format!("{file}: {e}"))?;
        let report = verify(&ws, &TrialConfig::new(1000, 42)).map_err(|e| e.to_string())?;
        let check = report.get(expected).ok_or_else(|| format!("{file}: no {} check", expected.name()))?;
        let Verdict::Falsified { counterexample } = &check.verdict else {
            return Err(format!("{file}: {check}"));
        };
        ensure(replay(&ws, expected, counterexample), || format!("{file}: counterexample does not replay"))?;
        let out = cli(&["verify", &example(file)]);
        ensure(out.code == 1 && out.stdout.contains("Falsified"), || format!("{file}: exit {}", out.code))?;
    }
    Ok("5 of 5 mutants falsified and replayed".into())
}

fn runtime_checking() -> Outcome {
    let spec = polyeval();
    let mut sheets = Vec::new();
    for mode in [Mode::Indexed, Mode::Flame] {
        for c in enumerate_invariants(&spec, mode).unwrap().iter().filter(|c| c.is_valid()) {
            sheets.push(derive(&spec, mode, c.id).unwrap().worksheet);
        }
    }
    for file in ["horner.wks", "horner_indexed.wks"] {
        sheets.push(parse_wks(&std::fs::read_to_string(example(file)).unwrap()).unwrap());
    }
    for ws in &sheets {
        let inputs = Inputs::new(7).map(|(a, x)| input_state(&ws.spec, &a, &x)).filter(|s| admits(ws, s));
        for input in inputs.take(1000) {
            match run(ws, &input, true) {
                Err(e @ RunError::InvariantViolation { .. }) => return Err(e.to_string()),
                Err(e) => return Err(format!("{e} on {input}")),
                Ok(_) => {}
            }
        }
    }
    let out = cli(&["run", &example("horner.wks"), "--coeffs", "1,2,3", "--x", "2", "--check-invariants"]);
    ensure(out.code == 0 && out.stdout.starts_with("y = 17\n"), || out.stdout.clone())?;
    for (a, x) in Inputs::new(11).take(1000) {
        let mut s = State::new();
        s.bind_vector("a", None, a.clone());
        s.set("x", x.clone());
        let v = s.evaluate(&nested_form("a", a.len(), "x")).map_err(|e| e.to_string())?;
        ensure(v == reference_value(&a, &x), || format!("nested form differs at {a:?}, x = {x}"))?;
    }
    ensure(reference_value(&[rat(1), rat(2), rat(3)], &rat(2)) == rat(17), || "reference".into())?;
    Ok(format!("{} worksheets x 1000 inputs, nested form x 1000", sheets.len()))
}

fn determinism() -> Outcome {
    let spec = example("polyeval.spec");
    let horner = example("horner.wks");
    let mutant = example("mutant_update.wks");
    let commands: Vec<Vec<&str>> = vec![
        vec!["invariants", &spec, "--mode", "flame"],
        vec!["derive", &spec, "--invariant", "4", "--seed", "9", "--trials", "300"],
        vec!["derive", &spec, "--invariant", "5", "--mode", "flame"],
        vec!["verify", &mutant, "--seed", "3"],
        vec!["verify", &horner],
        vec!["run", &horner, "--coeffs", "3,-1,4", "--x", "-2", "--trace", "--check-invariants"],
        vec!["cost", &horner, "--max-n", "16"],
        vec!["render", &horner, "--format", "latex"],
        vec!["render", &horner, "--format", "markdown"],
        vec!["derive-all", &spec, "--mode", "flame"],
    ];
    for args in &commands {
        let a = cli(args);
        let b = cli(args);
        ensure(a.stdout == b.stdout && a.code == b.code, || format!("`{}` differs between runs", args.join(" ")))?;
        ensure(!a.stdout.is_empty(), || format!("`{}` printed nothing", args.join(" ")))?;
    }
    Ok(format!("{} commands run twice", commands.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("Horner reproduction, indexed", horner_indexed),
        ("Horner reproduction, flame", horner_flame),
        ("invariant family", invariant_family),
        ("family correctness", family_correctness),
        ("wp unit suite", wp_suite),
        ("cost", cost),
        ("falsification power", falsification),
        ("runtime invariant checking", runtime_checking),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
