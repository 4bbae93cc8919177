//! The `flamesmith` command line.
//!
//! Results go to `out`, diagnostics to `err`. Exit codes: 0 success, 1 a
//! falsified obligation or an oracle mismatch, 2 a parse or semantic error,
//! 3 a derivation failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use num::BigRational;

use crate::cost::{prove_cost, CostError};
use crate::dsl::parse_spec;
use crate::interp::{cross_check, input_state, run, RunError};
use crate::invariants::{enumerate_invariants, Mode, Validity};
use crate::par::{map_slice, Strategy};
use crate::print::{Notation, Printer};
use crate::render::{render, Format};
use crate::sample::{TrialConfig, Verdict, DEFAULT_SEED, DEFAULT_TRIALS};
use crate::spec::OperationSpec;
use crate::state::format_rational;
use crate::stmt::COUNTER;
use crate::verify::{replay, verify, Report};
use crate::wks::{parse_wks, render_wks};
use crate::worksheet::{derive, Worksheet};

pub const SUCCESS: i32 = 0;
pub const FALSIFIED: i32 = 1;
pub const INPUT_ERROR: i32 = 2;
pub const DERIVATION_FAILURE: i32 = 3;

/// Inputs drawn by `derive-all` for the oracle cross-check.
pub const CROSS_CHECK_INPUTS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "flamesmith", version, about = "Derive loop algorithms and their proofs from specifications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Indexed,
    Flame,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Indexed => Mode::Indexed,
            ModeArg::Flame => Mode::Flame,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Latex,
    Markdown,
}

#[derive(Debug, clap::Args)]
struct Trials {
    /// Seed for randomized checks.
    #[arg(long, env = "FLAMESMITH_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random trials per obligation.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
}

impl Trials {
    fn config(&self) -> TrialConfig {
        TrialConfig::new(self.trials, self.seed)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List candidate loop invariants.
    Invariants {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "indexed")]
        mode: ModeArg,
    },
    /// Derive and check the worksheet for one invariant.
    Derive {
        spec: PathBuf,
        #[arg(long)]
        invariant: usize,
        #[arg(long, value_enum, default_value = "indexed")]
        mode: ModeArg,
        #[command(flatten)]
        trials: Trials,
        /// Write the worksheet here instead of standard output.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Check the proof obligations of a worksheet.
    Verify {
        worksheet: PathBuf,
        #[command(flatten)]
        trials: Trials,
    },
    /// Execute a worksheet on one input.
    Run {
        worksheet: PathBuf,
        /// Comma-separated coefficients, integers or fractions like `1/2`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coeffs: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        check_invariants: bool,
        #[arg(long)]
        trace: bool,
    },
    /// Derive, prove and measure the operation count.
    Cost {
        worksheet: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_n: usize,
        #[command(flatten)]
        trials: Trials,
    },
    /// Lay out a worksheet for reading.
    Render {
        worksheet: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Derive every valid invariant and check each result against the oracle.
    DeriveAll {
        spec: PathBuf,
        /// Both modes when omitted.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, env = "FLAMESMITH_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// A failed command: the exit code and the message for standard error.
struct Failure(i32, String);

impl Failure {
    fn input(msg: impl std::fmt::Display) -> Failure {
        Failure(INPUT_ERROR, msg.to_string())
    }

    fn derivation(msg: impl std::fmt::Display) -> Failure {
        Failure(DERIVATION_FAILURE, msg.to_string())
    }
}

/// What a command printed and how it ended.
struct Outcome {
    text: String,
    code: i32,
}

impl Outcome {
    fn ok(text: String) -> Outcome {
        Outcome { text, code: SUCCESS }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<OperationSpec, Failure> {
    parse_spec(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_worksheet(path: &Path) -> Result<Worksheet, Failure> {
    parse_wks(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn ascii() -> Printer {
    Printer::new(Notation::Ascii)
}

fn invariants(spec: &Path, mode: Mode) -> Result<Outcome, Failure> {
    let spec = load_spec(spec)?;
    let cands = enumerate_invariants(&spec, mode).map_err(Failure::derivation)?;
    let p = ascii();
    let mut out = String::new();
    writeln!(out, "candidate invariants for {} ({} mode)", spec.name, mode.keyword()).unwrap();
    for c in &cands {
        writeln!(out, "{:>2}  {:<9}  {}", c.id, status_word(&c.validity), p.predicate(&c.predicate)).unwrap();
        writeln!(out, "    {}", c.label).unwrap();
        if let Validity::Rejected(r) = &c.validity {
            writeln!(out, "    reason: {r}").unwrap();
        }
        for (v, e) in &c.auxiliaries {
            writeln!(out, "    auxiliary {v} = {}", p.expr(e)).unwrap();
        }
        if let Some(r) = &c.repair {
            writeln!(out, "    repair: {r}").unwrap();
        }
    }
    Ok(Outcome::ok(out))
}

fn status_word(v: &Validity) -> &'static str {
    match v {
        Validity::Valid => "valid",
        Validity::Rejected(_) => "rejected",
    }
}

fn report_lines(out: &mut String, ws: &Worksheet, report: &Report) -> bool {
    let mut ok = true;
    for c in &report.checks {
        writeln!(out, "{:<15} {}", format!("{}:", c.obligation.name()), c.verdict).unwrap();
        if let Verdict::Falsified { counterexample } = &c.verdict {
            ok = false;
            let replayed = replay(ws, c.obligation, counterexample);
            writeln!(out, "{:<15} counterexample {}", "", if replayed { "replayed" } else { "did not replay" }).unwrap();
        }
    }
    ok
}

fn derive_cmd(spec: &Path, id: usize, mode: Mode, cfg: &TrialConfig, output: Option<&Path>) -> Result<Outcome, Failure> {
    let spec = load_spec(spec)?;
    let d = derive(&spec, mode, id).map_err(Failure::derivation)?;
    let ws = crate::cost::instrument(&d.worksheet).unwrap_or(d.worksheet);
    let report = verify(&ws, cfg).map_err(Failure::derivation)?;
    let wks = render_wks(&ws, Some(&report));
    let code = if report.checks.iter().any(|c| c.verdict.is_falsified()) { FALSIFIED } else { SUCCESS };
    match output {
        Some(path) => {
            std::fs::write(path, &wks).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let mut text = format!("wrote {}\n", path.display());
            report_lines(&mut text, &ws, &report);
            Ok(Outcome { text, code })
        }
        None => Ok(Outcome { text: wks, code }),
    }
}

fn verify_cmd(path: &Path, cfg: &TrialConfig) -> Result<Outcome, Failure> {
    let ws = load_worksheet(path)?;
    let report = verify(&ws, cfg).map_err(Failure::input)?;
    let mut text = String::new();
    let ok = report_lines(&mut text, &ws, &report);
    writeln!(text, "{}", if report.all_hold() { "all obligations hold" } else { "some obligations do not hold" }).unwrap();
    Ok(Outcome { text, code: if ok { SUCCESS } else { FALSIFIED } })
}

fn parse_rational(s: &str) -> Result<BigRational, Failure> {
    BigRational::from_str(s.trim()).map_err(|_| Failure::input(format!("`{s}` is not a number")))
}

fn run_cmd(path: &Path, coeffs: &[String], x: &str, check: bool, trace: bool) -> Result<Outcome, Failure> {
    let ws = load_worksheet(path)?;
    let coeffs = coeffs
        .iter()
        .filter(|c| !c.trim().is_empty())
        .map(|c| parse_rational(c))
        .collect::<Result<Vec<_>, _>>()?;
    let input = input_state(&ws.spec, &coeffs, &parse_rational(x)?);
    let out_name = ws.spec.output().to_string();
    match run(&ws, &input, check) {
        Ok(r) => {
            let mut text = String::new();
            if trace {
                for (i, s) in r.trace.iter().enumerate() {
                    writeln!(text, "{i:>3}  {s}").unwrap();
                }
            }
            let value = r.state.get(&out_name).map(format_rational).unwrap_or_else(|| "0".into());
            writeln!(text, "{out_name} = {value}").unwrap();
            writeln!(text, "iterations = {}", r.iterations).unwrap();
            Ok(Outcome::ok(text))
        }
        Err(RunError::Incomplete(missing)) => Err(Failure::input(format!(
            "worksheet is incomplete; missing: {}",
            missing.iter().map(|s| s.keyword()).collect::<Vec<_>>().join(", ")
        ))),
        Err(e @ RunError::InvariantViolation { .. }) => Err(Failure(FALSIFIED, e.to_string())),
        Err(e) => Err(Failure(FALSIFIED, e.to_string())),
    }
}

fn cost_cmd(path: &Path, max_n: usize, cfg: &TrialConfig) -> Result<Outcome, Failure> {
    let ws = load_worksheet(path)?;
    let r = match prove_cost(&ws, cfg, max_n) {
        Ok(r) => r,
        Err(CostError::Incomplete) => return Err(Failure::input(CostError::Incomplete)),
        Err(e @ CostError::UnsupportedRecurrence(_)) => return Err(Failure::derivation(e)),
        Err(e) => return Err(Failure(FALSIFIED, e.to_string())),
    };
    let p = Printer::new(Notation::Unicode);
    let mut text = String::new();
    writeln!(
        text,
        "recurrence:     {c}_0 = {}, {c}_{{k+1}} = {c}_k + {}",
        r.recurrence.initial,
        r.recurrence.increment,
        c = COUNTER
    )
    .unwrap();
    writeln!(text, "closed form:    {}_k = {}", COUNTER, p.expr(&r.closed_form)).unwrap();
    writeln!(text, "cost invariant: {}", p.predicate(&r.cost_invariant)).unwrap();
    writeln!(text, "total cost:     {}", p.expr(&r.total_cost)).unwrap();
    for c in &r.verification {
        writeln!(text, "{:<15} {}", format!("{}:", c.obligation.name()), c.verdict).unwrap();
    }
    writeln!(text, "\n{:>4}  {:>6}", "n", COUNTER).unwrap();
    for (n, c) in &r.runtime_counts {
        writeln!(text, "{n:>4}  {:>6}", format_rational(c)).unwrap();
    }
    Ok(Outcome::ok(text))
}

fn render_cmd(path: &Path, format: FormatArg) -> Result<Outcome, Failure> {
    let ws = load_worksheet(path)?;
    let format = match format {
        FormatArg::Text => Format::Text,
        FormatArg::Latex => Format::Latex,
        FormatArg::Markdown => Format::Markdown,
    };
    Ok(Outcome::ok(render(&ws, format)))
}

/// One row of the `derive-all` table.
struct Row {
    mode: Mode,
    id: usize,
    result: Result<RowData, String>,
}

struct RowData {
    guard: String,
    update: String,
    cost: String,
    inputs: usize,
    excluded: usize,
    mismatches: usize,
}

fn derive_row(spec: &OperationSpec, mode: Mode, id: usize, seed: u64) -> Row {
    let result = derive(spec, mode, id).map_err(|e| e.to_string()).map(|d| {
        let ws = d.worksheet;
        let p = ascii();
        let cost = match crate::cost::instrument(&ws) {
            Ok(inst) => {
                let c = inst.cost_increment.as_ref().map(|e| p.expr(e)).unwrap_or_default();
                format!("{c}*k")
            }
            Err(_) => "not constant per step".to_string(),
        };
        let cc = cross_check(&ws, seed, CROSS_CHECK_INPUTS, false);
        RowData {
            guard: ws.guard.as_ref().map(|g| p.predicate(g)).unwrap_or_default(),
            update: ws.update.as_ref().map(|u| p.stmt(u)).unwrap_or_default(),
            cost,
            inputs: cc.inputs,
            excluded: cc.excluded,
            mismatches: cc.mismatches.len(),
        }
    });
    Row { mode, id, result }
}

fn derive_all(spec: &Path, modes: &[Mode], seed: u64) -> Result<Outcome, Failure> {
    let spec = load_spec(spec)?;
    let mut jobs = Vec::new();
    for &mode in modes {
        let cands = enumerate_invariants(&spec, mode).map_err(Failure::derivation)?;
        jobs.extend(cands.iter().filter(|c| c.is_valid()).map(|c| (mode, c.id)));
    }
    let rows = map_slice(&jobs, Strategy::default(), |&(mode, id)| derive_row(&spec, mode, id, seed));
    let mut text = String::new();
    writeln!(text, "{:<8} {:>2}  {:<16} {:<40} {:<22} oracle", "mode", "id", "guard", "update", "cost").unwrap();
    let mut code = SUCCESS;
    for Row { mode, id, result } in &rows {
        match result {
            Ok(r) => {
                let oracle = if r.mismatches == 0 {
                    format!("{}/{} match", r.inputs, r.inputs)
                } else {
                    code = code.max(FALSIFIED);
                    format!("{} mismatches in {}", r.mismatches, r.inputs)
                };
                let oracle = if r.excluded > 0 {
                    format!("{oracle} ({} excluded by side conditions)", r.excluded)
                } else {
                    oracle
                };
                writeln!(text, "{:<8} {id:>2}  {:<16} {:<40} {:<22} {oracle}", mode.keyword(), r.guard, r.update, r.cost)
                    .unwrap();
            }
            Err(e) => {
                code = DERIVATION_FAILURE;
                writeln!(text, "{:<8} {id:>2}  derivation failed: {e}", mode.keyword()).unwrap();
            }
        }
    }
    Ok(Outcome { text, code })
}

fn dispatch(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Invariants { spec, mode } => invariants(&spec, mode.into()),
        Command::Derive { spec, invariant, mode, trials, output } => {
            derive_cmd(&spec, invariant, mode.into(), &trials.config(), output.as_deref())
        }
        Command::Verify { worksheet, trials } => verify_cmd(&worksheet, &trials.config()),
        Command::Run { worksheet, coeffs, x, check_invariants, trace } => {
            run_cmd(&worksheet, &coeffs, &x, check_invariants, trace)
        }
        Command::Cost { worksheet, max_n, trials } => cost_cmd(&worksheet, max_n, &trials.config()),
        Command::Render { worksheet, format } => render_cmd(&worksheet, format),
        Command::DeriveAll { spec, mode, seed } => {
            let modes: Vec<Mode> = match mode {
                Some(m) => vec![m.into()],
                None => vec![Mode::Indexed, Mode::Flame],
            };
            derive_all(&spec, &modes, seed)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { SUCCESS };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli) {
        Ok(o) => {
            let _ = out.write_all(o.text.as_bytes());
            o.code
        }
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
