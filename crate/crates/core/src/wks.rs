//! The `.wks` worksheet file format.
//!
//! ```text
//! flamesmith-worksheet 1
//! op polyeval
//! mode indexed
//! var y : scalar, out
//! var a : vector(n), in
//! var x : scalar, in
//! var k : scalar, index
//! spec-post: y = sum(i, 0, n - 1, a[i] * x^i)
//! candidate 5
//! direction last-to-first
//! pre 1a given: 0 <= n
//! post 1b given: y = sum(i, 0, n - 1, a[i] * x^i)
//! invariant 2 given: y = sum(i, k, n - 1, a[i] * x^(i - k)) && 0 <= k && k <= n
//! guard 3 derived: 0 < k
//! init 4 derived: y := 0; k := n
//! traversal 5 derived: skip | k := k - 1
//! update 8 derived: y := a[k - 1] + y * x
//! end
//! ```
//!
//! Optional lines: `aux <name>`, `repair: <text>`, `side-condition: <atom>`,
//! `state 6 ...`, `obligation 7 ...`, `cost-increment: <expr>`,
//! `cost-invariant: <predicate>`, and `check <obligation>: <verdict>`.
//! Check lines record a verification run and are ignored when reading.
//! A slot line that is absent leaves the slot open.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dsl::{content, var_decl, whole, ParseError, Parser};
use crate::invariants::{Direction, Mode};
use crate::predicate::Predicate;
use crate::print::{Notation, Printer};
use crate::spec::{OperationSpec, SpecError};
use crate::stmt::Stmt;
use crate::verify::Report;
use crate::worksheet::{Slot, Worksheet};

pub const HEADER: &str = "flamesmith-worksheet 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WksError {
    #[error("line 1: expected header `{HEADER}`")]
    Header,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing `{0}` line")]
    Missing(&'static str),
    #[error(transparent)]
    Semantic(#[from] SpecError),
}

fn line_error(line: usize, message: impl Into<String>) -> WksError {
    WksError::Line { line, message: message.into() }
}

pub fn render_wks(ws: &Worksheet, checks: Option<&Report>) -> String {
    let p = Printer::new(Notation::Ascii);
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(HEADER.to_string());
    line(format!("op {}", ws.spec.name));
    line(format!("mode {}", ws.mode.keyword()));
    for v in &ws.spec.vars {
        let kind = match &v.kind {
            crate::spec::Kind::Scalar => "scalar".to_string(),
            crate::spec::Kind::Vector { size } => format!("vector({size})"),
        };
        line(format!("var {} : {kind}, {}", v.name, v.role.keyword()));
    }
    for z in &ws.auxiliaries {
        line(format!("aux {z}"));
    }
    line(format!("spec-post: {}", p.predicate(&ws.spec.post)));
    line(format!("candidate {}", ws.candidate));
    line(format!("direction {}", ws.direction.keyword()));
    if let Some(r) = &ws.repair {
        line(format!("repair: {r}"));
    }
    for c in &ws.side_conditions {
        line(format!("side-condition: {}", p.atom(c)));
    }
    let origin = |s: Slot| if ws.derived.contains(&s) { "derived" } else { "given" };
    let mut slot = |s: Slot, text: Option<String>| {
        if let Some(t) = text {
            line(format!("{} {} {}: {t}", s.keyword(), s.label(), origin(s)));
        }
    };
    slot(Slot::Precondition, Some(p.predicate(&ws.spec.pre)));
    slot(Slot::Postcondition, Some(p.predicate(&ws.postcondition)));
    slot(Slot::Invariant, Some(p.predicate(&ws.invariant)));
    slot(Slot::Guard, ws.guard.as_ref().map(|g| p.predicate(g)));
    slot(Slot::Initialization, ws.init.as_ref().map(|s| p.stmt(s)));
    slot(Slot::Traversal, ws.traversal.as_ref().map(|(a, b)| format!("{} | {}", p.stmt(a), p.stmt(b))));
    slot(Slot::BeforeUpdate, ws.before.as_ref().map(|q| p.predicate(q)));
    slot(Slot::AfterUpdate, ws.after.as_ref().map(|q| p.predicate(q)));
    slot(Slot::Update, ws.update.as_ref().map(|s| p.stmt(s)));
    if let Some(c) = &ws.cost_increment {
        line(format!("cost-increment: {}", p.expr(c)));
    }
    if let Some(c) = &ws.cost_invariant {
        line(format!("cost-invariant: {}", p.predicate(c)));
    }
    if let Some(r) = checks {
        for c in &r.checks {
            line(format!("check {}: {}", c.obligation.name(), c.verdict));
        }
    }
    line("end".to_string());
    out
}

fn parse_with<T>(text: &str, line: usize, f: impl FnOnce(&mut Parser) -> Result<T, ParseError>) -> Result<T, WksError> {
    Ok(whole(text, line, f)?)
}

fn parse_stmt_at(text: &str, line: usize) -> Result<Stmt, WksError> {
    parse_with(text, line, Parser::stmt)
}

fn parse_predicate_at(text: &str, line: usize) -> Result<Predicate, WksError> {
    parse_with(text, line, Parser::predicate)
}

pub fn parse_wks(text: &str) -> Result<Worksheet, WksError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if content(l) == HEADER => {}
        _ => return Err(WksError::Header),
    }
    let mut name = None;
    let mut mode = None;
    let mut vars = Vec::new();
    let mut auxiliaries = Vec::new();
    let mut spec_post = None;
    let mut candidate = None;
    let mut direction = None;
    let mut repair = None;
    let mut side_conditions = Vec::new();
    let mut slots: Vec<(Slot, usize, String)> = Vec::new();
    let mut derived = BTreeSet::new();
    let mut cost_increment = None;
    let mut cost_invariant = None;
    let mut ended = false;
    for (n, raw) in lines {
        let body = if raw.trim_start().starts_with("repair:") { raw.trim() } else { content(raw) };
        if body.is_empty() {
            continue;
        }
        if ended {
            return Err(line_error(n, "text after `end`"));
        }
        let (head, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let rest = rest.trim();
        match head.trim_end_matches(':') {
            "end" => ended = true,
            "op" => name = Some(rest.to_string()),
            "mode" => mode = Some(Mode::from_keyword(rest).ok_or_else(|| line_error(n, "mode must be `indexed` or `flame`"))?),
            "var" => vars.push(parse_with(body, n, var_decl)?),
            "aux" => auxiliaries.push(parse_with(rest, n, Parser::ident)?),
            "spec-post" => spec_post = Some(parse_predicate_at(rest, n)?),
            "candidate" => candidate = Some(rest.parse::<usize>().map_err(|_| line_error(n, "candidate must be a number"))?),
            "direction" => {
                direction = Some(
                    Direction::from_keyword(rest)
                        .ok_or_else(|| line_error(n, "direction must be `first-to-last` or `last-to-first`"))?,
                )
            }
            "repair" => repair = Some(rest.to_string()),
            "side-condition" => {
                let p = parse_predicate_at(rest, n)?;
                side_conditions.extend(p.conjuncts);
            }
            "cost-increment" => cost_increment = Some(parse_with(rest, n, Parser::expr)?),
            "cost-invariant" => cost_invariant = Some(parse_predicate_at(rest, n)?),
            "check" => {}
            kw => {
                let slot = Slot::from_keyword(kw).ok_or_else(|| line_error(n, format!("unknown line `{kw}`")))?;
                let (meta, text) = rest
                    .split_once(':')
                    .ok_or_else(|| line_error(n, "expected `<slot> <label> given|derived: <content>`"))?;
                let mut meta = meta.split_whitespace();
                if meta.next() != Some(slot.label()) {
                    return Err(line_error(n, format!("slot `{kw}` has label {}", slot.label())));
                }
                match meta.next() {
                    Some("derived") => {
                        derived.insert(slot);
                    }
                    Some("given") => {}
                    _ => return Err(line_error(n, "expected `given` or `derived`")),
                }
                slots.push((slot, n, text.trim().to_string()));
            }
        }
    }
    if !ended {
        return Err(WksError::Missing("end"));
    }
    let get = |s: Slot| slots.iter().find(|(k, _, _)| *k == s).map(|(_, n, t)| (*n, t.as_str()));
    let (pn, pre) = get(Slot::Precondition).ok_or(WksError::Missing("pre"))?;
    let (qn, post) = get(Slot::Postcondition).ok_or(WksError::Missing("post"))?;
    let (inn, inv) = get(Slot::Invariant).ok_or(WksError::Missing("invariant"))?;
    let postcondition = parse_predicate_at(post, qn)?;
    let spec = OperationSpec {
        name: name.ok_or(WksError::Missing("op"))?,
        vars,
        pre: parse_predicate_at(pre, pn)?,
        post: spec_post.unwrap_or_else(|| postcondition.clone()),
    };
    spec.validate()?;
    let opt_pred = |s: Slot| get(s).map(|(n, t)| parse_predicate_at(t, n)).transpose();
    let traversal = match get(Slot::Traversal) {
        None => None,
        Some((n, t)) => {
            let (a, b) = t.split_once('|').ok_or_else(|| line_error(n, "traversal needs `<before> | <after>`"))?;
            Some((parse_stmt_at(a.trim(), n)?, parse_stmt_at(b.trim(), n)?))
        }
    };
    Ok(Worksheet {
        spec,
        mode: mode.ok_or(WksError::Missing("mode"))?,
        candidate: candidate.ok_or(WksError::Missing("candidate"))?,
        invariant: parse_predicate_at(inv, inn)?,
        auxiliaries,
        direction: direction.ok_or(WksError::Missing("direction"))?,
        repair,
        side_conditions,
        postcondition,
        guard: opt_pred(Slot::Guard)?,
        init: get(Slot::Initialization).map(|(n, t)| parse_stmt_at(t, n)).transpose()?,
        traversal,
        before: opt_pred(Slot::BeforeUpdate)?,
        after: opt_pred(Slot::AfterUpdate)?,
        update: get(Slot::Update).map(|(n, t)| parse_stmt_at(t, n)).transpose()?,
        cost_increment,
        cost_invariant,
        derived,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::instrument;
    use crate::dsl::parse_spec;
    use crate::worksheet::derive;

    const POLYEVAL: &str = "op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
";

    #[test]
    fn round_trip_every_derivation() {
        let spec = parse_spec(POLYEVAL).unwrap();
        for mode in [Mode::Indexed, Mode::Flame] {
            for id in 1..=6 {
                let mut ws = derive(&spec, mode, id).unwrap().worksheet;
                if id == 5 {
                    ws = instrument(&ws).unwrap();
                }
                let text = render_wks(&ws, None);
                let back = parse_wks(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
                assert_eq!(back, ws, "{text}");
                assert_eq!(render_wks(&back, None), text);
            }
        }
    }

    #[test]
    fn open_slots_and_errors() {
        let spec = parse_spec(POLYEVAL).unwrap();
        let mut ws = derive(&spec, Mode::Indexed, 5).unwrap().worksheet;
        ws.update = None;
        let back = parse_wks(&render_wks(&ws, None)).unwrap();
        assert_eq!(back.update, None);

        assert_eq!(parse_wks("op polyeval\n"), Err(WksError::Header));
        let text = render_wks(&ws, None).replace("end\n", "");
        assert_eq!(parse_wks(&text), Err(WksError::Missing("end")));
        let text = render_wks(&ws, None).replace("guard 3 derived: 0 < k", "guard 3 derived: 0 <");
        assert!(matches!(parse_wks(&text), Err(WksError::Parse(_))));
    }
}
