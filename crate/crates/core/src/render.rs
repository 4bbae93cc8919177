//! Worksheets laid out for reading: plain text, Markdown and LaTeX.
//!
//! Each line pairs a step label with an assertion or a command, in the
//! order the annotated loop executes. In Flame mode the output and the
//! point are shown as `ψ` and `χ`, and the exposed element as `α_1`.

use crate::expr::Expr;
use crate::invariants::{analyze_post, Mode};
use crate::predicate::Predicate;
use crate::print::{Notation, Printer};
use crate::stmt::Stmt;
use crate::worksheet::Worksheet;
use crate::wp::{hole_for, wp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Markdown,
    Latex,
}

impl Format {
    pub fn from_keyword(s: &str) -> Option<Format> {
        match s {
            "text" => Some(Format::Text),
            "markdown" => Some(Format::Markdown),
            "latex" => Some(Format::Latex),
            _ => None,
        }
    }
}

enum Item {
    Assert(Predicate),
    Command(String),
}

struct Line {
    step: &'static str,
    depth: usize,
    item: Item,
}

fn printer(ws: &Worksheet, notation: Notation) -> Printer {
    let mut p = Printer::new(notation);
    if ws.mode == Mode::Flame {
        p = p.rename(ws.spec.output(), "ψ");
        if let Some((_, x)) = analyze_post(&ws.spec).ok().and_then(|f| f.power) {
            p = p.rename(&x, "χ");
        }
        let a = ws.spec.vector().0.to_string();
        p = p.element(&a, "α");
    }
    p
}

/// The state after the update: the step 7 condition with each unknown
/// replaced by the variable it stands for.
fn after_update(ws: &Worksheet) -> Option<Predicate> {
    let after = ws.after.as_ref()?;
    let Some(Stmt::Assign { targets, .. }) = &ws.update else {
        return Some(after.clone());
    };
    let single = targets.len() == 1;
    let back: Vec<(String, Expr)> = targets.iter().map(|t| (hole_for(t, single), Expr::var(t))).collect();
    Some(after.substitute(&back))
}

fn lines(ws: &Worksheet, p: &Printer) -> Vec<Line> {
    let mut out = Vec::new();
    let mut push = |step, depth, item| out.push(Line { step, depth, item });
    let inv = &ws.invariant;
    push("1a", 0, Item::Assert(ws.spec.pre.clone()));
    if let Some(init) = &ws.init {
        if let Ok(w) = wp(init, inv) {
            push("4", 0, Item::Assert(w.normalize_in(&ws.sizes())));
        }
        push("4", 0, Item::Command(p.stmt(init)));
    }
    push("2", 0, Item::Assert(inv.clone()));
    let guard = ws.guard.clone();
    let shown_guard = guard.as_ref().map(|g| p.predicate(g)).unwrap_or_else(|| "?".into());
    push("3", 0, Item::Command(format!("while {shown_guard} do")));
    let with_guard = guard.as_ref().map(|g| inv.and(g)).unwrap_or_else(|| inv.clone());
    push("2,3", 1, Item::Assert(with_guard));
    let (first, last) = ws.traversal.clone().unwrap_or((Stmt::Skip, Stmt::Skip));
    let update = ws.update.as_ref().map(|u| p.stmt(u)).unwrap_or_else(|| "?".into());
    match ws.mode {
        Mode::Indexed => {
            if let Some(a) = &ws.after {
                push("7", 1, Item::Assert(a.clone()));
            }
            push("8", 1, Item::Command(update));
            if let Some(b) = &ws.before {
                push("6", 1, Item::Assert(b.clone()));
            }
            push("5", 1, Item::Command(p.stmt(&last)));
        }
        Mode::Flame => {
            push("5a", 1, Item::Command(p.stmt(&first)));
            if let Some(b) = &ws.before {
                push("6", 1, Item::Assert(b.clone()));
            }
            push("8", 1, Item::Command(update));
            if let Some(a) = after_update(ws) {
                push("7", 1, Item::Assert(a));
            }
            push("5b", 1, Item::Command(p.stmt(&last)));
        }
    }
    push("2", 1, Item::Assert(inv.clone()));
    push("", 0, Item::Command("od".into()));
    if let Some(not_g) = guard.as_ref().and_then(Predicate::negate_guard) {
        push("2,3", 0, Item::Assert(inv.and(&not_g)));
    }
    push("1b", 0, Item::Assert(ws.postcondition.clone()));
    out
}

fn header(ws: &Worksheet) -> String {
    format!(
        "Worksheet for {} ({} mode, invariant {})",
        ws.spec.name,
        ws.mode.keyword(),
        ws.candidate
    )
}

fn text(ws: &Worksheet) -> String {
    let p = printer(ws, Notation::Unicode);
    let mut out = format!("{}\n\n", header(ws));
    for l in lines(ws, &p) {
        let body = match &l.item {
            Item::Assert(q) => format!("{{ {} }}", p.predicate(q)),
            Item::Command(c) => c.clone(),
        };
        out.push_str(&format!("{:<4} | {}{}\n", l.step, "    ".repeat(l.depth), body));
    }
    out
}

fn markdown(ws: &Worksheet) -> String {
    let p = printer(ws, Notation::Unicode);
    let mut out = format!("## {}\n\n| Step | Annotated algorithm |\n|---|---|\n", header(ws));
    for l in lines(ws, &p) {
        let body = match &l.item {
            Item::Assert(q) => format!("{{ {} }}", p.predicate(q)),
            Item::Command(c) => format!("**{c}**"),
        };
        let indent = "&nbsp;".repeat(4 * l.depth);
        out.push_str(&format!("| {} | {indent}{} |\n", l.step, body.replace('|', "\\|")));
    }
    out
}

fn latex(ws: &Worksheet) -> String {
    let p = printer(ws, Notation::Latex);
    let mut out = String::from(
        "\\documentclass{article}\n\\usepackage{amsmath,amssymb}\n\\begin{document}\n",
    );
    out.push_str(&format!("\\section*{{{}}}\n", header(ws)));
    out.push_str("\\begin{tabular}{r l}\n");
    for l in lines(ws, &p) {
        let indent = "\\quad ".repeat(l.depth);
        let body = match &l.item {
            Item::Assert(q) => format!("$\\{{ {} \\}}$", p.predicate(q)),
            Item::Command(c) if c == "od" => "\\textbf{od}".to_string(),
            Item::Command(c) if c.starts_with("while ") => {
                let g = ws.guard.as_ref().map(|g| p.predicate(g)).unwrap_or_else(|| "?".into());
                format!("\\textbf{{while}} ${g}$ \\textbf{{do}}")
            }
            Item::Command(c) => format!("${c}$"),
        };
        out.push_str(&format!("{} & {indent}{body} \\\\\n", l.step));
    }
    out.push_str("\\end{tabular}\n\\end{document}\n");
    out
}

pub fn render(ws: &Worksheet, format: Format) -> String {
    match format {
        Format::Text => text(ws),
        Format::Markdown => markdown(ws),
        Format::Latex => latex(ws),
    }
}
