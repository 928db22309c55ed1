//! LP file emission and a grammar checker for the same format.
//!
//! The writer produces the common `Minimize / Subject To / Bounds / Binaries /
//! Generals / End` layout read by CPLEX, Gurobi, HiGHS, SCIP and CBC.
//! Coefficients are exact decimals, never scientific notation, so output is
//! byte-stable.

use std::collections::HashSet;
use std::fmt::Write;

use thiserror::Error;

use super::{IlpModel, Sense, VarKind};
use crate::units::{format_fixed, UnitScale};

const WRAP_AT: usize = 100;

/// Renders `model` as an LP file.
pub fn export_lp(model: &IlpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.stats_line());
    out.push_str("Minimize\n");
    let obj_scale = UnitScale::new(model.objective_scale()).ok();
    let coef_text = |a: i64| match obj_scale {
        Some(scale) => format_fixed(i128::from(a), scale),
        None => a.to_string(),
    };
    let placeholder = model.variables().first().map(|v| v.name.as_str()).unwrap_or("x");
    let objective: Vec<(String, &str)> = model
        .objective()
        .iter()
        .map(|&(v, a)| (coef_text(a), model.variables()[v].name.as_str()))
        .collect();
    write_expression(&mut out, " obj:", &objective, placeholder, "");

    out.push_str("Subject To\n");
    for c in model.constraints() {
        let terms: Vec<(String, &str)> =
            c.terms.iter().map(|&(v, a)| (a.to_string(), model.variables()[v].name.as_str())).collect();
        let label = format!(" {}:", c.name);
        let tail = format!(" {} {}", c.sense.symbol(), c.rhs);
        write_expression(&mut out, &label, &terms, placeholder, &tail);
    }

    let bounded: Vec<_> = model.variables().iter().filter(|v| v.kind == VarKind::Integer).collect();
    if !bounded.is_empty() {
        out.push_str("Bounds\n");
        for v in bounded {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    for (header, kind) in [("Binaries", VarKind::Binary), ("Generals", VarKind::Integer)] {
        let names: Vec<&str> = model.variables().iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if names.is_empty() {
            continue;
        }
        out.push_str(header);
        out.push('\n');
        let mut line = String::new();
        for name in names {
            if !line.is_empty() && line.len() + name.len() + 1 > WRAP_AT {
                let _ = writeln!(out, "{line}");
                line.clear();
            }
            line.push(' ');
            line.push_str(name);
        }
        let _ = writeln!(out, "{line}");
    }
    out.push_str("End\n");
    out
}

fn write_expression(out: &mut String, label: &str, terms: &[(String, &str)], placeholder: &str, tail: &str) {
    let mut line = label.to_string();
    if terms.is_empty() {
        let _ = write!(line, " 0 {placeholder}");
    }
    for (n, (coef, name)) in terms.iter().enumerate() {
        let (sign, magnitude) = match coef.strip_prefix('-') {
            Some(m) => ("-", m),
            None => ("+", coef.as_str()),
        };
        let mut piece = String::new();
        if n > 0 || sign == "-" {
            piece.push(' ');
            piece.push_str(sign);
        }
        if magnitude == "1" {
            let _ = write!(piece, " {name}");
        } else {
            let _ = write!(piece, " {magnitude} {name}");
        }
        if line.len() + piece.len() > WRAP_AT {
            let _ = writeln!(out, "{line}");
            line = String::from("   ");
        }
        line.push_str(&piece);
    }
    line.push_str(tail);
    let _ = writeln!(out, "{line}");
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("LP grammar error at line {line}: {message}")]
pub struct LpGrammarError {
    pub line: usize,
    pub message: String,
}

/// What the checker read from an LP file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLp {
    pub minimize: bool,
    /// Objective terms as `(coefficient, variable)`.
    pub objective: Vec<(f64, String)>,
    pub constraints: Vec<ParsedConstraint>,
    /// `(lower, variable, upper)`; `None` is unbounded on that side.
    pub bounds: Vec<(Option<f64>, String, Option<f64>)>,
    pub binaries: Vec<String>,
    pub generals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConstraint {
    pub name: Option<String>,
    pub terms: Vec<(f64, String)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Colon,
    Sign(bool),
    Rel(Sense),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_keyword(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    match words.as_slice() {
        ["minimize"] | ["minimise"] | ["minimum"] | ["min"] => Some(Section::Objective),
        ["maximize"] | ["maximise"] | ["maximum"] | ["max"] => Some(Section::Objective),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Some(Section::Constraints),
        ["bounds"] | ["bound"] => Some(Section::Bounds),
        ["binaries"] | ["binary"] | ["bin"] => Some(Section::Binaries),
        ["generals"] | ["general"] | ["gen"] => Some(Section::Generals),
        ["end"] => Some(Section::End),
        _ => None,
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "!\"#$%&()/,;?@_`'{}|~".contains(c)
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '.'
}

fn tokenize(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, LpGrammarError> {
    let err = |message: String| LpGrammarError { line, message };
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ':' {
            out.push((Tok::Colon, line));
            i += 1;
        } else if c == '+' || c == '-' {
            out.push((Tok::Sign(c == '+'), line));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut op = String::from(c);
            if i + 1 < chars.len() && "<>=".contains(chars[i + 1]) {
                op.push(chars[i + 1]);
                i += 1;
            }
            i += 1;
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" => Sense::Eq,
                other => return Err(err(format!("bad relational operator '{other}'"))),
            };
            out.push((Tok::Rel(sense), line));
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let value = lit.parse::<f64>().map_err(|_| err(format!("bad number '{lit}'")))?;
            out.push((Tok::Num(value), line));
        } else if is_name_start(c) {
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            if name.len() > 255 {
                return Err(err(format!("name longer than 255 characters: {name}")));
            }
            out.push((Tok::Name(name), line));
        } else {
            return Err(err(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t.map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |&(_, l)| l)
    }

    fn err(&self, message: impl Into<String>) -> LpGrammarError {
        LpGrammarError { line: self.line(), message: message.into() }
    }

    fn label(&mut self) -> Option<String> {
        if let (Some(Tok::Name(n)), Some(Tok::Colon)) = (self.peek(), self.peek2()) {
            let n = n.clone();
            self.pos += 2;
            Some(n)
        } else {
            None
        }
    }

    /// `[sign] [coef] name { sign [coef] name }`, stopping at a relation,
    /// a label or the end of input.
    fn expression(&mut self) -> Result<Vec<(f64, String)>, LpGrammarError> {
        let mut terms = Vec::new();
        loop {
            let mut sign = 1.0;
            let mut had_sign = false;
            while let Some(Tok::Sign(plus)) = self.peek() {
                if !*plus {
                    sign = -sign;
                }
                had_sign = true;
                self.pos += 1;
            }
            if !terms.is_empty() && !had_sign {
                break;
            }
            let coef = if let Some(Tok::Num(v)) = self.peek() {
                let v = *v;
                self.pos += 1;
                v
            } else {
                1.0
            };
            match (self.peek(), self.peek2()) {
                (Some(Tok::Name(_)), Some(Tok::Colon)) => return Err(self.err("label where a variable was expected")),
                (Some(Tok::Name(n)), _) => {
                    let n = n.clone();
                    self.pos += 1;
                    terms.push((sign * coef, n));
                }
                _ if terms.is_empty() && !had_sign => return Err(self.err("expected a linear expression")),
                _ => return Err(self.err("expected a variable name after coefficient or sign")),
            }
            match self.peek() {
                Some(Tok::Sign(_)) => continue,
                _ => break,
            }
        }
        Ok(terms)
    }

    fn signed_number(&mut self) -> Result<f64, LpGrammarError> {
        let mut sign = 1.0;
        while let Some(Tok::Sign(plus)) = self.peek() {
            if !*plus {
                sign = -sign;
            }
            self.pos += 1;
        }
        match self.next() {
            Some(Tok::Num(v)) => Ok(sign * v),
            Some(Tok::Name(n)) if n.eq_ignore_ascii_case("inf") || n.eq_ignore_ascii_case("infinity") => {
                Ok(sign * f64::INFINITY)
            }
            _ => Err(self.err("expected a number")),
        }
    }
}

/// Checks `text` against the LP grammar and returns what it contains.
pub fn validate_lp(text: &str) -> Result<ParsedLp, LpGrammarError> {
    let mut parsed = ParsedLp::default();
    let mut section: Option<Section> = None;
    let mut seen = HashSet::new();
    let mut buffers: Vec<(Section, Vec<(Tok, usize)>)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if line.len() > 510 {
            return Err(LpGrammarError { line: line_no, message: "line longer than 510 characters".into() });
        }
        if let Some(next) = section_keyword(line) {
            if section == Some(Section::End) {
                return Err(LpGrammarError { line: line_no, message: "content after End".into() });
            }
            if next == Section::Objective {
                if section.is_some() {
                    return Err(LpGrammarError { line: line_no, message: "objective sense must come first".into() });
                }
                parsed.minimize = line.trim().to_ascii_lowercase().starts_with("min");
            } else if section.is_none() {
                return Err(LpGrammarError { line: line_no, message: "file must start with Minimize or Maximize".into() });
            }
            if !seen.insert(next) {
                return Err(LpGrammarError { line: line_no, message: format!("duplicate section {next:?}") });
            }
            section = Some(next);
            buffers.push((next, Vec::new()));
            continue;
        }
        match section {
            None => {
                return Err(LpGrammarError { line: line_no, message: "file must start with Minimize or Maximize".into() })
            }
            Some(Section::End) => return Err(LpGrammarError { line: line_no, message: "content after End".into() }),
            Some(_) => {
                let toks = tokenize(line, line_no)?;
                buffers.last_mut().expect("open section").1.extend(toks);
            }
        }
    }
    if section != Some(Section::End) {
        return Err(LpGrammarError { line: last_line, message: "missing End".into() });
    }
    if !seen.contains(&Section::Constraints) {
        return Err(LpGrammarError { line: last_line, message: "missing Subject To section".into() });
    }

    let mut constraint_names = HashSet::new();
    for (sec, toks) in &buffers {
        let mut cur = Cursor { toks, pos: 0, last_line };
        match sec {
            Section::Objective => {
                cur.label();
                if cur.peek().is_some() {
                    parsed.objective = cur.expression()?;
                }
                if cur.peek().is_some() {
                    return Err(cur.err("unexpected token in objective"));
                }
            }
            Section::Constraints => {
                while cur.peek().is_some() {
                    let name = cur.label();
                    if let Some(n) = &name {
                        if !constraint_names.insert(n.clone()) {
                            return Err(cur.err(format!("duplicate constraint name {n}")));
                        }
                    }
                    let terms = cur.expression()?;
                    let sense = match cur.next() {
                        Some(Tok::Rel(s)) => s,
                        _ => return Err(cur.err("expected <=, >= or =")),
                    };
                    let rhs = cur.signed_number()?;
                    if !rhs.is_finite() {
                        return Err(cur.err("right-hand side must be finite"));
                    }
                    parsed.constraints.push(ParsedConstraint { name, terms, sense, rhs });
                }
            }
            Section::Bounds => {
                while cur.peek().is_some() {
                    let bound = parse_bound(&mut cur)?;
                    parsed.bounds.push(bound);
                }
            }
            Section::Binaries | Section::Generals => {
                while let Some(tok) = cur.next() {
                    match tok {
                        Tok::Name(n) => {
                            if *sec == Section::Binaries {
                                parsed.binaries.push(n)
                            } else {
                                parsed.generals.push(n)
                            }
                        }
                        _ => return Err(cur.err("expected variable names only")),
                    }
                }
            }
            Section::End => {}
        }
    }
    Ok(parsed)
}

fn parse_bound(cur: &mut Cursor<'_>) -> Result<(Option<f64>, String, Option<f64>), LpGrammarError> {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    match cur.peek() {
        Some(Tok::Name(n)) if !(n.eq_ignore_ascii_case("inf") || n.eq_ignore_ascii_case("infinity")) => {
            let name = n.clone();
            cur.pos += 1;
            if let Some(Tok::Name(word)) = cur.peek() {
                if word.eq_ignore_ascii_case("free") {
                    cur.pos += 1;
                    return Ok((None, name, None));
                }
            }
            let sense = match cur.next() {
                Some(Tok::Rel(s)) => s,
                _ => return Err(cur.err("expected a relation in bound")),
            };
            let value = cur.signed_number()?;
            Ok(match sense {
                Sense::Le => (None, name, finite(value)),
                Sense::Ge => (finite(value), name, None),
                Sense::Eq => (finite(value), name, finite(value)),
            })
        }
        _ => {
            let low = cur.signed_number()?;
            match cur.next() {
                Some(Tok::Rel(Sense::Le)) => {}
                _ => return Err(cur.err("expected <= after lower bound")),
            }
            let name = match cur.next() {
                Some(Tok::Name(n)) => n,
                _ => return Err(cur.err("expected a variable in bound")),
            };
            if let Some(Tok::Rel(Sense::Le)) = cur.peek() {
                cur.pos += 1;
                let high = cur.signed_number()?;
                Ok((finite(low), name, finite(high)))
            } else {
                Ok((finite(low), name, None))
            }
        }
    }
}
