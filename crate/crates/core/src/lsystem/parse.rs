//! Line-oriented model file format.
//!
//! ```text
//! # comment
//! const plastochron = 3.0
//! growth leaf_len stretch 1.0 : (0, 0) (0.6, 0.9) (1, 1)
//! max_length: 200000
//! axiom: A(0)
//! A(t) : t < plastochron -> A(t + 1)
//! A(t) : t >= plastochron -> F(1) [ +(30) L(0) ] A(0)
//! B(x) -> B(x) C @ 0.25 | B(x + 1) @ 0.75
//! ```
//!
//! Productions are tried in file order; the first whose predecessor name,
//! arity and condition match is applied.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::expr::{Expr, Scope};
use super::growth::GrowthFunction;
use super::symbol::Name;
use crate::error::ParseError;

pub const DEFAULT_MAX_LENGTH: usize = 1_000_000;
const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// A module in a successor or axiom, with parameter expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleTemplate {
    pub name: Name,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub probability: f64,
    pub modules: Vec<ModuleTemplate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub predecessor: Name,
    pub params: Vec<String>,
    pub condition: Option<Expr>,
    pub successors: Vec<Successor>,
}

impl Production {
    pub fn is_stochastic(&self) -> bool {
        self.successors.len() > 1
    }
}

/// A parsed model: constants, growth functions, axiom and productions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDefinition {
    pub constants: Vec<(String, f64)>,
    /// Constants supplied by an enclosing preset; not written by [`Self::to_text`].
    pub external: BTreeSet<String>,
    pub growth: Vec<(String, GrowthFunction)>,
    pub axiom: Vec<ModuleTemplate>,
    pub productions: Vec<Production>,
    pub max_length: usize,
}

impl ModelDefinition {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Replaces the value of an existing constant. Returns false if unknown.
    pub fn set_constant(&mut self, name: &str, value: f64) -> bool {
        match self.constants.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => {
                slot.1 = value;
                true
            }
            None => false,
        }
    }

    pub fn growth_function(&self, name: &str) -> Option<&GrowthFunction> {
        self.growth.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn growth_function_mut(&mut self, name: &str) -> Option<&mut GrowthFunction> {
        self.growth.iter_mut().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn constant_values(&self) -> Vec<f64> {
        self.constants.iter().map(|(_, v)| *v).collect()
    }

    pub fn growth_functions(&self) -> Vec<GrowthFunction> {
        self.growth.iter().map(|(_, g)| g.clone()).collect()
    }

    fn scope(&self, params: &[String]) -> Scope {
        Scope {
            params: params.to_vec(),
            constants: self.constants.iter().map(|(n, _)| n.clone()).collect(),
            growth: self.growth.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    /// Serializes back into the model file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.constants {
            if !self.external.contains(name) {
                writeln!(out, "const {name} = {value:?}").unwrap();
            }
        }
        for (name, g) in &self.growth {
            write!(out, "growth {name} stretch {:?} :", g.stretch).unwrap();
            for (a, v) in g.points() {
                write!(out, " ({a:?}, {v:?})").unwrap();
            }
            out.push('\n');
        }
        if self.max_length != DEFAULT_MAX_LENGTH {
            writeln!(out, "max_length: {}", self.max_length).unwrap();
        }
        let top = self.scope(&[]);
        writeln!(out, "axiom: {}", format_modules(&self.axiom, &top)).unwrap();
        for p in &self.productions {
            let scope = self.scope(&p.params);
            out.push_str(p.predecessor.as_str());
            if !p.params.is_empty() {
                write!(out, "({})", p.params.join(", ")).unwrap();
            }
            if let Some(c) = &p.condition {
                write!(out, " : {}", c.display(&scope)).unwrap();
            }
            out.push_str(" ->");
            for (i, s) in p.successors.iter().enumerate() {
                if i > 0 {
                    out.push_str(" |");
                }
                if !s.modules.is_empty() {
                    write!(out, " {}", format_modules(&s.modules, &scope)).unwrap();
                }
                if p.successors.len() > 1 || s.probability != 1.0 {
                    write!(out, " @ {:?}", s.probability).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

fn format_modules(modules: &[ModuleTemplate], scope: &Scope) -> String {
    let mut out = String::new();
    for (i, m) in modules.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(m.name.as_str());
        if !m.args.is_empty() {
            out.push('(');
            for (j, a) in m.args.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                write!(out, "{}", a.display(scope)).unwrap();
            }
            out.push(')');
        }
    }
    out
}

/// Parses model file text.
pub fn parse_model(text: &str) -> Result<ModelDefinition, ParseError> {
    parse_model_with(text, &[], 0)
}

/// Parses model text with extra host constants (declared before the file's
/// own) and a line offset for error positions.
pub fn parse_model_with(
    text: &str,
    external: &[(String, f64)],
    line_offset: usize,
) -> Result<ModelDefinition, ParseError> {
    let mut model = ModelDefinition {
        constants: external.to_vec(),
        external: external.iter().map(|(n, _)| n.clone()).collect(),
        growth: Vec::new(),
        axiom: Vec::new(),
        productions: Vec::new(),
        max_length: DEFAULT_MAX_LENGTH,
    };

    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1 + line_offset, strip_comment(l)))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    // Declarations first, so productions may reference anything in the file.
    let mut rest = Vec::new();
    for &(ln, line) in &lines {
        let trimmed = line.trim_start();
        let col = line.len() - trimmed.len() + 1;
        if let Some(body) = keyword(trimmed, "const") {
            let (name, value) = body
                .split_once('=')
                .ok_or_else(|| ParseError::new(ln, col, "expected 'const NAME = VALUE'"))?;
            let name = name.trim();
            check_ident(name, ln, col + 6)?;
            if model.constants.iter().any(|(n, _)| n == name) {
                return Err(ParseError::new(ln, col, format!("duplicate constant '{name}'")));
            }
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| ParseError::new(ln, col, format!("invalid value for constant '{name}'")))?;
            if !value.is_finite() {
                return Err(ParseError::new(ln, col, format!("constant '{name}' must be finite")));
            }
            model.constants.push((name.to_string(), value));
        } else if let Some(body) = keyword(trimmed, "growth") {
            let (name, g) = parse_growth(body, ln, col)?;
            if model.growth.iter().any(|(n, _)| *n == name) {
                return Err(ParseError::new(ln, col, format!("duplicate growth function '{name}'")));
            }
            model.growth.push((name, g));
        } else {
            rest.push((ln, line));
        }
    }

    let mut axiom_seen = false;
    for (ln, line) in rest {
        let trimmed = line.trim_start();
        let col = line.len() - trimmed.len() + 1;
        if let Some(body) = trimmed.strip_prefix("axiom:") {
            if axiom_seen {
                return Err(ParseError::new(ln, col, "duplicate axiom"));
            }
            axiom_seen = true;
            let scope = model.scope(&[]);
            model.axiom = parse_module_list(body, ln, col + 6, &scope)?;
            if !balanced(&model.axiom) {
                return Err(ParseError::new(ln, col, "unbalanced brackets in axiom"));
            }
        } else if let Some(body) = trimmed.strip_prefix("max_length:") {
            model.max_length = body
                .trim()
                .parse()
                .map_err(|_| ParseError::new(ln, col, "invalid max_length"))?;
        } else if let Some(arrow) = find_top_level(line, "->") {
            let production = parse_production(&model, line, arrow, ln)?;
            model.productions.push(production);
        } else {
            let word: String = trimmed.chars().take_while(|c| !c.is_whitespace() && *c != ':').collect();
            return Err(ParseError::new(ln, col, format!("unknown directive '{word}'")));
        }
    }
    if !axiom_seen {
        return Err(ParseError::new(line_offset + 1, 1, "missing axiom"));
    }
    Ok(model)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(kw)?;
    rest.starts_with(char::is_whitespace).then_some(rest)
}

fn check_ident(name: &str, line: usize, col: usize) -> Result<(), ParseError> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ParseError::new(line, col, format!("invalid identifier '{name}'")))
    }
}

fn parse_growth(body: &str, ln: usize, col: usize) -> Result<(String, GrowthFunction), ParseError> {
    let (head, points) = body
        .split_once(':')
        .ok_or_else(|| ParseError::new(ln, col, "expected 'growth NAME [stretch S] : (age, value) ...'"))?;
    let mut words = head.split_whitespace();
    let name = words
        .next()
        .ok_or_else(|| ParseError::new(ln, col, "growth function needs a name"))?;
    check_ident(name, ln, col)?;
    let mut stretch = 1.0;
    match (words.next(), words.next(), words.next()) {
        (None, _, _) => {}
        (Some("stretch"), Some(v), None) => {
            stretch = v
                .parse()
                .map_err(|_| ParseError::new(ln, col, format!("invalid stretch '{v}'")))?;
        }
        _ => return Err(ParseError::new(ln, col, "expected 'stretch VALUE'")),
    }
    let mut pts = Vec::new();
    let mut rest = points.trim();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| ParseError::new(ln, col, "expected '(age, value)'"))?;
        let (a, v) = inner
            .0
            .split_once(',')
            .ok_or_else(|| ParseError::new(ln, col, "expected '(age, value)'"))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ParseError::new(ln, col, format!("invalid number '{}'", s.trim())))
        };
        pts.push((parse(a)?, parse(v)?));
        rest = inner.1.trim_start();
    }
    let g = GrowthFunction::new(pts, stretch).map_err(|e| ParseError::new(ln, col, e.to_string()))?;
    Ok((name.to_string(), g))
}

/// Byte index of `pat` outside any parentheses.
fn find_top_level(s: &str, pat: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(pat) => return Some(i),
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str, sep: char) -> Vec<(usize, &str)> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push((start, &s[start..i]));
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push((start, &s[start..]));
    parts
}

fn column(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

fn parse_production(model: &ModelDefinition, line: &str, arrow: usize, ln: usize) -> Result<Production, ParseError> {
    let lhs = &line[..arrow];
    let rhs_start = arrow + 2;
    let rhs = &line[rhs_start..];

    let (pred_text, cond_text) = match find_top_level(lhs, ":") {
        Some(i) => (&lhs[..i], Some((i + 1, &lhs[i + 1..]))),
        None => (lhs, None),
    };
    let pred_col = column(line, pred_text.len() - pred_text.trim_start().len());
    let pred = parse_predecessor(pred_text, ln, pred_col)?;
    let params = pred.args;
    for (i, p) in params.iter().enumerate() {
        if params[..i].contains(p) {
            return Err(ParseError::new(ln, pred_col, format!("duplicate formal parameter '{p}'")));
        }
    }
    let scope = model.scope(&params);

    let condition = match cond_text {
        Some((off, text)) if !text.trim().is_empty() => {
            let lead = text.len() - text.trim_start().len();
            Some(Expr::parse(text.trim(), ln, column(line, off + lead), &scope)?)
        }
        Some((off, _)) => return Err(ParseError::new(ln, column(line, off), "empty condition")),
        None => None,
    };

    let parts = split_top_level(rhs, '|');
    let multiple = parts.len() > 1;
    let mut successors = Vec::new();
    for (off, part) in parts {
        let base = rhs_start + off;
        let (modules_text, probability) = match find_top_level(part, "@") {
            Some(at) => {
                let text = part[at + 1..].trim();
                let p: f64 = text.parse().map_err(|_| {
                    ParseError::new(ln, column(line, base + at + 1), format!("invalid probability '{text}'"))
                })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ParseError::new(
                        ln,
                        column(line, base + at + 1),
                        format!("probability {p} outside [0, 1]"),
                    ));
                }
                (&part[..at], p)
            }
            None if multiple => {
                return Err(ParseError::new(
                    ln,
                    column(line, base),
                    "stochastic successors need '@ probability'",
                ))
            }
            None => (part, 1.0),
        };
        let modules = parse_module_list(modules_text, ln, column(line, base), &scope)?;
        if !balanced(&modules) {
            return Err(ParseError::new(ln, column(line, base), "unbalanced brackets in successor"));
        }
        successors.push(Successor { probability, modules });
    }
    let sum: f64 = successors.iter().map(|s| s.probability).sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(ParseError::new(
            ln,
            column(line, rhs_start),
            format!("probabilities sum to {}", format_short(sum)),
        ));
    }

    Ok(Production {
        predecessor: pred.name,
        params,
        condition,
        successors,
    })
}

/// A predecessor module with formal parameter names.
struct Predecessor {
    name: Name,
    args: Vec<String>,
}

fn parse_predecessor(text: &str, ln: usize, col: usize) -> Result<Predecessor, ParseError> {
    let t = text.trim();
    let (name, args) = match t.find('(') {
        Some(i) => {
            let inner = t[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| ParseError::new(ln, col, "expected ')' after formal parameters"))?;
            let args: Vec<String> = inner.split(',').map(|a| a.trim().to_string()).collect();
            for a in &args {
                check_ident(a, ln, col)?;
            }
            (t[..i].trim(), args)
        }
        None => (t, Vec::new()),
    };
    if name.is_empty() || name.contains(char::is_whitespace) || name.contains(')') {
        return Err(ParseError::new(ln, col, format!("invalid predecessor '{t}'")));
    }
    if name == "[" || name == "]" {
        return Err(ParseError::new(ln, col, "brackets cannot be rewritten"));
    }
    Ok(Predecessor {
        name: Name::new(name),
        args,
    })
}

fn balanced(modules: &[ModuleTemplate]) -> bool {
    let mut depth = 0i64;
    for m in modules {
        if m.name.is_push() {
            depth += 1;
        } else if m.name.is_pop() {
            depth -= 1;
            if depth < 0 {
                return false;
            }
        }
    }
    depth == 0
}

fn format_short(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Parses a whitespace-separated list of modules such as `F(x * 2) [ +(30) L ]`.
pub fn parse_module_list(text: &str, line: usize, column: usize, scope: &Scope) -> Result<Vec<ModuleTemplate>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let col = |byte: usize| column + text[..byte].chars().count();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let name_end;
        if c == '[' || c == ']' {
            chars.next();
            out.push(ModuleTemplate {
                name: Name::new(&text[i..i + 1]),
                args: Vec::new(),
            });
            continue;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            name_end = end;
        } else if "+-&^/\\!$%~?".contains(c) {
            chars.next();
            name_end = i + c.len_utf8();
        } else {
            return Err(ParseError::new(line, col(i), format!("unexpected '{c}'")));
        }
        let name = Name::new(&text[i..name_end]);
        let mut args = Vec::new();
        if let Some(&(open, '(')) = chars.peek() {
            let mut depth = 0i32;
            let mut close = None;
            for (j, d) in chars.by_ref() {
                match d {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| ParseError::new(line, col(open), "unclosed '('"))?;
            let inner = &text[open + 1..close];
            for (off, arg) in split_top_level(inner, ',') {
                let lead = arg.len() - arg.trim_start().len();
                if arg.trim().is_empty() {
                    return Err(ParseError::new(line, col(open + 1 + off), "empty parameter"));
                }
                args.push(Expr::parse(arg.trim(), line, col(open + 1 + off + lead), scope)?);
            }
        }
        out.push(ModuleTemplate { name, args });
    }
    Ok(out)
}
