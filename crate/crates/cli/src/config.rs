//! Scenario files.
//!
//! ```text
//! name = "herglotz"
//! seed = 7
//!
//! [domain]
//! R = 1 [length]
//! n = 64
//!
//! [medium]
//! c = "2 - r" [length/time]
//! W = const(0.5, 0)
//! phi = "0.3*(1 - (x1^2 + x2^2))" [time]
//! ```
//!
//! One `key = value [unit]` per line, `#` starts a comment. Values are
//! numbers, quoted strings, booleans, bare words or calls like `const(0.5, 0)`.
//! A unit annotation is optional but must match the unit the key is
//! declared with. Solver tolerances marked `length` default to multiples of
//! `R`.

use randers_core::boundary::MatrixOptions;
use randers_core::expr::Expr;
use randers_core::finsler::Domain;
use randers_core::recovery::{HerglotzOptions, ReportOptions, Scenario};
use randers_core::shooting::ShootingOptions;
use randers_core::zermelo::{conformal_specialize, linearize, zermelo_construct, MediumModel};
use randers_core::{Error, MetricField, OneForm, RandersSpec, Result, ScalarField, VectorField};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    One,
    Length,
    Time,
    /// length/time
    Speed,
    /// time/length
    Slowness,
}

impl Unit {
    fn parse(s: &str) -> Option<Unit> {
        match s.replace(' ', "").as_str() {
            "1" => Some(Unit::One),
            "length" => Some(Unit::Length),
            "time" => Some(Unit::Time),
            "length/time" => Some(Unit::Speed),
            "time/length" => Some(Unit::Slowness),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::One => "1",
            Unit::Length => "length",
            Unit::Time => "time",
            Unit::Speed => "length/time",
            Unit::Slowness => "time/length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Zermelo,
    Linearized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBlock {
    pub radius: f64,
    pub inner: Option<f64>,
    pub n: usize,
}

/// Either a moving medium (`c`, `W`, `model`) or a direct pair
/// (`alpha`, `beta`); `phi` adds `d phi` to the 1-form in both cases.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumBlock {
    pub speed: Option<ScalarField>,
    pub flow: Option<VectorField>,
    pub model: Model,
    pub alpha: Option<MetricField>,
    pub beta: Option<OneForm>,
    pub phi: Option<ScalarField>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverBlock {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub h_max: Option<f64>,
    pub h_init: Option<f64>,
    pub max_steps: Option<usize>,
    pub exit_tol: Option<f64>,
    pub fan: Option<usize>,
    pub miss_tol: Option<f64>,
    pub refine_tol: Option<f64>,
    pub min_separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineBlock {
    /// Standard deviation of additive noise on simulated distances.
    pub noise: f64,
    /// Second scenario for `recover`, relative to this file.
    pub compare: Option<String>,
    /// Precomputed distance CSV used instead of simulating.
    pub data: Option<String>,
    pub invert: bool,
    /// Number of fan geodesics written by `plotdata`.
    pub paths: usize,
    pub conjugate_scan: bool,
}

impl Default for PipelineBlock {
    fn default() -> Self {
        Self {
            noise: 0.0,
            compare: None,
            data: None,
            invert: true,
            paths: 16,
            conjugate_scan: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub domain: DomainBlock,
    pub medium: MediumBlock,
    pub solver: SolverBlock,
    pub pipeline: PipelineBlock,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            domain: DomainBlock {
                radius: 1.0,
                inner: None,
                n: 16,
            },
            medium: MediumBlock {
                speed: None,
                flow: None,
                model: Model::Zermelo,
                alpha: None,
                beta: None,
                phi: None,
            },
            solver: SolverBlock::default(),
            pipeline: PipelineBlock::default(),
        }
    }
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Num(f64),
    Str(String),
    Call(String, Vec<(Arg, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64, String),
    Str(String),
    Bool(bool),
    Word(String),
    Call(String, Vec<(Arg, usize)>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Num(..) => "a number",
            Value::Str(_) => "a string",
            Value::Bool(_) => "a boolean",
            Value::Word(_) => "a bare word",
            Value::Call(..) => "a call",
        }
    }
}

#[derive(Debug)]
struct Entry {
    line: usize,
    key: String,
    key_col: usize,
    value: Value,
    value_col: usize,
    unit: Option<(Unit, usize)>,
}

struct Cursor<'a> {
    line: usize,
    chars: Vec<char>,
    pos: usize,
    _text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Self {
            line,
            chars: text.chars().collect(),
            pos: 0,
            _text: text,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek(), None | Some('#'))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.col(), msg)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        if !self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
            return None;
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<(f64, String)> {
        let start = self.pos;
        let digits = |s: &mut Self| {
            let b = s.pos;
            while s.peek().is_some_and(|c| c.is_ascii_digit()) {
                s.pos += 1;
            }
            s.pos > b
        };
        if matches!(self.peek(), Some('+' | '-')) {
            self.pos += 1;
        }
        let mut any = digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return Err(self.err("expected a number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if !digits(self) {
                return Err(self.err("missing exponent digits"));
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let v = text.parse::<f64>().map_err(|e| Error::parse(self.line, start + 1, e.to_string()))?;
        Ok((v, text))
    }

    fn string(&mut self) -> Result<String> {
        let start = self.col();
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek() {
                None => return Err(Error::parse(self.line, start, "unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(s);
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn arg(&mut self) -> Result<(Arg, usize)> {
        self.skip_ws();
        let col = self.col();
        match self.peek() {
            Some('"') => Ok((Arg::Str(self.string()?), col)),
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.ident().unwrap_or_default();
                self.expect('(')?;
                Ok((Arg::Call(name, self.call_args()?), col))
            }
            _ => Ok((Arg::Num(self.number()?.0), col)),
        }
    }

    /// Arguments after an opening parenthesis, through the closing one.
    fn call_args(&mut self) -> Result<Vec<(Arg, usize)>> {
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.arg()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }

    fn value(&mut self) -> Result<(Value, usize)> {
        self.skip_ws();
        let col = self.col();
        let v = match self.peek() {
            None | Some('#') => return Err(self.err("missing value")),
            Some('"') => Value::Str(self.string()?),
            Some(c) if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') => {
                let (v, t) = self.number()?;
                Value::Num(v, t)
            }
            Some(_) => {
                let word = self.ident().ok_or_else(|| self.err("unexpected character"))?;
                self.skip_ws();
                if self.peek() == Some('(') {
                    self.pos += 1;
                    Value::Call(word, self.call_args()?)
                } else {
                    match word.as_str() {
                        "true" => Value::Bool(true),
                        "false" => Value::Bool(false),
                        _ => Value::Word(word),
                    }
                }
            }
        };
        Ok((v, col))
    }

    fn unit(&mut self) -> Result<Option<(Unit, usize)>> {
        self.skip_ws();
        if self.peek() != Some('[') {
            return Ok(None);
        }
        let col = self.col();
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c != ']') {
            self.pos += 1;
        }
        if self.peek() != Some(']') {
            return Err(Error::parse(self.line, col, "unterminated unit annotation"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        match Unit::parse(text.trim()) {
            Some(u) => Ok(Some((u, col))),
            None => Err(Error::Unit {
                line: self.line,
                column: col,
                message: format!("unknown unit '{}'", text.trim()),
            }),
        }
    }
}

enum Line {
    Blank,
    Section(String, usize),
    Entry(Entry),
}

fn lex_line(line: usize, text: &str) -> Result<Line> {
    let mut c = Cursor::new(line, text);
    if c.at_end() {
        return Ok(Line::Blank);
    }
    if c.peek() == Some('[') {
        c.pos += 1;
        c.skip_ws();
        let col = c.col();
        let name = c.ident().ok_or_else(|| c.err("expected a section name"))?;
        c.expect(']')?;
        if !c.at_end() {
            return Err(c.err("unexpected text after section header"));
        }
        return Ok(Line::Section(name, col));
    }
    let key_col = c.col();
    let key = c.ident().ok_or_else(|| c.err("expected a key"))?;
    c.expect('=')?;
    let (value, value_col) = c.value()?;
    let unit = c.unit()?;
    if !c.at_end() {
        return Err(c.err("unexpected text after value"));
    }
    Ok(Line::Entry(Entry {
        line,
        key,
        key_col,
        value,
        value_col,
        unit,
    }))
}

// ---------------------------------------------------------------- decoding

impl Entry {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.value_col, msg)
    }

    fn check_unit(&self, declared: Unit) -> Result<()> {
        match self.unit {
            Some((u, col)) if u != declared => Err(Error::Unit {
                line: self.line,
                column: col,
                message: format!("'{}' is in [{}], not [{}]", self.key, declared.name(), u.name()),
            }),
            _ => Ok(()),
        }
    }

    fn number(&self) -> Result<f64> {
        match &self.value {
            Value::Num(v, _) => Ok(*v),
            v => Err(self.err(format!("'{}' needs a number, found {}", self.key, v.describe()))),
        }
    }

    fn positive(&self) -> Result<f64> {
        let v = self.number()?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("'{}' must be positive", self.key)))
        }
    }

    fn integer(&self) -> Result<u64> {
        match &self.value {
            Value::Num(_, text) => text
                .parse::<u64>()
                .map_err(|_| self.err(format!("'{}' needs a non-negative integer", self.key))),
            v => Err(self.err(format!("'{}' needs an integer, found {}", self.key, v.describe()))),
        }
    }

    fn string(&self) -> Result<String> {
        match &self.value {
            Value::Str(s) => Ok(s.clone()),
            v => Err(self.err(format!("'{}' needs a string, found {}", self.key, v.describe()))),
        }
    }

    fn boolean(&self) -> Result<bool> {
        match &self.value {
            Value::Bool(b) => Ok(*b),
            v => Err(self.err(format!("'{}' needs true or false, found {}", self.key, v.describe()))),
        }
    }

    fn expr(&self, text: &str) -> Result<Expr> {
        // +1 skips the opening quote
        Expr::parse_at(text, self.line, self.value_col + 1)
    }

    fn args(&self, name: &str, args: &[(Arg, usize)], count: usize) -> Result<()> {
        if args.len() == count {
            Ok(())
        } else {
            Err(self.err(format!("{name}() takes {count} arguments, got {}", args.len())))
        }
    }

    fn arg_field(&self, a: &(Arg, usize)) -> Result<ScalarField> {
        match &a.0 {
            Arg::Num(v) => Ok(ScalarField::Constant(*v)),
            Arg::Str(s) => Ok(ScalarField::Expr(Expr::parse_at(s, self.line, a.1 + 1)?)),
            Arg::Call(f, args) => self
                .scalar_call(f, args)
                .unwrap_or_else(|| Err(Error::parse(self.line, a.1, format!("unknown field '{f}'")))),
        }
    }

    fn arg_num(&self, a: &(Arg, usize)) -> Result<f64> {
        match a.0 {
            Arg::Num(v) => Ok(v),
            _ => Err(Error::parse(self.line, a.1, "expected a number")),
        }
    }

    /// `bump(a, r)` and `linear(a, b)`; `None` for other names.
    fn scalar_call(&self, f: &str, args: &[(Arg, usize)]) -> Option<Result<ScalarField>> {
        let two = |s: &Self| -> Result<(f64, f64)> {
            s.args(f, args, 2)?;
            Ok((s.arg_num(&args[0])?, s.arg_num(&args[1])?))
        };
        match f {
            "bump" => Some(two(self).map(|(amplitude, radius)| ScalarField::Bump { amplitude, radius })),
            "linear" => Some(two(self).map(|(a, b)| ScalarField::Linear(vec![a, b]))),
            _ => None,
        }
    }

    fn scalar(&self) -> Result<ScalarField> {
        if let Value::Call(f, args) = &self.value {
            if let Some(r) = self.scalar_call(f, args) {
                return r;
            }
        }
        match &self.value {
            Value::Num(v, _) => Ok(ScalarField::Constant(*v)),
            Value::Str(s) => Ok(ScalarField::Expr(self.expr(s)?)),
            v => Err(self.err(format!(
                "'{}' needs a number, an expression string, bump(a, r) or linear(a, b), found {}",
                self.key,
                v.describe()
            ))),
        }
    }

    fn flow(&self) -> Result<VectorField> {
        match &self.value {
            Value::Word(w) if w == "zero" => Ok(VectorField::Zero),
            Value::Call(f, args) if f == "const" => {
                self.args(f, args, 2)?;
                Ok(VectorField::Constant(vec![self.arg_num(&args[0])?, self.arg_num(&args[1])?]))
            }
            Value::Call(f, args) if f == "vortex" => {
                self.args(f, args, 1)?;
                Ok(VectorField::Vortex {
                    strength: self.arg_num(&args[0])?,
                })
            }
            Value::Call(f, args) if f == "field" => {
                self.args(f, args, 2)?;
                Ok(VectorField::Components(vec![self.arg_field(&args[0])?, self.arg_field(&args[1])?]))
            }
            v => Err(self.err(format!(
                "'{}' needs zero, const(a, b), vortex(s) or field(\"e1\", \"e2\"), found {}",
                self.key,
                v.describe()
            ))),
        }
    }

    fn metric(&self) -> Result<MetricField> {
        match &self.value {
            Value::Word(w) if w == "euclidean" => Ok(MetricField::Euclidean),
            Value::Call(f, args) if f == "conformal" => {
                self.args(f, args, 1)?;
                Ok(MetricField::Conformal {
                    speed: self.arg_field(&args[0])?,
                })
            }
            Value::Call(f, args) if f == "matrix" => {
                self.args(f, args, 3)?;
                Ok(MetricField::Matrix {
                    upper: args.iter().map(|a| self.arg_field(a)).collect::<Result<_>>()?,
                })
            }
            v => Err(self.err(format!(
                "'{}' needs euclidean, conformal(c) or matrix(a11, a12, a22), found {}",
                self.key,
                v.describe()
            ))),
        }
    }

    fn one_form(&self) -> Result<OneForm> {
        match &self.value {
            Value::Word(w) if w == "zero" => Ok(OneForm::Zero),
            Value::Call(f, args) if f == "const" => {
                self.args(f, args, 2)?;
                Ok(OneForm::Constant(vec![self.arg_num(&args[0])?, self.arg_num(&args[1])?]))
            }
            Value::Call(f, args) if f == "rotational" => {
                self.args(f, args, 1)?;
                Ok(OneForm::Rotational {
                    strength: self.arg_num(&args[0])?,
                })
            }
            Value::Call(f, args) if f == "gradient" => {
                self.args(f, args, 1)?;
                Ok(OneForm::Gradient(self.arg_field(&args[0])?))
            }
            Value::Call(f, args) if f == "field" => {
                self.args(f, args, 2)?;
                Ok(OneForm::Components(VectorField::Components(vec![
                    self.arg_field(&args[0])?,
                    self.arg_field(&args[1])?,
                ])))
            }
            v => Err(self.err(format!(
                "'{}' needs zero, const(a, b), rotational(s), gradient(phi) or field(b1, b2), found {}",
                self.key,
                v.describe()
            ))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Top,
    Domain,
    Medium,
    Solver,
    Pipeline,
}

const KEYS: &[(Section, &str, Unit)] = &[
    (Section::Top, "name", Unit::One),
    (Section::Top, "seed", Unit::One),
    (Section::Domain, "R", Unit::Length),
    (Section::Domain, "inner", Unit::Length),
    (Section::Domain, "n", Unit::One),
    (Section::Medium, "c", Unit::Speed),
    (Section::Medium, "W", Unit::Speed),
    (Section::Medium, "model", Unit::One),
    (Section::Medium, "alpha", Unit::Slowness),
    (Section::Medium, "beta", Unit::Slowness),
    (Section::Medium, "phi", Unit::Time),
    (Section::Solver, "rtol", Unit::One),
    (Section::Solver, "atol", Unit::Length),
    (Section::Solver, "h_max", Unit::Length),
    (Section::Solver, "h_init", Unit::Length),
    (Section::Solver, "max_steps", Unit::One),
    (Section::Solver, "exit_tol", Unit::One),
    (Section::Solver, "fan", Unit::One),
    (Section::Solver, "miss_tol", Unit::Length),
    (Section::Solver, "refine_tol", Unit::Length),
    (Section::Solver, "min_separation", Unit::Length),
    (Section::Pipeline, "noise", Unit::Time),
    (Section::Pipeline, "compare", Unit::One),
    (Section::Pipeline, "data", Unit::One),
    (Section::Pipeline, "invert", Unit::One),
    (Section::Pipeline, "paths", Unit::One),
    (Section::Pipeline, "conjugate_scan", Unit::One),
];

fn section_name(s: Section) -> &'static str {
    match s {
        Section::Top => "top level",
        Section::Domain => "[domain]",
        Section::Medium => "[medium]",
        Section::Solver => "[solver]",
        Section::Pipeline => "[pipeline]",
    }
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut section = Section::Top;
    let mut seen: Vec<(Section, String)> = Vec::new();
    let mut seen_sections: Vec<Section> = Vec::new();
    let mut medium_keys: Vec<(String, usize, usize)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let e = match lex_line(line, raw)? {
            Line::Blank => continue,
            Line::Section(name, col) => {
                section = match name.as_str() {
                    "domain" => Section::Domain,
                    "medium" => Section::Medium,
                    "solver" => Section::Solver,
                    "pipeline" => Section::Pipeline,
                    _ => return Err(Error::parse(line, col, format!("unknown section [{name}]"))),
                };
                if seen_sections.contains(&section) {
                    return Err(Error::parse(line, col, format!("duplicate section [{name}]")));
                }
                seen_sections.push(section);
                continue;
            }
            Line::Entry(e) => e,
        };
        let unit = KEYS
            .iter()
            .find(|(s, key, _)| *s == section && *key == e.key)
            .map(|t| t.2)
            .ok_or_else(|| {
                Error::parse(line, e.key_col, format!("unknown key '{}' in {}", e.key, section_name(section)))
            })?;
        if seen.iter().any(|(s, key)| *s == section && *key == e.key) {
            return Err(Error::parse(line, e.key_col, format!("duplicate key '{}'", e.key)));
        }
        seen.push((section, e.key.clone()));
        e.check_unit(unit)?;
        let s = &mut cfg.solver;
        match (section, e.key.as_str()) {
            (Section::Top, "name") => cfg.name = e.string()?,
            (Section::Top, "seed") => cfg.seed = e.integer()?,
            (Section::Domain, "R") => cfg.domain.radius = e.positive()?,
            (Section::Domain, "inner") => cfg.domain.inner = Some(e.positive()?),
            (Section::Domain, "n") => {
                let n = e.integer()?;
                if n < 2 {
                    return Err(e.err("n must be at least 2"));
                }
                cfg.domain.n = n as usize;
            }
            (Section::Medium, key) => {
                medium_keys.push((key.to_string(), line, e.key_col));
                let m = &mut cfg.medium;
                match key {
                    "c" => m.speed = Some(e.scalar()?),
                    "W" => m.flow = Some(e.flow()?),
                    "model" => {
                        m.model = match &e.value {
                            Value::Word(w) if w == "zermelo" => Model::Zermelo,
                            Value::Word(w) if w == "linearized" => Model::Linearized,
                            _ => return Err(e.err("model is zermelo or linearized")),
                        }
                    }
                    "alpha" => m.alpha = Some(e.metric()?),
                    "beta" => m.beta = Some(e.one_form()?),
                    _ => m.phi = Some(e.scalar()?),
                }
            }
            (Section::Solver, "rtol") => s.rtol = Some(e.positive()?),
            (Section::Solver, "atol") => s.atol = Some(e.positive()?),
            (Section::Solver, "h_max") => s.h_max = Some(e.positive()?),
            (Section::Solver, "h_init") => s.h_init = Some(e.positive()?),
            (Section::Solver, "max_steps") => s.max_steps = Some(e.integer()? as usize),
            (Section::Solver, "exit_tol") => s.exit_tol = Some(e.positive()?),
            (Section::Solver, "fan") => {
                let f = e.integer()?;
                if f < 2 {
                    return Err(e.err("fan needs at least 2 directions"));
                }
                s.fan = Some(f as usize);
            }
            (Section::Solver, "miss_tol") => s.miss_tol = Some(e.positive()?),
            (Section::Solver, "refine_tol") => s.refine_tol = Some(e.positive()?),
            (Section::Solver, _) => s.min_separation = Some(e.positive()?),
            (Section::Pipeline, "noise") => {
                let v = e.number()?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(e.err("noise must be finite and >= 0"));
                }
                cfg.pipeline.noise = v;
            }
            (Section::Pipeline, "compare") => cfg.pipeline.compare = Some(e.string()?),
            (Section::Pipeline, "data") => cfg.pipeline.data = Some(e.string()?),
            (Section::Pipeline, "invert") => cfg.pipeline.invert = e.boolean()?,
            (Section::Pipeline, "paths") => cfg.pipeline.paths = e.integer()? as usize,
            (Section::Pipeline, _) => cfg.pipeline.conjugate_scan = e.boolean()?,
            _ => unreachable!("key table and match disagree"),
        }
    }
    let direct = medium_keys.iter().find(|k| k.0 == "alpha" || k.0 == "beta");
    let moving = medium_keys.iter().find(|k| k.0 == "c" || k.0 == "W" || k.0 == "model");
    if let (Some(d), Some(m)) = (direct, moving) {
        let later = if d.1 > m.1 { d } else { m };
        return Err(Error::parse(
            later.1,
            later.2,
            format!("'{}' cannot be combined with '{}': give either c/W/model or alpha/beta", d.0, m.0),
        ));
    }
    if let Some(inner) = cfg.domain.inner {
        if inner >= cfg.domain.radius {
            return Err(Error::Structural(format!(
                "inner radius {inner} must be below R = {}",
                cfg.domain.radius
            )));
        }
    }
    Ok(cfg)
}

// ---------------------------------------------------------------- emitting

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn scalar_text(f: &ScalarField) -> String {
    match f {
        ScalarField::Constant(v) => num(*v),
        ScalarField::Expr(e) => format!("\"{e}\""),
        ScalarField::Bump { amplitude, radius } => format!("bump({}, {})", num(*amplitude), num(*radius)),
        ScalarField::Linear(c) => format!(
            "linear({}, {})",
            num(c.first().copied().unwrap_or(0.0)),
            num(c.get(1).copied().unwrap_or(0.0))
        ),
    }
}

fn pair(v: &[f64]) -> String {
    format!(
        "{}, {}",
        num(v.first().copied().unwrap_or(0.0)),
        num(v.get(1).copied().unwrap_or(0.0))
    )
}

fn flow_text(w: &VectorField) -> Option<String> {
    Some(match w {
        VectorField::Zero => "zero".into(),
        VectorField::Constant(v) => format!("const({})", pair(v)),
        VectorField::Vortex { strength } => format!("vortex({})", num(*strength)),
        VectorField::Components(c) if c.len() == 2 => {
            format!("field({}, {})", scalar_text(&c[0]), scalar_text(&c[1]))
        }
        VectorField::Components(_) => return None,
    })
}

fn metric_text(a: &MetricField) -> Option<String> {
    Some(match a {
        MetricField::Euclidean => "euclidean".into(),
        MetricField::Conformal { speed } => format!("conformal({})", scalar_text(speed)),
        MetricField::Matrix { upper } if upper.len() == 3 => format!(
            "matrix({}, {}, {})",
            scalar_text(&upper[0]),
            scalar_text(&upper[1]),
            scalar_text(&upper[2])
        ),
        _ => return None,
    })
}

fn one_form_text(b: &OneForm) -> Option<String> {
    Some(match b {
        OneForm::Zero => "zero".into(),
        OneForm::Constant(v) => format!("const({})", pair(v)),
        OneForm::Rotational { strength } => format!("rotational({})", num(*strength)),
        OneForm::Gradient(phi) => format!("gradient({})", scalar_text(phi)),
        OneForm::Components(VectorField::Components(c)) if c.len() == 2 => {
            format!("field({}, {})", scalar_text(&c[0]), scalar_text(&c[1]))
        }
        _ => return None,
    })
}

impl ScenarioConfig {
    /// Canonical text: every section, fixed key order, units on every number.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = \"{}\"", self.name);
        let _ = writeln!(s, "seed = {} [1]", self.seed);
        let _ = writeln!(s, "\n[domain]");
        let _ = writeln!(s, "R = {} [length]", num(self.domain.radius));
        if let Some(inner) = self.domain.inner {
            let _ = writeln!(s, "inner = {} [length]", num(inner));
        }
        let _ = writeln!(s, "n = {} [1]", self.domain.n);
        let _ = writeln!(s, "\n[medium]");
        let m = &self.medium;
        if let Some(c) = &m.speed {
            let _ = writeln!(s, "c = {} [length/time]", scalar_text(c));
        }
        if let Some(w) = m.flow.as_ref().and_then(flow_text) {
            let _ = writeln!(s, "W = {w} [length/time]");
        }
        if m.alpha.is_none() && m.beta.is_none() {
            let model = match m.model {
                Model::Zermelo => "zermelo",
                Model::Linearized => "linearized",
            };
            let _ = writeln!(s, "model = {model}");
        }
        if let Some(a) = m.alpha.as_ref().and_then(metric_text) {
            let _ = writeln!(s, "alpha = {a} [time/length]");
        }
        if let Some(b) = m.beta.as_ref().and_then(one_form_text) {
            let _ = writeln!(s, "beta = {b} [time/length]");
        }
        if let Some(phi) = &m.phi {
            let _ = writeln!(s, "phi = {} [time]", scalar_text(phi));
        }
        let _ = writeln!(s, "\n[solver]");
        let v = &self.solver;
        let reals = [
            ("rtol", v.rtol, "1"),
            ("atol", v.atol, "length"),
            ("h_max", v.h_max, "length"),
            ("h_init", v.h_init, "length"),
            ("exit_tol", v.exit_tol, "1"),
            ("miss_tol", v.miss_tol, "length"),
            ("refine_tol", v.refine_tol, "length"),
            ("min_separation", v.min_separation, "length"),
        ];
        for (key, val, unit) in reals {
            if let Some(x) = val {
                let _ = writeln!(s, "{key} = {} [{unit}]", num(x));
            }
        }
        for (key, val) in [("max_steps", v.max_steps), ("fan", v.fan)] {
            if let Some(x) = val {
                let _ = writeln!(s, "{key} = {x} [1]");
            }
        }
        let p = &self.pipeline;
        let _ = writeln!(s, "\n[pipeline]");
        let _ = writeln!(s, "noise = {} [time]", num(p.noise));
        if let Some(c) = &p.compare {
            let _ = writeln!(s, "compare = \"{c}\"");
        }
        if let Some(d) = &p.data {
            let _ = writeln!(s, "data = \"{d}\"");
        }
        let _ = writeln!(s, "invert = {}", p.invert);
        let _ = writeln!(s, "paths = {} [1]", p.paths);
        let _ = writeln!(s, "conjugate_scan = {}", p.conjugate_scan);
        s
    }

    pub fn domain(&self) -> Result<Domain> {
        match self.domain.inner {
            Some(inner) => Domain::annulus(inner, self.domain.radius),
            None => Domain::disk(self.domain.radius),
        }
    }

    /// The Randers norm described by the medium block.
    pub fn spec(&self) -> Result<RandersSpec<2>> {
        let domain = self.domain()?;
        let m = &self.medium;
        let base = if m.alpha.is_some() || m.beta.is_some() {
            RandersSpec::new(
                domain,
                m.alpha.clone().unwrap_or(MetricField::Euclidean),
                m.beta.clone().unwrap_or(OneForm::Zero),
            )?
        } else {
            let c = m.speed.clone().unwrap_or(ScalarField::Constant(1.0));
            let w = m.flow.clone().unwrap_or(VectorField::Zero);
            match m.model {
                Model::Linearized => linearize(domain, &c, &w)?.spec,
                Model::Zermelo if w.is_zero() => {
                    RandersSpec::riemannian(domain, MetricField::Conformal { speed: c })?
                }
                Model::Zermelo => conformal_specialize(domain, &c, &w)?,
            }
        };
        match &m.phi {
            Some(phi) => base.with_beta(base.beta().clone().plus(OneForm::Gradient(phi.clone()))),
            None => Ok(base),
        }
    }

    /// The moving medium, when the scenario is given as one.
    pub fn medium_model(&self) -> Result<Option<MediumModel>> {
        let m = &self.medium;
        if m.alpha.is_some() || m.beta.is_some() || m.model == Model::Linearized {
            return Ok(None);
        }
        Ok(Some(MediumModel::conformal(
            self.domain()?,
            m.speed.clone().unwrap_or(ScalarField::Constant(1.0)),
            m.flow.clone().unwrap_or(VectorField::Zero),
        )))
    }

    /// Exact Zermelo spec of the medium; matches [`Self::spec`] up to the
    /// metric representation.
    pub fn zermelo_spec(&self) -> Result<Option<RandersSpec<2>>> {
        self.medium_model()?.map(|m| zermelo_construct(&m)).transpose()
    }

    pub fn shooting_options(&self) -> ShootingOptions {
        let r = self.domain.radius;
        let mut o = ShootingOptions::for_radius(r);
        let s = &self.solver;
        if let Some(v) = s.rtol {
            o.geodesic.ode.rtol = v;
        }
        if let Some(v) = s.atol {
            o.geodesic.ode.atol = v;
        }
        if let Some(v) = s.h_max {
            o.geodesic.ode.h_max = v;
        }
        if let Some(v) = s.h_init {
            o.geodesic.ode.h_init = v;
        }
        if let Some(v) = s.max_steps {
            o.geodesic.ode.max_steps = v;
        }
        if let Some(v) = s.exit_tol {
            o.geodesic.exit_tol = v;
        }
        if let Some(v) = s.fan {
            o.fan_size = v;
        }
        if let Some(v) = s.miss_tol {
            o.miss_tol = v / r;
        }
        if let Some(v) = s.refine_tol {
            o.refine_tol = v / r;
        }
        o
    }

    pub fn matrix_options(&self) -> MatrixOptions {
        let mut o = MatrixOptions::for_radius(self.domain.radius);
        o.shooting = self.shooting_options();
        if let Some(v) = self.solver.min_separation {
            o.min_separation = v / self.domain.radius;
        }
        o
    }

    pub fn report_options(&self) -> ReportOptions {
        let mut o = ReportOptions::for_radius(self.domain.radius);
        o.matrix = self.matrix_options();
        o.invert_profiles = self.pipeline.invert;
        o.herglotz = HerglotzOptions::default();
        o
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::new(self.name.clone(), self.spec()?, self.domain.n);
        s.potential = self.medium.phi.clone();
        Ok(s)
    }
}
