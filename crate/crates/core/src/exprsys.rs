//! A small expression language so systems can be defined in plain-text
//! configuration files and compiled to evaluable vector fields.
//!
//! File format, by section:
//!
//! ```text
//! [states]
//! x1, x2
//!
//! [params]
//! m = 0.75
//!
//! [flow]
//! x1' = x2 * x1^2 - m * x1
//! x2' = -x2 * x1^2 - x2
//!
//! [kickrate]
//! r_x1 = 0
//! r_x2 = lambda
//!
//! [domain]
//! x1 in [0, inf]
//! x2 in [0, inf]
//! ```
//!
//! Expression grammar (EBNF):
//!
//! ```text
//! expr   := term { ("+" | "-") term }
//! term   := unary { ("*" | "/") unary }
//! unary  := "-" unary | power
//! power  := atom [ "^" unary ]
//! atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-(2^2) = -4`, while unary minus binds tighter than `*`. Functions:
//! `exp`, `ln`, `sin`, `cos`, `sqrt`, `abs`. `lambda` names the disturbance
//! parameter and is only meaningful in `[kickrate]` expressions; the flow
//! must not depend on it. Comments run from `#` to end of line. No
//! conditionals or piecewise forms: the analysis assumes smooth fields.

use std::sync::Arc;

use crate::dynamics::{DomainBox, SystemDef};
use crate::error::{FkError, Result};
use crate::{c, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn by_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Resolved variable reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    State(usize),
    Lambda,
    Param(usize),
}

/// Expression tree with all identifiers resolved at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Num(f64),
    Var(VarRef),
    Neg(Box<ExprAst>),
    Bin(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

impl ExprAst {
    /// Evaluates with the crate's power convention: integral exponents by
    /// repeated squaring, fractional exponents through `exp(ln)` for
    /// positive bases (NaN otherwise).
    pub fn eval<T: Scalar>(&self, state: &[T], lambda: T, params: &[T]) -> T {
        match self {
            ExprAst::Num(v) => c(*v),
            ExprAst::Var(VarRef::State(i)) => state[*i],
            ExprAst::Var(VarRef::Lambda) => lambda,
            ExprAst::Var(VarRef::Param(i)) => params[*i],
            ExprAst::Neg(e) => -e.eval(state, lambda, params),
            ExprAst::Bin(op, a, b) => {
                let x = a.eval(state, lambda, params);
                let y = b.eval(state, lambda, params);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => pow_value(x, y),
                }
            }
            ExprAst::Call(f, e) => {
                let v = e.eval(state, lambda, params);
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    /// Fully parenthesized text form; re-parsing it yields an AST with
    /// identical evaluations.
    pub fn pretty(&self, names: &NameTable) -> String {
        match self {
            ExprAst::Num(v) => {
                if *v < 0.0 {
                    format!("({v})")
                } else {
                    format!("{v}")
                }
            }
            ExprAst::Var(VarRef::State(i)) => names.states[*i].clone(),
            ExprAst::Var(VarRef::Lambda) => "lambda".into(),
            ExprAst::Var(VarRef::Param(i)) => names.params[*i].clone(),
            ExprAst::Neg(e) => format!("(-{})", e.pretty(names)),
            ExprAst::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                format!("({} {} {})", a.pretty(names), sym, b.pretty(names))
            }
            ExprAst::Call(f, e) => format!("{}({})", f.name(), e.pretty(names)),
        }
    }
}

fn pow_value<T: Scalar>(base: T, exponent: T) -> T {
    let rounded = exponent.round();
    if (exponent - rounded).abs() < T::epsilon() && rounded.abs() <= c(64.0) {
        let k = rounded.to_i32().unwrap_or(0);
        return base.powi(k);
    }
    if base > T::zero() {
        (exponent * base.ln()).exp()
    } else {
        T::nan()
    }
}

/// Identifier context for parsing and pretty-printing.
#[derive(Debug, Clone, Default)]
pub struct NameTable {
    pub states: Vec<String>,
    pub params: Vec<String>,
    pub allow_lambda: bool,
}

impl NameTable {
    fn resolve(&self, name: &str) -> Option<VarRef> {
        if name == "lambda" {
            return self.allow_lambda.then_some(VarRef::Lambda);
        }
        if let Some(i) = self.states.iter().position(|s| s == name) {
            return Some(VarRef::State(i));
        }
        self.params
            .iter()
            .position(|p| p == name)
            .map(VarRef::Param)
    }
}

/// Parsed system specification before compilation.
#[derive(Debug, Clone)]
pub struct SystemSpecFile {
    pub name: Option<String>,
    pub states: Vec<String>,
    pub params: Vec<(String, f64)>,
    pub flow: Vec<ExprAst>,
    pub kickrate: Vec<ExprAst>,
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
}

// ---------------------------------------------------------------------------
// expression lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of expression".into(),
        }
    }
}

struct ExprParser<'a> {
    tokens: Vec<(Tok, usize)>, // (token, column)
    pos: usize,
    names: &'a NameTable,
    line: usize,
}

impl<'a> ExprParser<'a> {
    fn tokenize(text: &str, line: usize, col_offset: usize) -> Result<Vec<(Tok, usize)>> {
        let mut out = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0usize;
        while i < chars.len() {
            let ch = chars[i];
            let col = col_offset + i + 1;
            match ch {
                ' ' | '\t' => i += 1,
                '+' => {
                    out.push((Tok::Plus, col));
                    i += 1;
                }
                '-' => {
                    out.push((Tok::Minus, col));
                    i += 1;
                }
                '*' => {
                    out.push((Tok::Star, col));
                    i += 1;
                }
                '/' => {
                    out.push((Tok::Slash, col));
                    i += 1;
                }
                '^' => {
                    out.push((Tok::Caret, col));
                    i += 1;
                }
                '(' => {
                    out.push((Tok::LParen, col));
                    i += 1;
                }
                ')' => {
                    out.push((Tok::RParen, col));
                    i += 1;
                }
                c0 if c0.is_ascii_digit() || c0 == '.' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_digit()
                            || chars[i] == '.'
                            || chars[i] == 'e'
                            || chars[i] == 'E'
                            || ((chars[i] == '+' || chars[i] == '-')
                                && i > start
                                && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                    {
                        i += 1;
                    }
                    let raw: String = chars[start..i].iter().collect();
                    let v = raw.parse::<f64>().map_err(|_| FkError::Parse {
                        line,
                        col,
                        msg: format!("malformed number '{raw}'"),
                    })?;
                    out.push((Tok::Num(v), col));
                }
                c0 if c0.is_ascii_alphabetic() || c0 == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                    {
                        i += 1;
                    }
                    out.push((Tok::Ident(chars[start..i].iter().collect()), col));
                }
                other => {
                    return Err(FkError::Parse {
                        line,
                        col,
                        msg: format!("unexpected character '{other}'"),
                    })
                }
            }
        }
        out.push((Tok::End, col_offset + chars.len() + 1));
        Ok(out)
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn col(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> FkError {
        FkError::Parse {
            line: self.line,
            col: self.col(),
            msg: format!("expected {expected}, found {}", self.peek().describe()),
        }
    }

    fn parse_expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = ExprAst::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = ExprAst::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = ExprAst::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = ExprAst::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<ExprAst> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(ExprAst::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<ExprAst> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            // right-associative, and tighter than unary minus
            let exponent = self.parse_unary()?;
            return Ok(ExprAst::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<ExprAst> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(ExprAst::Num(v))
            }
            Tok::Ident(name) => {
                let col = self.col();
                self.bump();
                if matches!(self.peek(), Tok::LParen) {
                    let func = Func::by_name(&name).ok_or_else(|| FkError::Parse {
                        line: self.line,
                        col,
                        msg: format!(
                            "unknown function '{name}' (expected exp, ln, sin, cos, sqrt, abs)"
                        ),
                    })?;
                    self.bump(); // (
                    let arg = self.parse_expr()?;
                    if !matches!(self.peek(), Tok::RParen) {
                        return Err(self.err("')'"));
                    }
                    self.bump();
                    Ok(ExprAst::Call(func, Box::new(arg)))
                } else {
                    let var = self.names.resolve(&name).ok_or_else(|| FkError::Parse {
                        line: self.line,
                        col,
                        msg: if name == "lambda" {
                            "'lambda' is only available in [kickrate] expressions".into()
                        } else {
                            format!("unknown identifier '{name}'")
                        },
                    })?;
                    Ok(ExprAst::Var(var))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.err("')'"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.err("a number, identifier, or '('")),
        }
    }
}

/// Parses a standalone expression against a name table. `line` and
/// `col_offset` locate the text inside a larger file for error reporting.
pub fn parse_expr(
    text: &str,
    names: &NameTable,
    line: usize,
    col_offset: usize,
) -> Result<ExprAst> {
    let tokens = ExprParser::tokenize(text, line, col_offset)?;
    let mut parser = ExprParser {
        tokens,
        pos: 0,
        names,
        line,
    };
    let ast = parser.parse_expr()?;
    if !matches!(parser.peek(), Tok::End) {
        return Err(parser.err("end of expression"));
    }
    Ok(ast)
}

// ---------------------------------------------------------------------------
// file parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    States,
    Params,
    Flow,
    KickRate,
    Domain,
    Meta,
}

/// Parses the sectioned plain-text system description.
pub fn parse_spec_file(text: &str) -> Result<SystemSpecFile> {
    let mut section = Section::None;
    let mut name: Option<String> = None;
    let mut states: Vec<String> = Vec::new();
    let mut params: Vec<(String, f64)> = Vec::new();
    let mut flow_lines: Vec<(String, String, usize, usize)> = Vec::new(); // state, expr, line, col
    let mut kick_lines: Vec<(String, String, usize, usize)> = Vec::new();
    let mut domain_lines: Vec<(String, f64, f64)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            section = match trimmed {
                "[states]" => Section::States,
                "[params]" => Section::Params,
                "[flow]" => Section::Flow,
                "[kickrate]" => Section::KickRate,
                "[domain]" => Section::Domain,
                "[meta]" => Section::Meta,
                other => {
                    return Err(FkError::Parse {
                        line: line_no,
                        col: 1,
                        msg: format!(
                            "unknown section {other}; expected [states], [params], [flow], [kickrate], [domain], or [meta]"
                        ),
                    })
                }
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(FkError::Parse {
                    line: line_no,
                    col: 1,
                    msg: "content before any section header".into(),
                })
            }
            Section::States => {
                for part in trimmed.split(',') {
                    let s = part.trim();
                    if s.is_empty() {
                        continue;
                    }
                    if !is_identifier(s) {
                        return Err(FkError::Parse {
                            line: line_no,
                            col: 1,
                            msg: format!("invalid state name '{s}'"),
                        });
                    }
                    if s == "lambda" {
                        return Err(FkError::Parse {
                            line: line_no,
                            col: 1,
                            msg: "'lambda' is reserved for the disturbance parameter".into(),
                        });
                    }
                    states.push(s.to_string());
                }
            }
            Section::Params => {
                let (key, value) = split_assignment(trimmed, line_no)?;
                let v: f64 = value.trim().parse().map_err(|_| FkError::Parse {
                    line: line_no,
                    col: 1,
                    msg: format!("parameter '{key}' needs a numeric value, got '{value}'"),
                })?;
                params.push((key, v));
            }
            Section::Flow => {
                let (lhs, rhs) = split_assignment(trimmed, line_no)?;
                let state = lhs.strip_suffix('\'').ok_or_else(|| FkError::Parse {
                    line: line_no,
                    col: 1,
                    msg: format!("flow lines look like \"<state>' = <expr>\", got '{lhs}'"),
                })?;
                let col = line.find('=').map(|p| p + 2).unwrap_or(1);
                flow_lines.push((state.trim().to_string(), rhs, line_no, col));
            }
            Section::KickRate => {
                let (lhs, rhs) = split_assignment(trimmed, line_no)?;
                let state = lhs.strip_prefix("r_").ok_or_else(|| FkError::Parse {
                    line: line_no,
                    col: 1,
                    msg: format!("kick-rate lines look like \"r_<state> = <expr>\", got '{lhs}'"),
                })?;
                let col = line.find('=').map(|p| p + 2).unwrap_or(1);
                kick_lines.push((state.trim().to_string(), rhs, line_no, col));
            }
            Section::Domain => {
                let (state, lo, hi) = parse_domain_line(trimmed, line_no)?;
                domain_lines.push((state, lo, hi));
            }
            Section::Meta => {
                let (key, value) = split_assignment(trimmed, line_no)?;
                if key == "name" {
                    name = Some(value);
                }
            }
        }
    }

    if states.is_empty() {
        return Err(FkError::Parse {
            line: 1,
            col: 1,
            msg: "no [states] declared".into(),
        });
    }
    let n = states.len();

    let flow_names = NameTable {
        states: states.clone(),
        params: params.iter().map(|(k, _)| k.clone()).collect(),
        allow_lambda: false,
    };
    let kick_names = NameTable {
        allow_lambda: true,
        ..flow_names.clone()
    };

    let mut flow: Vec<Option<ExprAst>> = vec![None; n];
    for (state, expr_text, line_no, col) in &flow_lines {
        let i = states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| FkError::Parse {
                line: *line_no,
                col: 1,
                msg: format!("flow equation for undeclared state '{state}'"),
            })?;
        if flow[i].is_some() {
            return Err(FkError::Parse {
                line: *line_no,
                col: 1,
                msg: format!("duplicate flow equation for '{state}'"),
            });
        }
        flow[i] = Some(parse_expr(expr_text, &flow_names, *line_no, *col)?);
    }
    let mut kick: Vec<Option<ExprAst>> = vec![None; n];
    for (state, expr_text, line_no, col) in &kick_lines {
        let i = states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| FkError::Parse {
                line: *line_no,
                col: 1,
                msg: format!("kick-rate equation for undeclared state '{state}'"),
            })?;
        if kick[i].is_some() {
            return Err(FkError::Parse {
                line: *line_no,
                col: 1,
                msg: format!("duplicate kick-rate equation for '{state}'"),
            });
        }
        kick[i] = Some(parse_expr(expr_text, &kick_names, *line_no, *col)?);
    }

    let flow: Vec<ExprAst> = flow
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            e.ok_or_else(|| FkError::Parse {
                line: 1,
                col: 1,
                msg: format!("missing flow equation for state '{}'", states[i]),
            })
        })
        .collect::<Result<_>>()?;
    let kickrate: Vec<ExprAst> = kick
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            e.ok_or_else(|| FkError::Parse {
                line: 1,
                col: 1,
                msg: format!("missing kick-rate equation for state '{}'", states[i]),
            })
        })
        .collect::<Result<_>>()?;

    let domain = if domain_lines.is_empty() {
        None
    } else {
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for (state, l, h) in &domain_lines {
            let i = states
                .iter()
                .position(|s| s == state)
                .ok_or_else(|| FkError::Parse {
                    line: 1,
                    col: 1,
                    msg: format!("domain bound for undeclared state '{state}'"),
                })?;
            lo[i] = *l;
            hi[i] = *h;
        }
        Some((lo, hi))
    };

    Ok(SystemSpecFile {
        name,
        states,
        params,
        flow,
        kickrate,
        domain,
    })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c0) if c0.is_ascii_alphabetic() || c0 == '_' => {}
        _ => return false,
    }
    chars.all(|c0| c0.is_ascii_alphanumeric() || c0 == '_')
}

fn split_assignment(line: &str, line_no: usize) -> Result<(String, String)> {
    let pos = line.find('=').ok_or_else(|| FkError::Parse {
        line: line_no,
        col: line.len(),
        msg: "expected '=' in this line".into(),
    })?;
    let key = line[..pos].trim().to_string();
    let value = line[pos + 1..].trim().to_string();
    if key.is_empty() || value.is_empty() {
        return Err(FkError::Parse {
            line: line_no,
            col: pos + 1,
            msg: "empty side of '='".into(),
        });
    }
    Ok((key, value))
}

fn parse_domain_line(line: &str, line_no: usize) -> Result<(String, f64, f64)> {
    // "<state> in [lo, hi]" with inf / -inf allowed
    let err = |msg: String| FkError::Parse {
        line: line_no,
        col: 1,
        msg,
    };
    let (state, rest) = line
        .split_once(" in ")
        .ok_or_else(|| err("domain lines look like \"<state> in [lo, hi]\"".into()))?;
    let rest = rest.trim();
    let inner = rest
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| err("domain bounds need brackets: [lo, hi]".into()))?;
    let (lo_s, hi_s) = inner
        .split_once(',')
        .ok_or_else(|| err("domain bounds need a comma: [lo, hi]".into()))?;
    let parse_bound = |s: &str| -> Result<f64> {
        match s.trim() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            v => v
                .parse::<f64>()
                .map_err(|_| err(format!("malformed domain bound '{v}'"))),
        }
    };
    Ok((state.trim().to_string(), parse_bound(lo_s)?, parse_bound(hi_s)?))
}

// ---------------------------------------------------------------------------
// compilation
// ---------------------------------------------------------------------------

/// Compiles a parsed specification to a [`SystemDef`].
pub fn compile<T: Scalar>(spec: &SystemSpecFile) -> SystemDef<T> {
    let n = spec.states.len();
    let params: Vec<f64> = spec.params.iter().map(|(_, v)| *v).collect();

    let flow_exprs: Arc<Vec<ExprAst>> = Arc::new(spec.flow.clone());
    let params_f = params.clone();
    let f: crate::dynamics::FieldFn<T> = Arc::new(move |x: &[T], out: &mut [T]| {
        let pv: Vec<T> = params_f.iter().map(|&v| c(v)).collect();
        for (i, e) in flow_exprs.iter().enumerate() {
            out[i] = e.eval(x, T::zero(), &pv);
        }
    });

    let kick_exprs: Arc<Vec<ExprAst>> = Arc::new(spec.kickrate.clone());
    let params_r = params;
    let r: crate::dynamics::RateFn<T> = Arc::new(move |x: &[T], lambda: T, out: &mut [T]| {
        let pv: Vec<T> = params_r.iter().map(|&v| c(v)).collect();
        for (i, e) in kick_exprs.iter().enumerate() {
            out[i] = e.eval(x, lambda, &pv);
        }
    });

    let mut sys = SystemDef::new(n, f, r)
        .with_name(spec.name.clone().unwrap_or_else(|| "custom".into()))
        .with_state_names(spec.states.clone());
    if let Some((lo, hi)) = &spec.domain {
        sys = sys.with_domain(DomainBox::new(
            lo.iter().map(|&v| c(v)).collect(),
            hi.iter().map(|&v| c(v)).collect(),
        ));
    }
    sys
}

/// Parses and compiles a system description in one step.
pub fn parse_system<T: Scalar>(text: &str) -> Result<SystemDef<T>> {
    let spec = parse_spec_file(text)?;
    Ok(compile(&spec))
}
