//! Dependency expressions and tri-valued evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Kconfig truth value: `n` < `m` < `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tri {
    #[serde(rename = "n")]
    N = 0,
    #[serde(rename = "m")]
    M = 1,
    #[serde(rename = "y")]
    Y = 2,
}

impl Tri {
    pub const ALL: [Tri; 3] = [Tri::N, Tri::M, Tri::Y];

    pub fn from_level(level: u8) -> Tri {
        match level {
            0 => Tri::N,
            1 => Tri::M,
            _ => Tri::Y,
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn parse(text: &str) -> Option<Tri> {
        match text {
            "n" => Some(Tri::N),
            "m" => Some(Tri::M),
            "y" => Some(Tri::Y),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tri::N => "n",
            Tri::M => "m",
            Tri::Y => "y",
        }
    }

}

impl std::ops::Not for Tri {
    type Output = Tri;

    fn not(self) -> Tri {
        Tri::from_level(2 - self.level())
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operand of a comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    Sym(String),
    Lit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Const(Tri),
    Sym(String),
    /// Numeric or quoted literal; evaluates to `n` in a boolean context.
    Lit(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Eq(Atom, Atom),
    Ne(Atom, Atom),
}

impl Expr {
    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::Sym(name.into())
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    /// Left fold of `parts` with `&&`; `None` when empty.
    pub fn conjunction<I: IntoIterator<Item = Expr>>(parts: I) -> Option<Expr> {
        parts.into_iter().reduce(Expr::and)
    }

    /// Every symbol name referenced, in first-occurrence order.
    pub fn symbols(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols<'a>(&'a self, out: &mut Vec<&'a str>) {
        let mut push = |s: &'a str| {
            if !out.contains(&s) {
                out.push(s);
            }
        };
        match self {
            Expr::Const(_) | Expr::Lit(_) => {}
            Expr::Sym(s) => push(s),
            Expr::Not(e) => e.collect_symbols(out),
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            Expr::Eq(a, b) | Expr::Ne(a, b) => {
                for atom in [a, b] {
                    if let Atom::Sym(s) = atom {
                        push(s);
                    }
                }
            }
        }
    }

    /// Top-level `&&` terms.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    /// True if `name` appears as a bare top-level conjunct.
    pub fn requires_symbol(&self, name: &str) -> bool {
        self.conjuncts().iter().any(|e| matches!(e, Expr::Sym(s) if s == name))
    }

    /// Evaluates under `env`, which resolves a symbol to its tri value and
    /// its string form.
    pub fn eval<E: Env + ?Sized>(&self, env: &E) -> Tri {
        match self {
            Expr::Const(t) => *t,
            Expr::Sym(s) => env.tri(s),
            Expr::Lit(l) => Tri::parse(l).unwrap_or(Tri::N),
            Expr::Not(e) => !e.eval(env),
            Expr::And(a, b) => a.eval(env).min(b.eval(env)),
            Expr::Or(a, b) => a.eval(env).max(b.eval(env)),
            Expr::Eq(a, b) => bool_tri(atom_text(a, env) == atom_text(b, env)),
            Expr::Ne(a, b) => bool_tri(atom_text(a, env) != atom_text(b, env)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Eq(..) | Expr::Ne(..) => 3,
            Expr::Not(_) => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, child: &Expr, right: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, c) = (self.precedence(), child.precedence());
        if c < p || (right && c == p) {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

fn bool_tri(b: bool) -> Tri {
    if b {
        Tri::Y
    } else {
        Tri::N
    }
}

fn atom_text<E: Env + ?Sized>(atom: &Atom, env: &E) -> String {
    match atom {
        Atom::Sym(s) => env.text(s),
        Atom::Lit(l) => normalize_literal(l),
    }
}

/// Hex literals compare case-insensitively.
pub(crate) fn normalize_literal(l: &str) -> String {
    if let Some(h) = l.strip_prefix("0x").or_else(|| l.strip_prefix("0X")) {
        format!("0x{}", h.to_ascii_lowercase())
    } else {
        l.to_string()
    }
}

/// Symbol resolution for [`Expr::eval`].
pub trait Env {
    fn tri(&self, sym: &str) -> Tri;
    fn text(&self, sym: &str) -> String;
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sym(s) => f.write_str(s),
            Atom::Lit(l) => write_literal(l, f),
        }
    }
}

fn write_literal(l: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let bare = !l.is_empty() && l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if bare && Tri::parse(l).is_none() && l.starts_with(|c: char| c.is_ascii_digit()) {
        f.write_str(l)
    } else {
        write!(f, "\"{}\"", escape(l))
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(t) => write!(f, "{t}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Lit(l) => write_literal(l, f),
            Expr::Not(e) => {
                f.write_str("!")?;
                self.fmt_child(e, false, f)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                self.fmt_child(a, false, f)?;
                f.write_str(if matches!(self, Expr::And(..)) { " && " } else { " || " })?;
                self.fmt_child(b, true, f)
            }
            Expr::Eq(a, b) => write!(f, "{a} = {b}"),
            Expr::Ne(a, b) => write!(f, "{a} != {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    Word(String),
    Str(String),
    LParen,
    RParen,
    Bang,
    AndAnd,
    OrOr,
    Equal,
    NotEqual,
}

/// Splits one logical line into tokens. `#` starts a comment outside quotes.
pub(crate) fn lex(line: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' | '\r' => {
                chars.next();
            }
            '#' => break,
            '(' => {
                chars.next();
                out.push(Token::LParen);
            }
            ')' => {
                chars.next();
                out.push(Token::RParen);
            }
            '!' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    out.push(Token::NotEqual);
                } else {
                    out.push(Token::Bang);
                }
            }
            '=' => {
                chars.next();
                out.push(Token::Equal);
            }
            '&' | '|' => {
                chars.next();
                if chars.next() != Some(c) {
                    return Err(format!("`{c}{c}`"));
                }
                out.push(if c == '&' { Token::AndAnd } else { Token::OrOr });
            }
            '"' | '\'' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err("closing quote".into()),
                        Some('\\') => match chars.next() {
                            Some(e) => s.push(e),
                            None => return Err("closing quote".into()),
                        },
                        Some(q) if q == c => break,
                        Some(o) => s.push(o),
                    }
                }
                out.push(Token::Str(s));
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                        w.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token::Word(w));
            }
            other => return Err(format!("a token, found `{other}`")),
        }
    }
    Ok(out)
}

/// Recursive-descent parser over a token slice.
pub(crate) struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    pub(crate) fn new(toks: &'a [Token]) -> Self {
        ExprParser { toks, pos: 0 }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    pub(crate) fn rest(&self) -> &'a [Token] {
        &self.toks[self.pos.min(self.toks.len())..]
    }

    pub(crate) fn parse_expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Token::OrOr) {
            self.pos += 1;
            lhs = Expr::or(lhs, self.parse_and()?);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, String> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.pos += 1;
            lhs = Expr::and(lhs, self.parse_unary()?);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some(Token::Bang) => {
                self.pos += 1;
                Ok(Expr::not(self.parse_unary()?))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.parse_expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err("`)`".into());
                }
                self.pos += 1;
                Ok(e)
            }
            _ => {
                let lhs = self.parse_atom()?;
                let op = match self.peek() {
                    Some(Token::Equal) => Token::Equal,
                    Some(Token::NotEqual) => Token::NotEqual,
                    _ => return Ok(atom_expr(lhs)),
                };
                self.pos += 1;
                let rhs = self.parse_atom()?;
                Ok(if op == Token::Equal { Expr::Eq(lhs, rhs) } else { Expr::Ne(lhs, rhs) })
            }
        }
    }

    fn parse_atom(&mut self) -> Result<Atom, String> {
        let atom = match self.peek() {
            Some(Token::Word(w)) if w.starts_with(|c: char| c.is_ascii_digit()) || Tri::parse(w).is_some() => {
                Atom::Lit(w.clone())
            }
            Some(Token::Word(w)) if is_symbol(w) => Atom::Sym(w.clone()),
            Some(Token::Str(s)) => Atom::Lit(s.clone()),
            _ => return Err("a symbol or literal".into()),
        };
        self.pos += 1;
        Ok(atom)
    }
}

fn atom_expr(atom: Atom) -> Expr {
    match atom {
        Atom::Sym(s) => Expr::Sym(s),
        Atom::Lit(l) => match Tri::parse(&l) {
            Some(t) => Expr::Const(t),
            None => Expr::Lit(l),
        },
    }
}

pub(crate) fn is_symbol(w: &str) -> bool {
    !w.is_empty()
        && !w.contains('-')
        && w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !w.starts_with(|c: char| c.is_ascii_digit())
}

/// Parses a standalone expression, mainly for tests and tools.
pub fn parse_expr(text: &str) -> Result<Expr, String> {
    let toks = lex(text)?;
    let mut p = ExprParser::new(&toks);
    let e = p.parse_expr()?;
    if !p.at_end() {
        return Err("end of expression".into());
    }
    Ok(e)
}
