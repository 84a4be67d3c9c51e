//! Lexer and recursive-descent parser for the surface syntax, expanding all
//! sugar (`let`, sequencing, `observe`, `diff1`, `unroll`) so downstream
//! modules only see core forms.
//!
//! ```text
//! term   := "lam" ident ":" type "." term
//!         | "let" ident [":" type] "=" term "in" term
//!         | "if" term "then" term "else" term
//!         | "assume" aterm | "weight" aterm | "infer" aterm
//!         | "diffA" aterm aterm | "diffP" aterm aterm
//!         | "diff1A" aterm aterm | "diff1P" aterm aterm
//!         | "solve" aterm aterm aterm
//!         | "observe" aterm "from" dist
//!         | "unroll" nat aterm
//!         | appterm                        # with infix + - * /
//! appterm:= appterm aterm | aterm
//! aterm  := ident | number | "(" [term {"," term}] ")" | aterm "." nat
//!         | prim "(" term {"," term} ")" | dist
//! prim   := "sin" | "cos" | "pdfGaussian" | "pdfBeta" | "wiener"
//! dist   := "Gaussian" "(" term "," term ")" | "Beta" "(" term "," term ")"
//!         | "Wiener" "(" ")"
//! type   := btype ["->det" type | "->rnd" type]
//! btype  := "RealA" | "RealP" | "RealN" | "Dist" btype
//!         | "(" [type {"," type}] ")"
//! ```
//!
//! Whitespace-insensitive; `#` starts a line comment. Numbers are decimal
//! literals with an optional exponent (there is no integer type: `2` lexes
//! as `2.0`).

use std::fmt;
use std::sync::Arc;

use crate::ast::{subst, Coeffect, DiffMode, Effect, PrimDist, PrimFn, Term, TermRef, TypeExpr};
use crate::dist::WienerHandle;

/// A program source: text plus a file name used only in diagnostics.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub text: String,
    pub filename: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, filename: impl Into<String>) -> SourceProgram {
        SourceProgram {
            text: text.into(),
            filename: filename.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
}

/// Lexical or syntactic error with a 1-based source position.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: error: {}", self.line, self.col, self.message)
    }
}

pub fn parse(src: &SourceProgram) -> Result<TermRef, Diagnostic> {
    let toks = lex(&src.text)?;
    let mut p = Parser { toks, pos: 0 };
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_str(text: &str) -> Result<TermRef, Diagnostic> {
    parse(&SourceProgram::new(text, "<input>"))
}

// ── Lexer ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64, String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Semicolon,
    Equals,
    Plus,
    Minus,
    Star,
    Slash,
    ArrowDet,
    ArrowRnd,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Number(_, s) => write!(f, "{s}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::Colon => write!(f, ":"),
            Tok::Semicolon => write!(f, ";"),
            Tok::Equals => write!(f, "="),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::ArrowDet => write!(f, "->det"),
            Tok::ArrowRnd => write!(f, "->rnd"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn err(message: impl Into<String>, line: u32, col: u32) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        message: message.into(),
        line,
        col,
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, Diagnostic> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let (mut line, mut col) = (1u32, 1u32);
    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            out.push(Spanned {
                tok: $tok,
                line: $l,
                col: $c,
            })
        };
    }
    while i < chars.len() {
        let (l, c) = (line, col);
        let ch = chars[i];
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(&mut i, &mut line, &mut col);
                }
            }
            '(' => {
                push!(Tok::LParen, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            ')' => {
                push!(Tok::RParen, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            ',' => {
                push!(Tok::Comma, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '.' => {
                push!(Tok::Dot, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            ':' => {
                push!(Tok::Colon, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            ';' => {
                push!(Tok::Semicolon, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '=' => {
                push!(Tok::Equals, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '+' => {
                push!(Tok::Plus, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '*' => {
                push!(Tok::Star, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '/' => {
                push!(Tok::Slash, l, c);
                advance(&mut i, &mut line, &mut col)
            }
            '-' => {
                advance(&mut i, &mut line, &mut col);
                if i < chars.len() && chars[i] == '>' {
                    advance(&mut i, &mut line, &mut col);
                    let mut word = String::new();
                    while i < chars.len() && chars[i].is_ascii_alphabetic() {
                        word.push(chars[i]);
                        advance(&mut i, &mut line, &mut col);
                    }
                    match word.as_str() {
                        "det" => push!(Tok::ArrowDet, l, c),
                        "rnd" => push!(Tok::ArrowRnd, l, c),
                        other => {
                            return Err(err(
                                format!("expected ->det or ->rnd, found ->{other}"),
                                l,
                                c,
                            ))
                        }
                    }
                } else {
                    push!(Tok::Minus, l, c);
                }
            }
            d if d.is_ascii_digit() => {
                let mut lexeme = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    lexeme.push(chars[i]);
                    advance(&mut i, &mut line, &mut col);
                }
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    lexeme.push('.');
                    advance(&mut i, &mut line, &mut col);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        lexeme.push(chars[i]);
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while i < j {
                            lexeme.push(chars[i]);
                            advance(&mut i, &mut line, &mut col);
                        }
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            lexeme.push(chars[i]);
                            advance(&mut i, &mut line, &mut col);
                        }
                    }
                }
                let value: f64 = lexeme
                    .parse()
                    .map_err(|_| err(format!("malformed number {lexeme}"), l, c))?;
                push!(Tok::Number(value, lexeme), l, c);
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut name = String::new();
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    name.push(chars[i]);
                    advance(&mut i, &mut line, &mut col);
                }
                push!(Tok::Ident(name), l, c);
            }
            other => return Err(err(format!("unexpected character {other:?}"), l, c)),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

// ── Parser ────────────────────────────────────────────────────────────

const RESERVED: &[&str] = &[
    "lam", "let", "in", "if", "then", "else", "assume", "weight", "infer", "solve", "observe",
    "from", "unroll", "diffA", "diffP", "diff1A", "diff1P", "sin", "cos", "pdfGaussian",
    "pdfBeta", "wiener", "Gaussian", "Beta", "Wiener", "RealA", "RealP", "RealN", "Dist",
];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_ident(&self, name: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == name)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), Diagnostic> {
        let here = self.peek().clone();
        if here.tok == tok {
            self.next();
            Ok(())
        } else {
            Err(err(
                format!("expected {tok}, found {}", here.tok),
                here.line,
                here.col,
            ))
        }
    }

    fn expect_eof(&mut self) -> Result<(), Diagnostic> {
        let here = self.peek().clone();
        if here.tok == Tok::Eof {
            Ok(())
        } else {
            Err(err(
                format!("expected end of input, found {}", here.tok),
                here.line,
                here.col,
            ))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        let here = self.peek().clone();
        if self.at_ident(kw) {
            self.next();
            Ok(())
        } else {
            Err(err(
                format!("expected '{kw}', found {}", here.tok),
                here.line,
                here.col,
            ))
        }
    }

    fn binder(&mut self) -> Result<String, Diagnostic> {
        let here = self.next();
        match here.tok {
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => Ok(name),
            other => Err(err(
                format!("expected a variable name, found {other}"),
                here.line,
                here.col,
            )),
        }
    }

    /// A natural-number literal (used by `unroll` and projection indices).
    fn nat(&mut self) -> Result<u32, Diagnostic> {
        let here = self.next();
        match here.tok {
            Tok::Number(_, lexeme)
                if lexeme.chars().all(|c| c.is_ascii_digit()) && !lexeme.is_empty() =>
            {
                lexeme
                    .parse()
                    .map_err(|_| err("natural literal out of range", here.line, here.col))
            }
            other => Err(err(
                format!("expected a natural literal, found {other}"),
                here.line,
                here.col,
            )),
        }
    }

    // term := seq of nonseq separated by ';' (desugared to unit lets)
    fn term(&mut self) -> Result<TermRef, Diagnostic> {
        let first = self.nonseq()?;
        if self.eat(&Tok::Semicolon) {
            let rest = self.term()?;
            Ok(let_term("_", None, first, rest))
        } else {
            Ok(first)
        }
    }

    fn nonseq(&mut self) -> Result<TermRef, Diagnostic> {
        if let Tok::Ident(name) = &self.peek().tok {
            match name.as_str() {
                "lam" => return self.lam(),
                "let" => return self.let_(),
                "if" => return self.if_(),
                "assume" => {
                    self.next();
                    return Ok(Arc::new(Term::Assume(self.aterm()?)));
                }
                "weight" => {
                    self.next();
                    return Ok(Arc::new(Term::Weight(self.aterm()?)));
                }
                "infer" => {
                    self.next();
                    return Ok(Arc::new(Term::Infer(self.aterm()?)));
                }
                "diffA" => return self.diff(DiffMode::Analytic, false),
                "diffP" => return self.diff(DiffMode::Pap, false),
                "diff1A" => return self.diff(DiffMode::Analytic, true),
                "diff1P" => return self.diff(DiffMode::Pap, true),
                "solve" => {
                    self.next();
                    let rhs = self.aterm()?;
                    let init = self.aterm()?;
                    let horizon = self.aterm()?;
                    return Ok(Arc::new(Term::Solve { rhs, init, horizon }));
                }
                "observe" => return self.observe(),
                "unroll" => return self.unroll(),
                _ => {}
            }
        }
        self.additive()
    }

    fn lam(&mut self) -> Result<TermRef, Diagnostic> {
        self.expect_keyword("lam")?;
        let param = self.binder()?;
        self.expect(Tok::Colon)?;
        let annot = self.type_()?;
        self.expect(Tok::Dot)?;
        let body = self.term()?;
        Ok(Arc::new(Term::Abs {
            param,
            annot: Some(annot),
            body,
        }))
    }

    fn let_(&mut self) -> Result<TermRef, Diagnostic> {
        self.expect_keyword("let")?;
        let name = self.binder()?;
        let annot = if self.eat(&Tok::Colon) {
            Some(self.type_()?)
        } else {
            None
        };
        self.expect(Tok::Equals)?;
        let bound = self.term()?;
        self.expect_keyword("in")?;
        let body = self.term()?;
        Ok(let_term(&name, annot, bound, body))
    }

    fn if_(&mut self) -> Result<TermRef, Diagnostic> {
        self.expect_keyword("if")?;
        let cond = self.term()?;
        self.expect_keyword("then")?;
        let then_branch = self.term()?;
        self.expect_keyword("else")?;
        let else_branch = self.term()?;
        Ok(Arc::new(Term::If {
            cond,
            then_branch,
            else_branch,
        }))
    }

    fn diff(&mut self, mode: DiffMode, scalar: bool) -> Result<TermRef, Diagnostic> {
        self.next(); // the diff keyword
        let func = self.aterm()?;
        let point = self.aterm()?;
        let d = Arc::new(Term::Diff { mode, func, point });
        if scalar {
            // diff1 applies the derivative closure to the unit tangent; with
            // 1-tuples identified with their element there is nothing to
            // project afterwards.
            Ok(Arc::new(Term::App(d, Term::real(1.0))))
        } else {
            Ok(d)
        }
    }

    fn observe(&mut self) -> Result<TermRef, Diagnostic> {
        self.expect_keyword("observe")?;
        let observed = self.aterm()?;
        self.expect_keyword("from")?;
        let here = self.peek().clone();
        let (dist, params) = self.dist_con()?;
        let pdf = match dist {
            PrimDist::Gaussian => PrimFn::PdfGaussian,
            PrimDist::Beta => PrimFn::PdfBeta,
            PrimDist::WienerProcess => {
                return Err(err(
                    "the Wiener process has no density; observe requires Gaussian or Beta",
                    here.line,
                    here.col,
                ))
            }
        };
        let mut args = params;
        args.push(observed);
        Ok(Arc::new(Term::Weight(Arc::new(Term::Prim(pdf, args)))))
    }

    fn unroll(&mut self) -> Result<TermRef, Diagnostic> {
        self.expect_keyword("unroll")?;
        let here = self.peek().clone();
        let count = self.nat()?;
        let template = self.aterm()?;
        let (param, body) = match &*template {
            Term::Abs { param, body, .. } => (param.clone(), body.clone()),
            _ => {
                return Err(err(
                    "unroll expects a lambda template",
                    here.line,
                    here.col,
                ))
            }
        };
        let elems = (1..=count)
            .map(|k| subst(&body, &param, &Term::real(k as f64)))
            .collect();
        Ok(Arc::new(Term::Tuple(elems)))
    }

    // additive := multiplicative (('+'|'-') multiplicative)*
    fn additive(&mut self) -> Result<TermRef, Diagnostic> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => PrimFn::Add,
                Tok::Minus => PrimFn::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.multiplicative()?;
            lhs = Arc::new(Term::Prim(op, vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<TermRef, Diagnostic> {
        let mut lhs = self.app()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => PrimFn::Mul,
                Tok::Slash => PrimFn::Div,
                _ => break,
            };
            self.next();
            let rhs = self.app()?;
            lhs = Arc::new(Term::Prim(op, vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn app(&mut self) -> Result<TermRef, Diagnostic> {
        let mut head = self.aterm()?;
        while self.starts_aterm() {
            let arg = self.aterm()?;
            head = Arc::new(Term::App(head, arg));
        }
        Ok(head)
    }

    fn starts_aterm(&self) -> bool {
        match &self.peek().tok {
            Tok::LParen | Tok::Number(..) => true,
            Tok::Ident(name) => {
                !matches!(
                    name.as_str(),
                    "in" | "then" | "else" | "from" | "lam" | "let" | "if" | "assume" | "weight"
                        | "infer" | "solve" | "observe" | "unroll" | "diffA" | "diffP"
                        | "diff1A" | "diff1P"
                )
            }
            _ => false,
        }
    }

    fn aterm(&mut self) -> Result<TermRef, Diagnostic> {
        let mut t = self.atom()?;
        // Postfix projections. Maximal-munch lexing turns `t.1.2` into
        // `t`, `.`, `1.2`; a dotted numeric lexeme here is split back into
        // successive projection indices.
        while self.eat(&Tok::Dot) {
            let here = self.next();
            match here.tok {
                Tok::Number(_, lexeme)
                    if !lexeme.is_empty()
                        && lexeme.chars().all(|c| c.is_ascii_digit() || c == '.') =>
                {
                    for part in lexeme.split('.') {
                        let index: u32 = part.parse().map_err(|_| {
                            err("projection index must be a natural literal", here.line, here.col)
                        })?;
                        if index == 0 {
                            return Err(err(
                                "projection indices are 1-based",
                                here.line,
                                here.col,
                            ));
                        }
                        t = Arc::new(Term::Proj { index, tuple: t });
                    }
                }
                other => {
                    return Err(err(
                        format!("expected a projection index, found {other}"),
                        here.line,
                        here.col,
                    ))
                }
            }
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<TermRef, Diagnostic> {
        let here = self.peek().clone();
        match &here.tok {
            Tok::Number(value, _) => {
                let v = *value;
                self.next();
                Ok(Term::real(v))
            }
            Tok::LParen => {
                self.next();
                if self.eat(&Tok::RParen) {
                    return Ok(Term::unit());
                }
                let mut elems = vec![self.term()?];
                while self.eat(&Tok::Comma) {
                    elems.push(self.term()?);
                }
                self.expect(Tok::RParen)?;
                if elems.len() == 1 {
                    Ok(elems.pop().unwrap())
                } else {
                    Ok(Arc::new(Term::Tuple(elems)))
                }
            }
            Tok::Ident(name) => match name.as_str() {
                "sin" => self.prim_call(PrimFn::Sin, 1),
                "cos" => self.prim_call(PrimFn::Cos, 1),
                "pdfGaussian" => self.prim_call(PrimFn::PdfGaussian, 3),
                "pdfBeta" => self.prim_call(PrimFn::PdfBeta, 3),
                "wiener" => self.prim_call(PrimFn::Wiener(WienerHandle::canonical()), 1),
                "Gaussian" | "Beta" | "Wiener" => {
                    let (dist, params) = self.dist_con()?;
                    Ok(Arc::new(Term::DistCon(dist, params)))
                }
                "RealA" | "RealP" | "RealN" | "Dist" => Err(err(
                    format!("type {name} cannot appear in term position"),
                    here.line,
                    here.col,
                )),
                other if RESERVED.contains(&other) => Err(err(
                    format!("unexpected keyword {other}"),
                    here.line,
                    here.col,
                )),
                _ => {
                    let name = name.clone();
                    self.next();
                    Ok(Arc::new(Term::Var(name)))
                }
            },
            other => Err(err(
                format!("expected a term, found {other}"),
                here.line,
                here.col,
            )),
        }
    }

    fn prim_call(&mut self, prim: PrimFn, arity: usize) -> Result<TermRef, Diagnostic> {
        let here = self.next(); // the primitive name
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != arity {
            return Err(err(
                format!(
                    "primitive expects {arity} argument(s), found {}",
                    args.len()
                ),
                here.line,
                here.col,
            ));
        }
        Ok(Arc::new(Term::Prim(prim, args)))
    }

    fn dist_con(&mut self) -> Result<(PrimDist, Vec<TermRef>), Diagnostic> {
        let here = self.next();
        let dist = match &here.tok {
            Tok::Ident(n) if n == "Gaussian" => PrimDist::Gaussian,
            Tok::Ident(n) if n == "Beta" => PrimDist::Beta,
            Tok::Ident(n) if n == "Wiener" => PrimDist::WienerProcess,
            other => {
                return Err(err(
                    format!("expected a distribution, found {other}"),
                    here.line,
                    here.col,
                ))
            }
        };
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            params.push(self.term()?);
            while self.eat(&Tok::Comma) {
                params.push(self.term()?);
            }
            self.expect(Tok::RParen)?;
        }
        if params.len() != dist.arity() {
            return Err(err(
                format!(
                    "distribution expects {} parameter(s), found {}",
                    dist.arity(),
                    params.len()
                ),
                here.line,
                here.col,
            ));
        }
        Ok((dist, params))
    }

    // type := btype ["->det" type | "->rnd" type]
    fn type_(&mut self) -> Result<TypeExpr, Diagnostic> {
        let lhs = self.btype()?;
        if self.eat(&Tok::ArrowDet) {
            Ok(TypeExpr::arrow(lhs, Effect::Det, self.type_()?))
        } else if self.eat(&Tok::ArrowRnd) {
            Ok(TypeExpr::arrow(lhs, Effect::Rnd, self.type_()?))
        } else {
            Ok(lhs)
        }
    }

    fn btype(&mut self) -> Result<TypeExpr, Diagnostic> {
        let here = self.next();
        match &here.tok {
            Tok::Ident(n) if n == "RealA" => Ok(TypeExpr::Real(Coeffect::A)),
            Tok::Ident(n) if n == "RealP" => Ok(TypeExpr::Real(Coeffect::P)),
            Tok::Ident(n) if n == "RealN" => Ok(TypeExpr::Real(Coeffect::N)),
            Tok::Ident(n) if n == "Dist" => Ok(TypeExpr::dist(self.btype()?)),
            Tok::LParen => {
                if self.eat(&Tok::RParen) {
                    return Ok(TypeExpr::unit());
                }
                let mut elems = vec![self.type_()?];
                while self.eat(&Tok::Comma) {
                    elems.push(self.type_()?);
                }
                self.expect(Tok::RParen)?;
                Ok(TypeExpr::tuple(elems))
            }
            other => Err(err(
                format!("expected a type, found {other}"),
                here.line,
                here.col,
            )),
        }
    }
}

/// `let x = bound in body` is `(lam x. body) bound`; a missing annotation is
/// filled by the typer with the synthesized type of `bound`.
pub fn let_term(
    name: &str,
    annot: Option<TypeExpr>,
    bound: TermRef,
    body: TermRef,
) -> TermRef {
    Arc::new(Term::App(
        Arc::new(Term::Abs {
            param: name.to_string(),
            annot,
            body,
        }),
        bound,
    ))
}
