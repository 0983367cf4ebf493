//! Recursive-descent parser for the machine language.
//!
//! Command precedence, loosest first: `;` (right-nested), `[]` (left),
//! `pchoice ... or` (right). Constants are inlined as literals.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::ast::{Command, Domain, Machine, Operation, OutOfDomain, VarDecl};
use super::lexer::{lex, Tok, Token};
use super::Diagnostic;
use crate::expr::{is_probability, BinOp, CmpOp, Expr};
use crate::value::{Name, State, Value};

const KEYWORDS: &[&str] = &[
    "machine", "const", "var", "init", "op", "when", "expectations", "skip", "if", "then", "else",
    "fi", "pchoice", "or", "while", "do", "od", "it", "ti", "true", "false", "lift", "min", "max",
    "in", "bool", "clamp", "error",
];

const UNBOUNDED: &[&str] = &["int", "integer", "nat", "real", "rat", "rational"];

/// Parses a complete machine.
pub fn parse(src: &str) -> Result<Machine, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, Scope::closed());
    let m = p.machine();
    p.finish(m)
}

/// Parses a stand-alone command. Every identifier is taken as a variable.
pub fn parse_command(src: &str) -> Result<Command, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, Scope::open());
    let c = p.seq();
    let c = c.and_then(|c| p.expect_eof().map(|_| c));
    p.finish(c)
}

/// Parses a stand-alone expression. Every identifier is taken as a variable.
pub fn parse_expr(src: &str) -> Result<Expr, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks, Scope::open());
    let e = p.expr();
    let e = e.and_then(|e| p.expect_eof().map(|_| e));
    p.finish(e)
}

/// Parses an expression over the variables and constants of `m`.
pub fn parse_expr_in(m: &Machine, src: &str) -> Result<Expr, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut scope = Scope::closed();
    for (n, v) in &m.consts {
        scope.consts.insert(n.to_string(), v.clone());
    }
    for v in &m.vars {
        scope.vars.insert(v.name.to_string());
    }
    let mut p = Parser::new(toks, scope);
    let e = p.expr();
    let e = e.and_then(|e| p.expect_eof().map(|_| e));
    p.finish(e)
}

struct Scope {
    consts: HashMap<String, Value>,
    vars: HashSet<String>,
    open: bool,
}

impl Scope {
    fn closed() -> Self {
        Scope { consts: HashMap::new(), vars: HashSet::new(), open: false }
    }

    fn open() -> Self {
        Scope { open: true, ..Scope::closed() }
    }
}

/// Marker for an aborted parse; the reason is already in `diags`.
struct Abort;

type PResult<T> = Result<T, Abort>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    scope: Scope,
}

impl Parser {
    fn new(toks: Vec<Token>, scope: Scope) -> Self {
        Parser { toks, pos: 0, diags: Vec::new(), scope }
    }

    fn finish<T>(mut self, r: PResult<T>) -> Result<T, Vec<Diagnostic>> {
        match r {
            Ok(v) if self.diags.is_empty() => Ok(v),
            _ => {
                self.diags.sort_by_key(|d| (d.line, d.col));
                Err(self.diags)
            }
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn note(&mut self, (line, col): (usize, usize), msg: impl Into<String>) {
        self.diags.push(Diagnostic::at(line, col, msg));
    }

    fn fail<T>(&mut self, msg: impl Into<String>) -> PResult<T> {
        let at = self.here();
        let found = describe(self.peek());
        self.note(at, format!("syntax error: {}, found {found}", msg.into()));
        Err(Abort)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(format!("expected `{kw}`"))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.fail(format!("expected `{sym}`"))
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.fail("expected end of input")
        }
    }

    /// A fresh, non-reserved identifier.
    fn ident(&mut self, what: &str) -> PResult<(String, (usize, usize))> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, at))
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn machine(&mut self) -> PResult<Machine> {
        self.expect_kw("machine")?;
        let (name, _) = self.ident("machine name")?;
        let mut consts = Vec::new();
        while self.eat_kw("const") {
            let (n, at) = self.ident("constant name")?;
            self.expect_sym("=")?;
            let v = self.literal_value()?;
            if self.scope.consts.contains_key(&n) {
                self.note(at, format!("duplicate constant `{n}`"));
            }
            self.scope.consts.insert(n.clone(), v.clone());
            consts.push((Name::from(n), v));
        }
        let mut vars = Vec::new();
        while self.is_kw("var") {
            self.bump();
            let (n, at) = self.ident("variable name")?;
            self.expect_sym(":")?;
            let domain = self.domain()?;
            let policy = if self.eat_kw("clamp") {
                OutOfDomain::Clamp
            } else {
                self.eat_kw("error");
                OutOfDomain::Error
            };
            if self.scope.vars.contains(&n) || self.scope.consts.contains_key(&n) {
                self.note(at, format!("duplicate declaration of `{n}`"));
            }
            self.scope.vars.insert(n.clone());
            vars.push(VarDecl { name: Name::from(n), domain, policy });
        }
        if vars.is_empty() {
            return self.fail("expected at least one `var` declaration");
        }
        self.expect_kw("init")?;
        let init = self.seq()?;
        let mut ops: Vec<Operation> = Vec::new();
        while self.eat_kw("op") {
            let (n, at) = self.ident("operation name")?;
            let guard = if self.eat_kw("when") { Some(self.expr()?) } else { None };
            let body = self.seq()?;
            if ops.iter().any(|o| *o.name == *n) {
                self.note(at, format!("duplicate operation name `{n}`"));
            }
            ops.push(Operation { name: Name::from(n), guard, body });
        }
        if ops.is_empty() {
            return self.fail("expected at least one `op`");
        }
        let expectations = if self.eat_kw("expectations") {
            let e = self.expr()?;
            self.expect_sym("=>")?;
            let x = self.expr()?;
            Some((e, x))
        } else {
            None
        };
        self.expect_eof()?;
        Ok(Machine { name: Name::from(name), consts, vars, init, ops, expectations })
    }

    fn domain(&mut self) -> PResult<Domain> {
        let at = self.here();
        if self.eat_sym("{") {
            let mut items = vec![self.literal_value()?];
            while self.eat_sym(",") {
                items.push(self.literal_value()?);
            }
            self.expect_sym("}")?;
            let mut seen: Vec<Value> = Vec::new();
            for v in &items {
                if seen.iter().any(|w| w.compare(v) == Some(std::cmp::Ordering::Equal)) {
                    self.note(at, format!("duplicate domain element {v}"));
                }
                seen.push(v.clone());
            }
            if items.iter().any(Value::is_numeric) && items.iter().any(|v| !v.is_numeric()) {
                self.note(at, "domain mixes booleans and numbers");
            }
            return Ok(Domain::Set(items));
        }
        if self.eat_kw("bool") {
            return Ok(Domain::Bool);
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if UNBOUNDED.contains(&s.as_str()) {
                self.bump();
                self.note(at, format!("unbounded variable domain `{s}`: domains must be finite"));
                return Ok(Domain::Range(0, 0));
            }
        }
        let lo = self.signed_int()?;
        self.expect_sym("..")?;
        let hi = self.signed_int()?;
        if lo > hi {
            self.note(at, format!("empty domain {lo}..{hi}"));
        }
        Ok(Domain::Range(lo, hi))
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                match s.parse::<i64>() {
                    Ok(v) => Ok(if neg { -v } else { v }),
                    Err(_) => {
                        self.note(at, format!("integer literal {s} is too large"));
                        Ok(0)
                    }
                }
            }
            _ => self.fail("expected an integer"),
        }
    }

    /// A closed expression evaluated to a value (constants, domain items).
    fn literal_value(&mut self) -> PResult<Value> {
        let at = self.here();
        let e = self.unary_arith()?;
        let e = if self.is_sym("/") {
            self.bump();
            let d = self.unary_arith()?;
            Expr::Bin(BinOp::Div, Box::new(e), Box::new(d))
        } else {
            e
        };
        match e.eval(&State::new()) {
            Ok(v) => Ok(v),
            Err(err) => {
                self.note(at, format!("expected a literal: {err}"));
                Ok(Value::Int(0))
            }
        }
    }

    // ---- commands ----

    fn seq(&mut self) -> PResult<Command> {
        let first = self.nd()?;
        if self.eat_sym(";") {
            let rest = self.seq()?;
            Ok(Command::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn nd(&mut self) -> PResult<Command> {
        let mut acc = self.pc()?;
        while self.eat_sym("[]") {
            let rhs = self.pc()?;
            acc = Command::nd(acc, rhs);
        }
        Ok(acc)
    }

    fn pc(&mut self) -> PResult<Command> {
        let left = self.atom()?;
        if !self.eat_kw("pchoice") {
            return Ok(left);
        }
        let at_most = self.eat_sym("<=");
        let at = self.here();
        let p = self.expr()?;
        if p.free_vars().is_empty() {
            match p.eval(&State::new()) {
                Ok(v) if is_probability(&v) => {}
                Ok(v) => self.note(at, format!("probability out of range: {v} is not in [0, 1]")),
                Err(e) => self.note(at, format!("invalid probability: {e}")),
            }
        }
        self.expect_kw("or")?;
        let right = self.pc()?;
        Ok(if at_most {
            Command::pchoice_at_most(p, left, right)
        } else {
            Command::pchoice(p, left, right)
        })
    }

    fn atom(&mut self) -> PResult<Command> {
        if self.eat_kw("skip") {
            return Ok(Command::Skip);
        }
        if self.eat_sym("(") {
            let c = self.seq()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.eat_kw("if") {
            return self.if_rest();
        }
        if self.eat_kw("while") {
            let g = self.expr()?;
            self.expect_kw("do")?;
            let body = self.seq()?;
            self.expect_kw("od")?;
            return Ok(Command::while_do(g, body));
        }
        if self.eat_kw("it") {
            let body = self.seq()?;
            self.expect_kw("ti")?;
            return Ok(Command::weak_iter(body));
        }
        if matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            return self.assignment();
        }
        self.fail("expected a command")
    }

    fn if_rest(&mut self) -> PResult<Command> {
        let g = self.expr()?;
        self.expect_kw("then")?;
        let a = self.seq()?;
        let b = if self.eat_kw("else") { self.seq()? } else { Command::Skip };
        self.expect_kw("fi")?;
        Ok(Command::cond(g, a, b))
    }

    fn assignment(&mut self) -> PResult<Command> {
        let mut targets = vec![self.target()?];
        while self.eat_sym(",") {
            targets.push(self.target()?);
        }
        self.expect_sym(":=")?;
        let mut rhs = vec![self.expr()?];
        while self.eat_sym(",") {
            rhs.push(self.expr()?);
        }
        if targets.len() != rhs.len() {
            let at = self.here();
            self.note(
                at,
                format!("{} targets but {} expressions in assignment", targets.len(), rhs.len()),
            );
        }
        if targets.len() == 1 && rhs.len() == 1 {
            return Ok(Command::Assign(targets.remove(0), rhs.remove(0)));
        }
        Ok(Command::MultiAssign(targets.into_iter().zip(rhs).collect()))
    }

    fn target(&mut self) -> PResult<Name> {
        let (n, at) = self.ident("assignment target")?;
        if self.scope.consts.contains_key(&n) {
            self.note(at, format!("cannot assign to constant `{n}`"));
        } else if !self.scope.open && !self.scope.vars.contains(&n) {
            self.note(at, format!("unknown identifier `{n}`"));
        }
        Ok(Name::from(n))
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let mut acc = self.conj()?;
        while self.eat_sym("||") {
            let rhs = self.conj()?;
            acc = Expr::or(acc, rhs);
        }
        Ok(acc)
    }

    fn conj(&mut self) -> PResult<Expr> {
        let mut acc = self.negation()?;
        while self.eat_sym("&&") {
            let rhs = self.negation()?;
            acc = Expr::and(acc, rhs);
        }
        Ok(acc)
    }

    fn negation(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") {
            let inner = self.negation()?;
            return Ok(Expr::not(inner));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.arith()?;
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Ident(s) if s == "in" => {
                self.bump();
                self.expect_sym("{")?;
                let mut items = vec![self.literal_value()?];
                while self.eat_sym(",") {
                    items.push(self.literal_value()?);
                }
                self.expect_sym("}")?;
                return Ok(Expr::member(lhs, items));
            }
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.arith()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn arith(&mut self) -> PResult<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat_sym("+") {
                let rhs = self.term()?;
                acc = acc + rhs;
            } else if self.is_sym("-") {
                self.bump();
                let rhs = self.term()?;
                acc = acc - rhs;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut acc = self.unary_arith()?;
        loop {
            if self.eat_sym("*") {
                let rhs = self.unary_arith()?;
                acc = acc * rhs;
            } else if self.eat_sym("/") {
                let rhs = self.unary_arith()?;
                acc = fold_ratio(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary_arith(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            let inner = self.unary_arith()?;
            return Ok(match inner {
                Expr::Const(v) if v.is_numeric() => {
                    Expr::Const(Value::number(-v.as_rational().unwrap_or_default()))
                }
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                match s.parse::<i64>() {
                    Ok(v) => Ok(Expr::int(v)),
                    Err(_) => {
                        self.note(at, format!("integer literal {s} is too large"));
                        Ok(Expr::int(0))
                    }
                }
            }
            Tok::Decimal(i, f) => {
                self.bump();
                Ok(Expr::Const(Value::number(decimal(&i, &f))))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::bool(s == "true"))
                }
                "lift" => {
                    self.bump();
                    self.expect_sym("[")?;
                    let p = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::lift(p))
                }
                "min" | "max" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let a = self.expr()?;
                    self.expect_sym(",")?;
                    let b = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(if s == "min" { Expr::min(a, b) } else { Expr::max(a, b) })
                }
                "if" => {
                    self.bump();
                    let p = self.expr()?;
                    self.expect_kw("then")?;
                    let a = self.expr()?;
                    self.expect_kw("else")?;
                    let b = self.expr()?;
                    self.expect_kw("fi")?;
                    Ok(Expr::cond(p, a, b))
                }
                _ if KEYWORDS.contains(&s.as_str()) => self.fail("expected an expression"),
                _ => {
                    self.bump();
                    if let Some(v) = self.scope.consts.get(&s) {
                        return Ok(Expr::Const(v.clone()));
                    }
                    if !self.scope.open && !self.scope.vars.contains(&s) {
                        self.note(at, format!("unknown identifier `{s}`"));
                    }
                    Ok(Expr::var(&s))
                }
            },
            _ => self.fail("expected an expression"),
        }
    }
}

/// `a / b` on two integer literals becomes one rational literal.
fn fold_ratio(a: Expr, b: Expr) -> Expr {
    if let (Expr::Const(Value::Int(n)), Expr::Const(Value::Int(d))) = (&a, &b) {
        if *d != 0 {
            return Expr::Const(Value::number(BigRational::new(BigInt::from(*n), BigInt::from(*d))));
        }
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn decimal(int: &str, frac: &str) -> BigRational {
    let digits: BigInt = format!("{int}{frac}").parse().unwrap_or_else(|_| BigInt::zero());
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    BigRational::new(digits, scale)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(s) => format!("`{s}`"),
        Tok::Decimal(i, f) => format!("`{i}.{f}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}
