//! Concrete syntax: parse model files (sorts, functions, equations, free
//! names, processes, queries) into elaborated, sort-checked values.
//!
//! Identifier sorts are inferred: every binder and exported variable gets an
//! inference slot, constrained by the positions it occurs in (function
//! argument, channel, comparison). `new n : Sort;` annotates explicitly.

use std::collections::{BTreeMap, BTreeSet};

use crate::equivalence::TracePredicate;
use crate::error::{Error, Result};
use crate::process::{ExtendedProcess, Process};
use crate::rewriting::TheorySpec;
use crate::statics::RecipeBudget;
use crate::terms::{FunSymbol, Name, Signature, Sort, Substitution, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Dot,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Eq,
    Slash,
    LBrace,
    RBrace,
    Bar,
    Bang,
    LBracket,
    RBracket,
    ColonColon,
    PlusPlus,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Num(n) => write!(f, "{n}"),
            Tok::Dot => write!(f, "."),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Colon => write!(f, ":"),
            Tok::Semi => write!(f, ";"),
            Tok::Eq => write!(f, "="),
            Tok::Slash => write!(f, "/"),
            Tok::LBrace => write!(f, "{{"),
            Tok::RBrace => write!(f, "}}"),
            Tok::Bar => write!(f, "|"),
            Tok::Bang => write!(f, "!"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::ColonColon => write!(f, "::"),
            Tok::PlusPlus => write!(f, "++"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn perr(pos: Pos, msg: impl Into<String>) -> Error {
    Error::Parse { line: pos.line, col: pos.col, msg: msg.into() }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let n = chars.len();
    while i < n {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |i: &mut usize, col: &mut usize, by: usize| {
            *i += by;
            *col += by;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => advance(&mut i, &mut col, 1),
            '(' => {
                if i + 1 < n && chars[i + 1] == '*' {
                    // comment (* ... *), nestable
                    let mut depth = 1;
                    let mut j = i + 2;
                    let mut l = line;
                    let mut c2 = col + 2;
                    while j < n && depth > 0 {
                        if chars[j] == '(' && j + 1 < n && chars[j + 1] == '*' {
                            depth += 1;
                            j += 2;
                            c2 += 2;
                        } else if chars[j] == '*' && j + 1 < n && chars[j + 1] == ')' {
                            depth -= 1;
                            j += 2;
                            c2 += 2;
                        } else if chars[j] == '\n' {
                            j += 1;
                            l += 1;
                            c2 = 1;
                        } else {
                            j += 1;
                            c2 += 1;
                        }
                    }
                    if depth > 0 {
                        return Err(perr(pos, "unterminated comment"));
                    }
                    i = j;
                    line = l;
                    col = c2;
                } else {
                    out.push((Tok::LParen, pos));
                    advance(&mut i, &mut col, 1);
                }
            }
            ')' => {
                out.push((Tok::RParen, pos));
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                out.push((Tok::Comma, pos));
                advance(&mut i, &mut col, 1);
            }
            '.' => {
                out.push((Tok::Dot, pos));
                advance(&mut i, &mut col, 1);
            }
            ';' => {
                out.push((Tok::Semi, pos));
                advance(&mut i, &mut col, 1);
            }
            '=' => {
                out.push((Tok::Eq, pos));
                advance(&mut i, &mut col, 1);
            }
            '/' => {
                out.push((Tok::Slash, pos));
                advance(&mut i, &mut col, 1);
            }
            '{' => {
                out.push((Tok::LBrace, pos));
                advance(&mut i, &mut col, 1);
            }
            '}' => {
                out.push((Tok::RBrace, pos));
                advance(&mut i, &mut col, 1);
            }
            '|' => {
                out.push((Tok::Bar, pos));
                advance(&mut i, &mut col, 1);
            }
            '!' => {
                out.push((Tok::Bang, pos));
                advance(&mut i, &mut col, 1);
            }
            '[' => {
                out.push((Tok::LBracket, pos));
                advance(&mut i, &mut col, 1);
            }
            ']' => {
                out.push((Tok::RBracket, pos));
                advance(&mut i, &mut col, 1);
            }
            ':' => {
                if i + 1 < n && chars[i + 1] == ':' {
                    out.push((Tok::ColonColon, pos));
                    advance(&mut i, &mut col, 2);
                } else {
                    out.push((Tok::Colon, pos));
                    advance(&mut i, &mut col, 1);
                }
            }
            '+' => {
                if i + 1 < n && chars[i + 1] == '+' {
                    out.push((Tok::PlusPlus, pos));
                    advance(&mut i, &mut col, 2);
                } else {
                    return Err(perr(pos, "single '+' is not a token"));
                }
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < n && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let num: u64 = chars[i..j]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| perr(pos, "number out of range"))?;
                out.push((Tok::Num(num), pos));
                let by = j - i;
                advance(&mut i, &mut col, by);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < n && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '\'')
                {
                    j += 1;
                }
                // optional fresh-name index suffix
                if j < n && chars[j] == '#' {
                    let mut k = j + 1;
                    while k < n && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    if k > j + 1 {
                        j = k;
                    }
                }
                let ident: String = chars[i..j].iter().collect();
                out.push((Tok::Ident(ident), pos));
                let by = j - i;
                advance(&mut i, &mut col, by);
            }
            other => return Err(perr(pos, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

/// Surface terms before sort elaboration.
#[derive(Debug, Clone)]
enum RawTerm {
    Atom(String, Pos),
    App(String, Vec<RawTerm>, Pos),
    Tuple(Vec<RawTerm>, Pos),
    Cons(Box<RawTerm>, Box<RawTerm>, Pos),
    Append(Box<RawTerm>, Box<RawTerm>, Pos),
}

impl RawTerm {
    fn pos(&self) -> Pos {
        match self {
            RawTerm::Atom(_, p)
            | RawTerm::App(_, _, p)
            | RawTerm::Tuple(_, p)
            | RawTerm::Cons(_, _, p)
            | RawTerm::Append(_, _, p) => *p,
        }
    }
}

#[derive(Debug, Clone)]
enum RawProc {
    Nil,
    Par(Box<RawProc>, Box<RawProc>),
    Repl(Box<RawProc>),
    New { ident: String, sort: Option<String>, body: Box<RawProc>, pos: Pos },
    NewVar { ident: String, body: Box<RawProc> },
    Active { term: RawTerm, ident: String, pos: Pos },
    If { lhs: RawTerm, rhs: RawTerm, then_p: Box<RawProc>, else_p: Option<Box<RawProc>> },
    In { chan: RawTerm, ident: String, body: Box<RawProc>, pos: Pos },
    Out { chan: RawTerm, msg: RawTerm, body: Box<RawProc> },
    Let { ident: String, term: RawTerm, body: Box<RawProc> },
}

#[derive(Debug, Clone)]
enum RawDecl {
    Sort(String),
    Fun { name: String, args: Vec<String>, result: String, pos: Pos },
    Equation { lhs: RawTerm, rhs: RawTerm, annot: Option<String>, pos: Pos },
    Free { name: String, sort: String, pos: Pos },
    Process { name: String, body: RawProc, pos: Pos },
    Query(RawQuery, Pos),
}

#[derive(Debug, Clone)]
enum RawQuery {
    Trace { process: String, goal: RawGoal },
    StatEq { left: String, right: String, budget: RawBudget },
    Bisim { left: String, right: String, budget: RawBudget },
    Convergent,
}

#[derive(Debug, Clone)]
enum RawGoal {
    Output(String),
    Forged(String, String),
}

#[derive(Debug, Clone, Default)]
struct RawBudget {
    depth: Option<u32>,
    count: Option<u64>,
    steps: Option<u32>,
    unfold: Option<u32>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    ix: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.ix).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.ix)
            .or_else(|| self.toks.last())
            .map(|(_, p)| *p)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn next(&mut self) -> Result<(Tok, Pos)> {
        let t = self
            .toks
            .get(self.ix)
            .cloned()
            .ok_or_else(|| perr(self.pos(), "unexpected end of input"))?;
        self.ix += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &Tok) -> Result<Pos> {
        let (t, p) = self.next()?;
        if &t == want {
            Ok(p)
        } else {
            Err(perr(p, format!("expected {want}, found {t}")))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Pos)> {
        let (t, p) = self.next()?;
        match t {
            Tok::Ident(s) => Ok((s, p)),
            other => Err(perr(p, format!("expected identifier, found {other}"))),
        }
    }

    fn eat_ident(&mut self, kw: &str) -> bool {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == kw {
                self.ix += 1;
                return true;
            }
        }
        false
    }

    fn parse_model(&mut self) -> Result<Vec<RawDecl>> {
        let mut decls = Vec::new();
        while self.peek().is_some() {
            decls.push(self.parse_decl()?);
        }
        Ok(decls)
    }

    fn parse_decl(&mut self) -> Result<RawDecl> {
        let (kw, pos) = self.expect_ident()?;
        let decl = match kw.as_str() {
            "sort" => {
                let (name, _) = self.expect_ident()?;
                RawDecl::Sort(name)
            }
            "fun" => {
                let (name, p) = self.expect_ident()?;
                self.expect(&Tok::LParen)?;
                let mut args = Vec::new();
                if self.peek() != Some(&Tok::RParen) {
                    loop {
                        let (s, _) = self.expect_ident()?;
                        args.push(s);
                        if self.peek() == Some(&Tok::Comma) {
                            self.next()?;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Colon)?;
                let (result, _) = self.expect_ident()?;
                RawDecl::Fun { name, args, result, pos: p }
            }
            "equation" => {
                let lhs = self.parse_term()?;
                self.expect(&Tok::Eq)?;
                let rhs = self.parse_term()?;
                let annot = if self.peek() == Some(&Tok::LBracket) {
                    self.next()?;
                    let (a, _) = self.expect_ident()?;
                    self.expect(&Tok::RBracket)?;
                    Some(a)
                } else {
                    None
                };
                RawDecl::Equation { lhs, rhs, annot, pos }
            }
            "free" => {
                let (name, p) = self.expect_ident()?;
                self.expect(&Tok::Colon)?;
                let (sort, _) = self.expect_ident()?;
                RawDecl::Free { name, sort, pos: p }
            }
            "process" => {
                let (name, p) = self.expect_ident()?;
                self.expect(&Tok::Eq)?;
                let body = self.parse_proc()?;
                RawDecl::Process { name, body, pos: p }
            }
            "query" => {
                let q = self.parse_query()?;
                RawDecl::Query(q, pos)
            }
            other => return Err(perr(pos, format!("unknown declaration keyword {other}"))),
        };
        self.expect(&Tok::Dot)?;
        Ok(decl)
    }

    fn parse_query(&mut self) -> Result<RawQuery> {
        let (kw, pos) = self.expect_ident()?;
        match kw.as_str() {
            "trace" => {
                let (process, _) = self.expect_ident()?;
                let (goal_kw, gp) = self.expect_ident()?;
                let goal = match goal_kw.as_str() {
                    "output" => {
                        self.expect(&Tok::LParen)?;
                        let (c, _) = self.expect_ident()?;
                        self.expect(&Tok::RParen)?;
                        RawGoal::Output(c)
                    }
                    "forged" => {
                        self.expect(&Tok::LParen)?;
                        let (c, _) = self.expect_ident()?;
                        self.expect(&Tok::Comma)?;
                        let (a, _) = self.expect_ident()?;
                        self.expect(&Tok::RParen)?;
                        RawGoal::Forged(c, a)
                    }
                    other => return Err(perr(gp, format!("unknown trace goal {other}"))),
                };
                let budget = self.parse_budget()?;
                let _ = budget;
                Ok(RawQuery::Trace { process, goal })
            }
            "stateq" => {
                let (left, _) = self.expect_ident()?;
                let (right, _) = self.expect_ident()?;
                let budget = self.parse_budget()?;
                Ok(RawQuery::StatEq { left, right, budget })
            }
            "bisim" => {
                let (left, _) = self.expect_ident()?;
                let (right, _) = self.expect_ident()?;
                let budget = self.parse_budget()?;
                Ok(RawQuery::Bisim { left, right, budget })
            }
            "convergent" => Ok(RawQuery::Convergent),
            other => Err(perr(pos, format!("unknown query kind {other}"))),
        }
    }

    fn parse_budget(&mut self) -> Result<RawBudget> {
        let mut b = RawBudget::default();
        loop {
            let kw = match self.peek() {
                Some(Tok::Ident(s))
                    if matches!(s.as_str(), "depth" | "count" | "steps" | "unfold") =>
                {
                    s.clone()
                }
                _ => break,
            };
            self.next()?;
            let (t, p) = self.next()?;
            let num = match t {
                Tok::Num(n) => n,
                other => return Err(perr(p, format!("expected number after {kw}, found {other}"))),
            };
            match kw.as_str() {
                "depth" => b.depth = Some(num as u32),
                "count" => b.count = Some(num),
                "steps" => b.steps = Some(num as u32),
                "unfold" => b.unfold = Some(num as u32),
                _ => unreachable!(),
            }
        }
        Ok(b)
    }

    // term := append_or_primary ("::" term)?
    fn parse_term(&mut self) -> Result<RawTerm> {
        let left = self.parse_append()?;
        if self.peek() == Some(&Tok::ColonColon) {
            let (_, p) = self.next()?;
            let right = self.parse_term()?;
            Ok(RawTerm::Cons(Box::new(left), Box::new(right), p))
        } else {
            Ok(left)
        }
    }

    fn parse_append(&mut self) -> Result<RawTerm> {
        let mut left = self.parse_primary_term()?;
        while self.peek() == Some(&Tok::PlusPlus) {
            let (_, p) = self.next()?;
            let right = self.parse_primary_term()?;
            left = RawTerm::Append(Box::new(left), Box::new(right), p);
        }
        Ok(left)
    }

    fn parse_primary_term(&mut self) -> Result<RawTerm> {
        let (t, pos) = self.next()?;
        match t {
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.next()?;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.parse_term()?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.next()?;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    Ok(RawTerm::App(name, args, pos))
                } else {
                    Ok(RawTerm::Atom(name, pos))
                }
            }
            Tok::LParen => {
                let first = self.parse_term()?;
                if self.peek() == Some(&Tok::Comma) {
                    let mut items = vec![first];
                    while self.peek() == Some(&Tok::Comma) {
                        self.next()?;
                        items.push(self.parse_term()?);
                    }
                    self.expect(&Tok::RParen)?;
                    Ok(RawTerm::Tuple(items, pos))
                } else {
                    self.expect(&Tok::RParen)?;
                    Ok(first)
                }
            }
            other => Err(perr(pos, format!("expected a term, found {other}"))),
        }
    }

    /// `; P` after an input or output prefix; omitted means 0.
    fn parse_continuation(&mut self) -> Result<RawProc> {
        if self.peek() == Some(&Tok::Semi) {
            self.next()?;
            self.parse_prefix_proc()
        } else {
            Ok(RawProc::Nil)
        }
    }

    // proc := prefix ('|' prefix)*; prefixes bind tighter than '|'
    fn parse_proc(&mut self) -> Result<RawProc> {
        let mut left = self.parse_prefix_proc()?;
        while self.peek() == Some(&Tok::Bar) {
            self.next()?;
            let right = self.parse_prefix_proc()?;
            left = RawProc::Par(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_prefix_proc(&mut self) -> Result<RawProc> {
        match self.peek() {
            Some(Tok::Num(0)) => {
                self.next()?;
                Ok(RawProc::Nil)
            }
            Some(Tok::Bang) => {
                self.next()?;
                let body = self.parse_prefix_proc()?;
                Ok(RawProc::Repl(Box::new(body)))
            }
            Some(Tok::LParen) => {
                self.next()?;
                let inner = self.parse_proc()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::LBrace) => {
                let (_, pos) = self.next()?;
                let term = self.parse_term()?;
                self.expect(&Tok::Slash)?;
                let (ident, _) = self.expect_ident()?;
                self.expect(&Tok::RBrace)?;
                Ok(RawProc::Active { term, ident, pos })
            }
            Some(Tok::Ident(kw)) => {
                let kw = kw.clone();
                match kw.as_str() {
                    "new" => {
                        let (_, pos) = self.next()?;
                        let (ident, _) = self.expect_ident()?;
                        let mut sort = None;
                        let mut is_var = false;
                        if self.peek() == Some(&Tok::Colon) {
                            self.next()?;
                            let (s, _) = self.expect_ident()?;
                            if s == "var" {
                                is_var = true;
                            } else {
                                sort = Some(s);
                            }
                        }
                        self.expect(&Tok::Semi)?;
                        let body = Box::new(self.parse_prefix_proc()?);
                        if is_var {
                            Ok(RawProc::NewVar { ident, body })
                        } else {
                            Ok(RawProc::New { ident, sort, body, pos })
                        }
                    }
                    "if" => {
                        self.next()?;
                        let lhs = self.parse_term()?;
                        self.expect(&Tok::Eq)?;
                        let rhs = self.parse_term()?;
                        let (then_kw, tp) = self.expect_ident()?;
                        if then_kw != "then" {
                            return Err(perr(tp, format!("expected then, found {then_kw}")));
                        }
                        let then_p = Box::new(self.parse_prefix_proc()?);
                        let else_p = if self.eat_ident("else") {
                            Some(Box::new(self.parse_prefix_proc()?))
                        } else {
                            None
                        };
                        Ok(RawProc::If { lhs, rhs, then_p, else_p })
                    }
                    "in" => {
                        let (_, pos) = self.next()?;
                        self.expect(&Tok::LParen)?;
                        let chan = self.parse_term()?;
                        self.expect(&Tok::Comma)?;
                        let (ident, _) = self.expect_ident()?;
                        self.expect(&Tok::RParen)?;
                        let body = Box::new(self.parse_continuation()?);
                        Ok(RawProc::In { chan, ident, body, pos })
                    }
                    "out" => {
                        self.next()?;
                        self.expect(&Tok::LParen)?;
                        let chan = self.parse_term()?;
                        self.expect(&Tok::Comma)?;
                        let msg = self.parse_term()?;
                        self.expect(&Tok::RParen)?;
                        let body = Box::new(self.parse_continuation()?);
                        Ok(RawProc::Out { chan, msg, body })
                    }
                    "let" => {
                        let (_, pos) = self.next()?;
                        let (ident, _) = self.expect_ident()?;
                        self.expect(&Tok::Eq)?;
                        let term = self.parse_term()?;
                        let (in_kw, ip) = self.expect_ident()?;
                        if in_kw != "in" {
                            return Err(perr(ip, format!("expected in, found {in_kw}")));
                        }
                        let _ = pos;
                        let body = Box::new(self.parse_prefix_proc()?);
                        Ok(RawProc::Let { ident, term, body })
                    }
                    other => Err(perr(self.pos(), format!("expected a process, found {other}"))),
                }
            }
            _ => Err(perr(self.pos(), "expected a process")),
        }
    }
}

/// Parsed queries, with names still referring to model processes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Trace { process: String, goal: TracePredicate },
    StatEq { left: String, right: String, depth: Option<u32>, count: Option<u64> },
    Bisim {
        left: String,
        right: String,
        depth: Option<u32>,
        steps: Option<u32>,
        unfold: Option<u32>,
    },
    Convergent,
}

/// A parsed, elaborated model.
#[derive(Debug, Clone)]
pub struct Model {
    pub theory: TheorySpec,
    pub free_names: BTreeMap<String, Name>,
    pub processes: BTreeMap<String, ExtendedProcess>,
    pub process_order: Vec<String>,
    pub queries: Vec<Query>,
    pub warnings: Vec<String>,
}

impl Model {
    /// Budget whose public names are the model's free names.
    pub fn recipe_budget(&self, depth: u32) -> RecipeBudget {
        RecipeBudget::depth(depth).with_public_names(self.free_names.values().cloned())
    }

    pub fn process(&self, name: &str) -> Result<&ExtendedProcess> {
        self.processes
            .get(name)
            .ok_or_else(|| Error::model(format!("unknown process {name}")))
    }
}

/// Union-find sort inference.
struct SortInfer {
    parent: Vec<usize>,
    known: Vec<Option<Sort>>,
}

impl SortInfer {
    fn new() -> Self {
        SortInfer { parent: Vec::new(), known: Vec::new() }
    }

    fn fresh(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.known.push(None);
        self.parent.len() - 1
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn assign(&mut self, slot: usize, sort: &Sort, pos: Pos) -> Result<()> {
        let r = self.find(slot);
        match &self.known[r] {
            Some(existing) if existing == sort => Ok(()),
            Some(existing) => Err(perr(
                pos,
                format!("sort mismatch: inferred both {existing} and {sort}"),
            )),
            None => {
                self.known[r] = Some(sort.clone());
                Ok(())
            }
        }
    }

    fn union(&mut self, a: usize, b: usize, pos: Pos) -> Result<()> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return Ok(());
        }
        match (self.known[ra].clone(), self.known[rb].clone()) {
            (Some(x), Some(y)) if x != y => {
                Err(perr(pos, format!("sort mismatch: {x} vs {y}")))
            }
            (Some(x), _) | (_, Some(x)) => {
                self.parent[rb] = ra;
                self.known[ra] = Some(x);
                Ok(())
            }
            (None, None) => {
                self.parent[rb] = ra;
                Ok(())
            }
        }
    }

    fn resolved(&mut self, slot: usize) -> Option<Sort> {
        let r = self.find(slot);
        self.known[r].clone()
    }
}

/// Inference-time sorts: placeholder sorts name a slot and are replaced once
/// the slot resolves.
fn slot_sort(slot: usize) -> Sort {
    Sort::new(format!("?{slot}"))
}

fn slot_of_sort(s: &Sort) -> Option<usize> {
    s.0.strip_prefix('?').and_then(|rest| rest.parse().ok())
}

#[derive(Debug, Clone)]
enum Binding {
    BoundName { name: Name },
    BoundVar { var: Var },
}

struct Elaborator {
    sig: Signature,
    free_names: BTreeMap<String, Name>,
    infer: SortInfer,
    default_sort: Option<Sort>,
}

impl Elaborator {
    /// Split an identifier with an optional `#index` suffix.
    fn split_ident(ident: &str) -> (String, u32) {
        if let Some(hash) = ident.rfind('#') {
            if let Ok(ix) = ident[hash + 1..].parse() {
                return (ident[..hash].to_string(), ix);
            }
        }
        (ident.to_string(), 0)
    }

    fn lookup_sort(&self, name: &str, pos: Pos) -> Result<Sort> {
        let s = Sort::new(name);
        if self.sig.has_sort(&s) {
            Ok(s)
        } else {
            Err(perr(pos, format!("unknown sort {name}")))
        }
    }

    fn elab_term(
        &mut self,
        raw: &RawTerm,
        scope: &BTreeMap<String, Binding>,
        eq_vars: Option<&mut BTreeMap<String, (Var, usize)>>,
        expected: Option<&Sort>,
    ) -> Result<Term> {
        let term = self.elab_term_inner(raw, scope, eq_vars)?;
        if let Some(want) = expected {
            self.constrain(&term, want, raw.pos())?;
        }
        Ok(term)
    }

    fn constrain(&mut self, term: &Term, want: &Sort, pos: Pos) -> Result<()> {
        let have = term.sort();
        match (slot_of_sort(have), slot_of_sort(want)) {
            (Some(a), Some(b)) => self.infer.union(a, b, pos),
            (Some(a), None) => self.infer.assign(a, want, pos),
            (None, Some(b)) => self.infer.assign(b, have, pos),
            (None, None) => {
                if have == want {
                    Ok(())
                } else {
                    Err(perr(pos, format!("expected sort {want}, found {have}")))
                }
            }
        }
    }

    fn elab_term_inner(
        &mut self,
        raw: &RawTerm,
        scope: &BTreeMap<String, Binding>,
        mut eq_vars: Option<&mut BTreeMap<String, (Var, usize)>>,
    ) -> Result<Term> {
        match raw {
            RawTerm::Atom(ident, pos) => {
                if let Some(b) = scope.get(ident) {
                    return Ok(match b {
                        Binding::BoundName { name, .. } => Term::Name(name.clone()),
                        Binding::BoundVar { var, .. } => Term::Var(var.clone()),
                    });
                }
                if let Some(n) = self.free_names.get(ident) {
                    return Ok(Term::Name(n.clone()));
                }
                if let Some(sym) = self.sig.symbol(ident) {
                    if sym.arity() == 0 {
                        return self.sig.app(ident, vec![]);
                    }
                }
                if let Some(vars) = eq_vars.as_deref_mut() {
                    if let Some((v, _)) = vars.get(ident) {
                        return Ok(Term::Var(v.clone()));
                    }
                    let slot = self.infer.fresh();
                    let (base, index) = Self::split_ident(ident);
                    let v = Var::indexed(base, index, slot_sort(slot));
                    vars.insert(ident.clone(), (v.clone(), slot));
                    return Ok(Term::Var(v));
                }
                Err(perr(*pos, format!("unbound identifier {ident}")))
            }
            RawTerm::App(name, args, pos) => {
                let sym = self
                    .sig
                    .symbol(name)
                    .cloned()
                    .ok_or_else(|| perr(*pos, format!("unknown function symbol {name}")))?;
                if sym.arity() != args.len() {
                    return Err(perr(
                        *pos,
                        format!("{name} expects {} arguments, got {}", sym.arity(), args.len()),
                    ));
                }
                let mut elab_args = Vec::with_capacity(args.len());
                for (a, want) in args.iter().zip(sym.arg_sorts.clone()) {
                    let t = self.elab_term(a, scope, eq_vars.as_deref_mut(), Some(&want))?;
                    elab_args.push(t);
                }
                Ok(Term::App {
                    sym: sym.name.clone(),
                    sort: sym.result_sort.clone(),
                    args: elab_args.into(),
                })
            }
            RawTerm::Tuple(items, pos) => {
                // right-nested pairs
                let mut desugared = items.last().unwrap().clone();
                for item in items[..items.len() - 1].iter().rev() {
                    desugared = RawTerm::App(
                        "pair".to_string(),
                        vec![item.clone(), desugared],
                        *pos,
                    );
                }
                self.elab_term_inner(&desugared, scope, eq_vars)
            }
            RawTerm::Cons(a, b, pos) => {
                let desugared =
                    RawTerm::App("cons".to_string(), vec![(**a).clone(), (**b).clone()], *pos);
                self.elab_term_inner(&desugared, scope, eq_vars)
            }
            RawTerm::Append(a, b, pos) => {
                let desugared =
                    RawTerm::App("append".to_string(), vec![(**a).clone(), (**b).clone()], *pos);
                self.elab_term_inner(&desugared, scope, eq_vars)
            }
        }
    }

    /// Collect exported variables: active substitutions whose variable is not
    /// bound by an enclosing `new _ : var`.
    fn collect_exports(
        &mut self,
        p: &RawProc,
        bound: &BTreeSet<String>,
        exports: &mut BTreeMap<String, (Var, usize)>,
    ) {
        match p {
            RawProc::Nil => {}
            RawProc::Par(a, b) => {
                self.collect_exports(a, bound, exports);
                self.collect_exports(b, bound, exports);
            }
            RawProc::Repl(q) => self.collect_exports(q, bound, exports),
            RawProc::New { body, .. } => self.collect_exports(body, bound, exports),
            RawProc::NewVar { ident, body } => {
                let mut bound = bound.clone();
                bound.insert(ident.clone());
                self.collect_exports(body, &bound, exports);
            }
            RawProc::Active { ident, .. } => {
                if !bound.contains(ident) && !exports.contains_key(ident) {
                    let slot = self.infer.fresh();
                    let (base, index) = Self::split_ident(ident);
                    let v = Var::indexed(base, index, slot_sort(slot));
                    exports.insert(ident.clone(), (v, slot));
                }
            }
            RawProc::If { then_p, else_p, .. } => {
                self.collect_exports(then_p, bound, exports);
                if let Some(e) = else_p {
                    self.collect_exports(e, bound, exports);
                }
            }
            RawProc::In { body, .. } | RawProc::Out { body, .. } => {
                self.collect_exports(body, bound, exports)
            }
            RawProc::Let { body, .. } => self.collect_exports(body, bound, exports),
        }
    }

    fn elab_proc(
        &mut self,
        raw: &RawProc,
        scope: &BTreeMap<String, Binding>,
    ) -> Result<ExtendedProcess> {
        match raw {
            RawProc::Nil => Ok(ExtendedProcess::Plain(Process::Nil)),
            RawProc::Par(a, b) => {
                Ok(par_auto(self.elab_proc(a, scope)?, self.elab_proc(b, scope)?))
            }
            RawProc::Repl(q) => {
                let inner = self.elab_proc(q, scope)?;
                let plain = expect_plain(inner, "replication")?;
                Ok(ExtendedProcess::Plain(Process::repl(plain)))
            }
            RawProc::New { ident, sort, body, pos } => {
                let (base, index) = Self::split_ident(ident);
                let name = match sort {
                    Some(s) => {
                        let sort = self.lookup_sort(s, *pos)?;
                        Name::indexed(base, index, sort)
                    }
                    None => {
                        let slot = self.infer.fresh();
                        Name::indexed(base, index, slot_sort(slot))
                    }
                };
                let mut scope = scope.clone();
                scope.insert(
                    ident.clone(),
                    Binding::BoundName { name: name.clone() },
                );
                let inner = self.elab_proc(body, &scope)?;
                Ok(res_auto(name, inner))
            }
            RawProc::NewVar { ident, body } => {
                let slot = self.infer.fresh();
                let (base, index) = Self::split_ident(ident);
                let var = Var::indexed(base, index, slot_sort(slot));
                let mut scope = scope.clone();
                scope.insert(
                    ident.clone(),
                    Binding::BoundVar { var: var.clone() },
                );
                let inner = self.elab_proc(body, &scope)?;
                Ok(ExtendedProcess::res_var(var, inner))
            }
            RawProc::Active { term, ident, pos } => {
                let var = match scope.get(ident) {
                    Some(Binding::BoundVar { var, .. }) => var.clone(),
                    Some(Binding::BoundName { .. }) => {
                        return Err(perr(
                            *pos,
                            format!("{ident} is a name; active substitutions bind variables"),
                        ))
                    }
                    None => {
                        return Err(perr(*pos, format!("unregistered export variable {ident}")))
                    }
                };
                let t = self.elab_term(term, scope, None, Some(&var.sort.clone()))?;
                Ok(ExtendedProcess::Active(var, t))
            }
            RawProc::If { lhs, rhs, then_p, else_p } => {
                let l = self.elab_term(lhs, scope, None, None)?;
                let r = self.elab_term(rhs, scope, None, None)?;
                self.constrain(&r, l.sort(), rhs.pos())?;
                let t = expect_plain(self.elab_proc(then_p, scope)?, "conditional")?;
                let e = match else_p {
                    Some(e) => expect_plain(self.elab_proc(e, scope)?, "conditional")?,
                    None => Process::Nil,
                };
                Ok(ExtendedProcess::Plain(Process::if_then_else(l, r, t, e)))
            }
            RawProc::In { chan, ident, body, pos } => {
                let c = self.elab_term(chan, scope, None, Some(&Sort::channel()))?;
                let slot = self.infer.fresh();
                let (base, index) = Self::split_ident(ident);
                let var = Var::indexed(base, index, slot_sort(slot));
                let mut scope = scope.clone();
                scope.insert(
                    ident.clone(),
                    Binding::BoundVar { var: var.clone() },
                );
                let inner = self.elab_proc(body, &scope)?;
                let plain = expect_plain(inner, "input continuation")?;
                let _ = pos;
                Ok(ExtendedProcess::Plain(Process::In {
                    chan: c,
                    var,
                    body: Box::new(plain),
                }))
            }
            RawProc::Out { chan, msg, body } => {
                let c = self.elab_term(chan, scope, None, Some(&Sort::channel()))?;
                let m = self.elab_term(msg, scope, None, None)?;
                let inner = self.elab_proc(body, scope)?;
                let plain = expect_plain(inner, "output continuation")?;
                Ok(ExtendedProcess::Plain(Process::output(c, m, plain)))
            }
            RawProc::Let { ident, term, body } => {
                let t = self.elab_term(term, scope, None, None)?;
                let slot = self.infer.fresh();
                self.constrain(&t, &slot_sort(slot), term.pos())?;
                let (base, index) = Self::split_ident(ident);
                let var = Var::indexed(base, index, slot_sort(slot));
                let mut scope = scope.clone();
                scope.insert(
                    ident.clone(),
                    Binding::BoundVar { var: var.clone() },
                );
                let inner = self.elab_proc(body, &scope)?;
                // let x = M in P is sugar for P{M/x}
                let plain = expect_plain(inner, "let body")?;
                let subst = Substitution::from_iter([(var, t)]);
                Ok(ExtendedProcess::Plain(plain.apply_subst(&subst)))
            }
        }
    }

    /// Replace placeholder sorts with their resolved values.
    fn finalize_term(&mut self, t: &Term, pos: Pos) -> Result<Term> {
        Ok(match t {
            Term::Name(n) => Term::Name(Name {
                base: n.base.clone(),
                index: n.index,
                sort: self.finalize_sort(&n.sort, pos)?,
            }),
            Term::Var(v) => Term::Var(Var {
                base: v.base.clone(),
                index: v.index,
                sort: self.finalize_sort(&v.sort, pos)?,
            }),
            Term::App { sym, sort, args } => Term::App {
                sym: sym.clone(),
                sort: self.finalize_sort(sort, pos)?,
                args: args
                    .iter()
                    .map(|a| self.finalize_term(a, pos))
                    .collect::<Result<Vec<_>>>()?
                    .into(),
            },
        })
    }

    fn finalize_sort(&mut self, s: &Sort, pos: Pos) -> Result<Sort> {
        match slot_of_sort(s) {
            None => Ok(s.clone()),
            Some(slot) => match self.infer.resolved(slot) {
                Some(sort) => Ok(sort),
                None => match &self.default_sort {
                    Some(d) => Ok(d.clone()),
                    None => Err(perr(
                        pos,
                        "cannot infer a sort; annotate with new x : Sort".to_string(),
                    )),
                },
            },
        }
    }

    fn finalize_proc(&mut self, p: &Process, pos: Pos) -> Result<Process> {
        Ok(match p {
            Process::Nil => Process::Nil,
            Process::Par(a, b) => {
                Process::par(self.finalize_proc(a, pos)?, self.finalize_proc(b, pos)?)
            }
            Process::Repl(q) => Process::repl(self.finalize_proc(q, pos)?),
            Process::ResName(n, q) => {
                let n = Name {
                    base: n.base.clone(),
                    index: n.index,
                    sort: self.finalize_sort(&n.sort, pos)?,
                };
                Process::res(n, self.finalize_proc(q, pos)?)
            }
            Process::If { lhs, rhs, then_p, else_p } => Process::if_then_else(
                self.finalize_term(lhs, pos)?,
                self.finalize_term(rhs, pos)?,
                self.finalize_proc(then_p, pos)?,
                self.finalize_proc(else_p, pos)?,
            ),
            Process::In { chan, var, body } => Process::In {
                chan: self.finalize_term(chan, pos)?,
                var: Var {
                    base: var.base.clone(),
                    index: var.index,
                    sort: self.finalize_sort(&var.sort, pos)?,
                },
                body: Box::new(self.finalize_proc(body, pos)?),
            },
            Process::Out { chan, msg, body } => Process::output(
                self.finalize_term(chan, pos)?,
                self.finalize_term(msg, pos)?,
                self.finalize_proc(body, pos)?,
            ),
        })
    }

    fn finalize_extended(&mut self, a: &ExtendedProcess, pos: Pos) -> Result<ExtendedProcess> {
        Ok(match a {
            ExtendedProcess::Plain(p) => ExtendedProcess::Plain(self.finalize_proc(p, pos)?),
            ExtendedProcess::Par(x, y) => ExtendedProcess::par(
                self.finalize_extended(x, pos)?,
                self.finalize_extended(y, pos)?,
            ),
            ExtendedProcess::ResName(n, q) => {
                let n = Name {
                    base: n.base.clone(),
                    index: n.index,
                    sort: self.finalize_sort(&n.sort, pos)?,
                };
                ExtendedProcess::res(n, self.finalize_extended(q, pos)?)
            }
            ExtendedProcess::ResVar(v, q) => {
                let v = Var {
                    base: v.base.clone(),
                    index: v.index,
                    sort: self.finalize_sort(&v.sort, pos)?,
                };
                ExtendedProcess::res_var(v, self.finalize_extended(q, pos)?)
            }
            ExtendedProcess::Active(v, t) => {
                let v = Var {
                    base: v.base.clone(),
                    index: v.index,
                    sort: self.finalize_sort(&v.sort, pos)?,
                };
                ExtendedProcess::Active(v, self.finalize_term(t, pos)?)
            }
        })
    }
}

fn par_auto(a: ExtendedProcess, b: ExtendedProcess) -> ExtendedProcess {
    match (a, b) {
        (ExtendedProcess::Plain(p), ExtendedProcess::Plain(q)) => {
            ExtendedProcess::Plain(Process::par(p, q))
        }
        (a, b) => ExtendedProcess::par(a, b),
    }
}

fn res_auto(n: Name, a: ExtendedProcess) -> ExtendedProcess {
    match a {
        ExtendedProcess::Plain(p) => ExtendedProcess::Plain(Process::res(n, p)),
        other => ExtendedProcess::res(n, other),
    }
}

fn expect_plain(a: ExtendedProcess, what: &str) -> Result<Process> {
    match a {
        ExtendedProcess::Plain(p) => Ok(p),
        _ => Err(Error::model(format!(
            "active substitutions and variable restrictions cannot occur under a {what}"
        ))),
    }
}

/// Parse and elaborate a model file.
pub fn parse_model(text: &str) -> Result<Model> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, ix: 0 };
    let decls = parser.parse_model()?;

    let mut sig = Signature::new();
    // first pass: sorts
    for d in &decls {
        if let RawDecl::Sort(name) = d {
            sig.add_sort(Sort::new(name));
        }
    }
    // second pass: functions
    for d in &decls {
        if let RawDecl::Fun { name, args, result, pos } = d {
            let arg_sorts = args
                .iter()
                .map(|a| {
                    let s = Sort::new(a);
                    if sig.has_sort(&s) {
                        Ok(s)
                    } else {
                        Err(perr(*pos, format!("unknown sort {a}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let rs = Sort::new(result);
            if !sig.has_sort(&rs) {
                return Err(perr(*pos, format!("unknown sort {result}")));
            }
            sig.add_symbol(FunSymbol::new(name.clone(), arg_sorts, rs))?;
        }
    }

    let mut free_names = BTreeMap::new();
    for d in &decls {
        if let RawDecl::Free { name, sort, pos } = d {
            let s = Sort::new(sort);
            if !sig.has_sort(&s) {
                return Err(perr(*pos, format!("unknown sort {sort}")));
            }
            free_names.insert(name.clone(), Name::new(name.clone(), s));
        }
    }

    // the single non-Channel "data" sort, if one exists, is the fallback for
    // unconstrained binders
    let non_channel: Vec<Sort> =
        sig.sorts().filter(|s| !s.is_channel()).cloned().collect();
    let default_sort = match non_channel.as_slice() {
        [only] => Some(only.clone()),
        _ => None,
    };

    let mut elab = Elaborator {
        sig: sig.clone(),
        free_names: free_names.clone(),
        infer: SortInfer::new(),
        default_sort,
    };

    let mut theory = TheorySpec::new(sig);
    let mut warnings = Vec::new();

    for d in &decls {
        if let RawDecl::Equation { lhs, rhs, annot, pos } = d {
            let mut eq_vars = BTreeMap::new();
            let l = elab.elab_term(lhs, &BTreeMap::new(), Some(&mut eq_vars), None)?;
            let r = elab.elab_term(rhs, &BTreeMap::new(), Some(&mut eq_vars), None)?;
            elab.constrain(&r, l.sort(), rhs.pos())?;
            let l = elab.finalize_term(&l, *pos)?;
            let r = elab.finalize_term(&r, *pos)?;
            match annot.as_deref() {
                Some("rule") => theory.add_rule(l, r)?,
                Some("perm") => theory.add_perm(l, r)?,
                Some(other) => {
                    return Err(perr(*pos, format!("unknown equation annotation [{other}]")))
                }
                None => {
                    warnings.push(format!(
                        "line {}: unannotated equation oriented left-to-right as [rule]",
                        pos.line
                    ));
                    theory.add_rule(l, r)?;
                }
            }
        }
    }

    let mut processes = BTreeMap::new();
    let mut process_order = Vec::new();
    for d in &decls {
        if let RawDecl::Process { name, body, pos } = d {
            let mut exports = BTreeMap::new();
            elab.collect_exports(body, &BTreeSet::new(), &mut exports);
            let mut scope = BTreeMap::new();
            for (ident, (var, _slot)) in &exports {
                scope.insert(
                    ident.clone(),
                    Binding::BoundVar { var: var.clone() },
                );
            }
            let raw = elab.elab_proc(body, &scope)?;
            let finalized = elab.finalize_extended(&raw, *pos)?;
            crate::process::sort_check_sig(&finalized, &theory.signature).map_err(|e| {
                Error::model(format!("process {name} (line {}): {e}", pos.line))
            })?;
            if processes.insert(name.clone(), finalized).is_some() {
                return Err(perr(*pos, format!("duplicate process {name}")));
            }
            process_order.push(name.clone());
        }
    }

    let mut queries = Vec::new();
    for d in &decls {
        if let RawDecl::Query(q, pos) = d {
            let resolve_proc = |n: &String| -> Result<String> {
                if processes.contains_key(n) {
                    Ok(n.clone())
                } else {
                    Err(perr(*pos, format!("query references unknown process {n}")))
                }
            };
            let resolve_chan = |n: &String| -> Result<Name> {
                match free_names.get(n) {
                    Some(name) if name.sort.is_channel() => Ok(name.clone()),
                    Some(_) => Err(perr(*pos, format!("{n} is not a channel"))),
                    None => Err(perr(*pos, format!("unknown free channel {n}"))),
                }
            };
            let q = match q {
                RawQuery::Trace { process, goal } => Query::Trace {
                    process: resolve_proc(process)?,
                    goal: match goal {
                        RawGoal::Output(c) => TracePredicate::OutputOn(resolve_chan(c)?),
                        RawGoal::Forged(c, a) => TracePredicate::Forged {
                            out_chan: resolve_chan(c)?,
                            in_chan: resolve_chan(a)?,
                        },
                    },
                },
                RawQuery::StatEq { left, right, budget } => Query::StatEq {
                    left: resolve_proc(left)?,
                    right: resolve_proc(right)?,
                    depth: budget.depth,
                    count: budget.count,
                },
                RawQuery::Bisim { left, right, budget } => Query::Bisim {
                    left: resolve_proc(left)?,
                    right: resolve_proc(right)?,
                    depth: budget.depth,
                    steps: budget.steps,
                    unfold: budget.unfold,
                },
                RawQuery::Convergent => Query::Convergent,
            };
            queries.push(q);
        }
    }

    Ok(Model { theory, free_names, processes, process_order, queries, warnings })
}

/// Parse a term against a model's vocabulary, with extra variables (for
/// example the domain of a frame) in scope.
pub fn parse_term_in(model: &Model, vars: &BTreeMap<String, Var>, text: &str) -> Result<Term> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, ix: 0 };
    let raw = parser.parse_term()?;
    if parser.peek().is_some() {
        return Err(perr(parser.pos(), "trailing input after term"));
    }
    let mut elab = Elaborator {
        sig: model.theory.signature.clone(),
        free_names: model.free_names.clone(),
        infer: SortInfer::new(),
        default_sort: None,
    };
    let mut scope = BTreeMap::new();
    for (ident, var) in vars {
        scope.insert(ident.clone(), Binding::BoundVar { var: var.clone() });
    }
    let t = elab.elab_term(&raw, &scope, None, None)?;
    elab.finalize_term(&t, Pos { line: 1, col: 1 })
}

/// Parse a process against a model's vocabulary.
pub fn parse_process_in(model: &Model, text: &str) -> Result<ExtendedProcess> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, ix: 0 };
    let raw = parser.parse_proc()?;
    if parser.peek().is_some() {
        return Err(perr(parser.pos(), "trailing input after process"));
    }
    let mut elab = Elaborator {
        sig: model.theory.signature.clone(),
        free_names: model.free_names.clone(),
        infer: SortInfer::new(),
        default_sort: None,
    };
    let mut exports = BTreeMap::new();
    elab.collect_exports(&raw, &BTreeSet::new(), &mut exports);
    let mut scope = BTreeMap::new();
    for (ident, (var, _slot)) in &exports {
        scope.insert(ident.clone(), Binding::BoundVar { var: var.clone() });
    }
    let p = elab.elab_proc(&raw, &scope)?;
    let finalized = elab.finalize_extended(&p, Pos { line: 1, col: 1 })?;
    crate::process::sort_check_sig(&finalized, &model.theory.signature)?;
    Ok(finalized)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIRS_MODEL: &str = r#"
(* pairs and a capability process *)
sort Data.
fun pair(Data, Data) : Data.
fun fst(Data) : Data.
fun snd(Data) : Data.
equation fst((x, y)) = x [rule].
equation snd((x, y)) = y [rule].
free a : Channel.
free b : Channel.
free m : Data.
process Cap = new s; (out(a, (m, s)); 0 | in(a, z); if snd(z) = s then out(b, fst(z)); 0).
query trace Cap output(b).
"#;

    #[test]
    fn parse_capability_model() {
        let model = parse_model(PAIRS_MODEL).unwrap();
        assert_eq!(model.theory.rules().len(), 2);
        assert_eq!(model.processes.len(), 1);
        assert_eq!(model.queries.len(), 1);
        assert!(model.warnings.is_empty());
        let p = model.process("Cap").unwrap();
        assert!(p.is_closed());
    }

    #[test]
    fn empty_file_is_empty_model() {
        let model = parse_model("").unwrap();
        assert_eq!(model.processes.len(), 0);
        assert_eq!(model.queries.len(), 0);
        assert_eq!(model.theory.rules().len(), 0);
    }

    #[test]
    fn perm_annotation_builds_perm_equation() {
        let text = r#"
sort Data.
fun g(Data) : Data.
fun f(Data, Data) : Data.
equation f(x, g(y)) = f(y, g(x)) [perm].
"#;
        let model = parse_model(text).unwrap();
        assert_eq!(model.theory.perms().len(), 1);
        assert_eq!(model.theory.rules().len(), 0);
    }

    #[test]
    fn unannotated_equation_warns_and_orients() {
        let text = r#"
sort Data.
fun h(Data) : Data.
fun unh(Data) : Data.
equation unh(h(x)) = x.
"#;
        let model = parse_model(text).unwrap();
        assert_eq!(model.theory.rules().len(), 1);
        assert_eq!(model.warnings.len(), 1);
    }

    #[test]
    fn dh_model_parses_to_expected_structure() {
        let text = r#"
sort Data.
fun g(Data) : Data.
fun f(Data, Data) : Data.
equation f(x, g(y)) = f(y, g(x)) [perm].
free c01 : Channel.
free c10 : Channel.
process DH0 = new n0; (out(c01, g(n0)); 0 | in(c10, x1); out(c01, f(n0, x1)); 0).
"#;
        let model = parse_model(text).unwrap();
        let p = model.process("DH0").unwrap();
        match p {
            ExtendedProcess::Plain(Process::ResName(n, _)) => assert_eq!(&*n.base, "n0"),
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn active_substitution_frame() {
        let text = r#"
sort Data.
fun f(Data) : Data.
process Phi = new k; ({k/x} | {f(k)/y}).
"#;
        let model = parse_model(text).unwrap();
        let p = model.process("Phi").unwrap();
        assert_eq!(p.dom().len(), 2);
        assert!(p.is_closed());
    }

    #[test]
    fn let_desugars_to_substitution() {
        let text = r#"
sort Data.
fun f(Data) : Data.
free c : Channel.
free m : Data.
process P = let x = f(m) in out(c, x); 0.
"#;
        let model = parse_model(text).unwrap();
        let p = model.process("P").unwrap();
        match p {
            ExtendedProcess::Plain(Process::Out { msg, .. }) => {
                assert_eq!(format!("{msg}"), "f(m)");
            }
            other => panic!("let not desugared: {other:?}"),
        }
    }

    #[test]
    fn sort_inference_from_usage() {
        let text = r#"
sort Key.
sort Data.
fun enc(Data, Key) : Data.
free c : Channel.
free m : Data.
process P = new k; out(c, enc(m, k)); 0.
"#;
        let model = parse_model(text).unwrap();
        let p = model.process("P").unwrap();
        match p {
            ExtendedProcess::Plain(Process::ResName(n, _)) => {
                assert_eq!(n.sort, Sort::new("Key"));
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn channel_position_forces_channel_sort() {
        let text = r#"
sort Data.
free m : Data.
process P = new c; out(c, m); 0.
"#;
        let model = parse_model(text).unwrap();
        match model.process("P").unwrap() {
            ExtendedProcess::Plain(Process::ResName(n, _)) => {
                assert!(n.sort.is_channel());
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn sort_conflict_reported() {
        let text = r#"
sort Key.
sort Data.
fun enc(Data, Key) : Data.
fun h(Data) : Data.
free c : Channel.
free m : Data.
process P = new k; out(c, enc(h(k), k)); 0.
"#;
        assert!(matches!(parse_model(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_symbol_is_parse_error() {
        let text = r#"
sort Data.
free c : Channel.
process P = out(c, mystery(c)); 0.
"#;
        assert!(matches!(parse_model(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn infix_list_sugar() {
        let text = r#"
sort Block.
sort BlockList.
fun nil() : BlockList.
fun cons(Block, BlockList) : BlockList.
fun append(BlockList, Block) : BlockList.
free c : Channel.
free m : Block.
free n : Block.
process P = out(c, m :: n :: nil); 0.
process Q = out(c, (m :: nil) ++ n); 0.
"#;
        let model = parse_model(text).unwrap();
        match model.process("P").unwrap() {
            ExtendedProcess::Plain(Process::Out { msg, .. }) => {
                assert_eq!(format!("{msg}"), "m :: n :: nil");
            }
            other => panic!("unexpected {other:?}"),
        }
        match model.process("Q").unwrap() {
            ExtendedProcess::Plain(Process::Out { msg, .. }) => {
                assert_eq!(format!("{msg}"), "(m :: nil) ++ n");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn term_round_trip() {
        let model = parse_model(PAIRS_MODEL).unwrap();
        let vars = BTreeMap::from([("x".to_string(), Var::new("x", Sort::new("Data")))]);
        for text in ["(m, x)", "fst((m, m))", "snd(x)"] {
            let t = parse_term_in(&model, &vars, text).unwrap();
            let printed = format!("{t}");
            let again = parse_term_in(&model, &vars, &printed).unwrap();
            assert_eq!(t, again, "{text} -> {printed}");
        }
    }

    #[test]
    fn process_round_trip() {
        let model = parse_model(PAIRS_MODEL).unwrap();
        let p = model.process("Cap").unwrap().clone();
        let printed = format!("{p}");
        let again = parse_process_in(&model, &printed).unwrap();
        assert_eq!(p, again, "printed: {printed}");
    }

    #[test]
    fn comments_and_nesting() {
        let text = "(* outer (* inner *) still comment *) sort Data.";
        let model = parse_model(text).unwrap();
        assert!(model.theory.signature.has_sort(&Sort::new("Data")));
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_model("sort .").unwrap_err();
        match err {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn query_budget_clauses() {
        let text = r#"
sort Data.
process A = 0.
process B = 0.
query stateq A B depth 3 count 500.
query bisim A B depth 2 steps 6 unfold 1.
query convergent.
"#;
        let model = parse_model(text).unwrap();
        assert_eq!(model.queries.len(), 3);
        match &model.queries[0] {
            Query::StatEq { depth, count, .. } => {
                assert_eq!(*depth, Some(3));
                assert_eq!(*count, Some(500));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &model.queries[1] {
            Query::Bisim { depth, steps, unfold, .. } => {
                assert_eq!((depth, steps, unfold), (&Some(2), &Some(6), &Some(1)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
