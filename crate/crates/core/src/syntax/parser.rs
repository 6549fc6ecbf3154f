use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{lex, Spanned, Tok};
use super::{ParseError, ParseErrorKind};
use crate::config::{AnalysisConfig, CostModel, InputId, Mode, SchedulerPolicy};
use crate::lattice::{Category, Lattice, LevelTriple, SecEnv};
use crate::model::Model;

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    p.model()?;
    p.finish()
}

/// Parses a standalone process term. Identifiers are taken as variables; `read`
/// arguments as channels.
pub fn parse_process(text: &str) -> Result<Process, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks);
    let proc = p.process()?;
    p.expect(&Tok::Eof)?;
    Ok(resolve_read_args(proc))
}

fn resolve_read_args(p: Process) -> Process {
    map_exprs(p, &mut |e| resolve_expr(e, &|_| true))
}

fn resolve_expr(e: Expr, is_chan: &dyn Fn(&str) -> bool) -> Expr {
    match e {
        Expr::Call(Intrinsic::Read, args) => Expr::Call(
            Intrinsic::Read,
            args.into_iter()
                .map(|a| match a {
                    Expr::Var(x) if is_chan(&x) => Expr::Chan(x),
                    other => other,
                })
                .collect(),
        ),
        Expr::Call(f, args) => Expr::Call(
            f,
            args.into_iter().map(|a| resolve_expr(a, is_chan)).collect(),
        ),
        Expr::Bin(op, a, b) => Expr::Bin(
            op,
            Box::new(resolve_expr(*a, is_chan)),
            Box::new(resolve_expr(*b, is_chan)),
        ),
        other => other,
    }
}

fn map_bool(b: BoolExpr, f: &mut dyn FnMut(Expr) -> Expr) -> BoolExpr {
    match b {
        BoolExpr::True => BoolExpr::True,
        BoolExpr::Not(x) => BoolExpr::Not(Box::new(map_bool(*x, f))),
        BoolExpr::And(x, y) => BoolExpr::And(Box::new(map_bool(*x, f)), Box::new(map_bool(*y, f))),
        BoolExpr::Cmp(op, x, y) => BoolExpr::Cmp(op, f(x), f(y)),
    }
}

fn map_exprs(p: Process, f: &mut dyn FnMut(Expr) -> Expr) -> Process {
    match p {
        Process::Assign(x, e) => Process::Assign(x, f(e)),
        Process::Send(a, e) => Process::Send(a, f(e)),
        Process::Seq(a, b) => Process::seq(map_exprs(*a, f), map_exprs(*b, f)),
        Process::Par(a, b) => Process::par(map_exprs(*a, f), map_exprs(*b, f)),
        Process::Branch {
            guard,
            then_branch,
            else_branch,
        } => Process::Branch {
            guard: map_bool(guard, f),
            then_branch: Box::new(map_exprs(*then_branch, f)),
            else_branch: Box::new(map_exprs(*else_branch, f)),
        },
        Process::Loop { guard, body } => Process::Loop {
            guard: map_bool(guard, f),
            body: Box::new(map_exprs(*body, f)),
        },
        Process::TimedComm {
            deadline,
            chan,
            value,
            var,
            cont,
        } => Process::TimedComm {
            deadline,
            chan,
            value: f(value),
            var,
            cont: Box::new(map_exprs(*cont, f)),
        },
        other => other,
    }
}

struct LineDecl {
    label: String,
    owner: Option<String>,
    init: Option<i64>,
    pos: (usize, usize),
}

enum CatSpec {
    Full,
    Atoms(Vec<String>),
}

struct ObsDecl {
    level: String,
    inst: CatSpec,
    host: CatSpec,
    pos: (usize, usize),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    lattice_elems: Vec<String>,
    lattice_covers: Vec<(String, String)>,
    lattice_declared: bool,
    declared_atoms: BTreeSet<String>,
    hosts: Vec<HostTerm>,
    host_cats: BTreeMap<String, (Vec<String>, (usize, usize))>,
    vm_cats: BTreeMap<String, Vec<String>>,
    vm_pos: Vec<(String, (usize, usize))>,
    vars: BTreeMap<String, (String, i64, (usize, usize))>,
    lines: BTreeMap<String, LineDecl>,
    channels: BTreeMap<String, (String, (usize, usize))>,
    finals: Vec<(bool, String, String, (usize, usize))>,
    config: AnalysisConfig,
    obs: Option<ObsDecl>,
    domains: Vec<(InputId, Vec<i64>, (usize, usize))>,
    /// First use of each identifier, for error positions.
    uses: HashMap<(&'static str, String), (usize, usize)>,
}

impl Parser {
    fn new(toks: Vec<Spanned>) -> Self {
        Self {
            toks,
            pos: 0,
            lattice_elems: Vec::new(),
            lattice_covers: Vec::new(),
            lattice_declared: false,
            declared_atoms: BTreeSet::new(),
            hosts: Vec::new(),
            host_cats: BTreeMap::new(),
            vm_cats: BTreeMap::new(),
            vm_pos: Vec::new(),
            vars: BTreeMap::new(),
            lines: BTreeMap::new(),
            channels: BTreeMap::new(),
            finals: Vec::new(),
            config: AnalysisConfig::default(),
            obs: None,
            domains: Vec::new(),
            uses: HashMap::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (l, c) = self.here();
        Err(ParseError::syntax(l, c, msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.unexpected(&match t {
                Tok::Eof => "end of input".to_string(),
                t => t.describe(),
            })
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn use_ident(&mut self, kind: &'static str) -> Result<String, ParseError> {
        let pos = self.here();
        let s = self.ident()?;
        self.uses.entry((kind, s.clone())).or_insert(pos);
        Ok(s)
    }

    fn nat(&mut self) -> Result<u64, ParseError> {
        match *self.peek() {
            Tok::Int(n) => {
                self.advance();
                Ok(n as u64)
            }
            _ => self.unexpected("natural number"),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(n) => {
                self.advance();
                Ok(if neg { -n } else { n })
            }
            _ => self.unexpected("integer"),
        }
    }

    fn int_list(&mut self) -> Result<Vec<i64>, ParseError> {
        let mut v = vec![self.int()?];
        while self.eat(&Tok::Comma) {
            v.push(self.int()?);
        }
        Ok(v)
    }

    fn ident_list_braced(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut v = Vec::new();
        if !self.eat(&Tok::RBrace) {
            v.push(self.ident()?);
            while self.eat(&Tok::Comma) {
                v.push(self.ident()?);
            }
            self.expect(&Tok::RBrace)?;
        }
        Ok(v)
    }

    // ---------------------------------------------------------------- model items

    fn model(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::ParBar => {
                    self.advance();
                }
                Tok::Ident(kw) => match kw.as_str() {
                    "lattice" => self.lattice_item()?,
                    "atoms" => {
                        self.advance();
                        let atoms = self.ident_list_braced()?;
                        self.declared_atoms.extend(atoms);
                        self.eat(&Tok::Semi);
                    }
                    "host" => self.host_item()?,
                    "var" => self.var_item()?,
                    "line" => self.line_item()?,
                    "channel" => self.channel_item()?,
                    "final" => self.final_item()?,
                    "config" => self.config_item()?,
                    _ => return self.unexpected("a model item"),
                },
                _ => return self.unexpected("a model item"),
            }
        }
    }

    fn lattice_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("lattice")?;
        self.lattice_declared = true;
        self.expect(&Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            let mut prev = self.ident()?;
            self.add_elem(&prev);
            while self.eat(&Tok::Lt) {
                let next = self.ident()?;
                self.add_elem(&next);
                self.lattice_covers.push((prev, next.clone()));
                prev = next;
            }
            if !self.eat(&Tok::Semi) && self.peek() != &Tok::RBrace {
                return self.unexpected("`;` or `}`");
            }
        }
        Ok(())
    }

    fn add_elem(&mut self, e: &str) {
        if !self.lattice_elems.iter().any(|x| x == e) {
            self.lattice_elems.push(e.to_string());
        }
    }

    fn category_clause(&mut self) -> Result<Option<Vec<String>>, ParseError> {
        if self.eat_kw("category") {
            Ok(Some(self.ident_list_braced()?))
        } else {
            Ok(None)
        }
    }

    fn host_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("host")?;
        let pos = self.here();
        let id = self.ident()?;
        if let Some(cat) = self.category_clause()? {
            if let Some((prev, _)) = self.host_cats.get(&id) {
                let a: BTreeSet<&String> = prev.iter().collect();
                let b: BTreeSet<&String> = cat.iter().collect();
                if a != b {
                    return Err(ParseError::at(
                        ParseErrorKind::Invalid,
                        pos,
                        format!("host `{id}` declared with two different categories"),
                    ));
                }
            }
            self.host_cats.insert(id.clone(), (cat, pos));
        } else {
            self.host_cats.entry(id.clone()).or_insert((Vec::new(), pos));
        }
        self.expect(&Tok::LBrace)?;
        let mut body: Option<Hosted> = None;
        while !self.eat(&Tok::RBrace) {
            if self.eat(&Tok::ParBar) {
                continue;
            }
            let vm = self.vm()?;
            body = Some(match body {
                None => Hosted::Vm(vm),
                Some(b) => Hosted::par(b, Hosted::Vm(vm)),
            });
        }
        self.hosts.push(HostTerm { id, body });
        Ok(())
    }

    fn vm(&mut self) -> Result<VmTerm, ParseError> {
        self.expect_kw("vm")?;
        let pos = self.here();
        let id = self.ident()?;
        let cat = self.category_clause()?.unwrap_or_default();
        self.vm_cats.insert(id.clone(), cat);
        self.vm_pos.push((id.clone(), pos));
        self.expect_kw("pages")?;
        let pages_pos = self.here();
        let pages: Vec<String> = self.ident_list_braced()?;
        for p in &pages {
            self.uses.entry(("line", p.clone())).or_insert(pages_pos);
        }
        self.expect(&Tok::LBrace)?;
        let body = if self.peek() == &Tok::RBrace {
            Process::Skip
        } else {
            self.process()?
        };
        self.expect(&Tok::RBrace)?;
        Ok(VmTerm {
            id,
            pages: pages.into_iter().collect(),
            body,
        })
    }

    fn var_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("var")?;
        let pos = self.here();
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        self.expect(&Tok::Colon)?;
        let label = self.ident()?;
        let init = if self.eat(&Tok::Eq) { self.int()? } else { 0 };
        self.expect(&Tok::Semi)?;
        for n in names {
            if self.vars.contains_key(&n) {
                return Err(ParseError::at(
                    ParseErrorKind::Invalid,
                    pos,
                    format!("variable `{n}` declared twice"),
                ));
            }
            self.vars.insert(n, (label.clone(), init, pos));
        }
        Ok(())
    }

    fn line_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("line")?;
        let pos = self.here();
        let mut names = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            names.push(self.ident()?);
        }
        self.expect(&Tok::Colon)?;
        let label = self.ident()?;
        let owner = if self.eat_kw("owner") {
            Some(self.use_ident("instance")?)
        } else {
            None
        };
        let init = if self.eat(&Tok::Eq) {
            Some(self.int()?)
        } else {
            None
        };
        self.expect(&Tok::Semi)?;
        for n in names {
            if self.lines.contains_key(&n) {
                return Err(ParseError::at(
                    ParseErrorKind::Invalid,
                    pos,
                    format!("line `{n}` declared twice"),
                ));
            }
            self.lines.insert(
                n,
                LineDecl {
                    label: label.clone(),
                    owner: owner.clone(),
                    init,
                    pos,
                },
            );
        }
        Ok(())
    }

    fn channel_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("channel")?;
        let pos = self.here();
        let name = self.ident()?;
        self.expect(&Tok::Arrow)?;
        let line = self.use_ident("line")?;
        self.expect(&Tok::Semi)?;
        if self.channels.insert(name.clone(), (line, pos)).is_some() {
            return Err(ParseError::at(
                ParseErrorKind::Invalid,
                pos,
                format!("channel `{name}` declared twice"),
            ));
        }
        Ok(())
    }

    fn final_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("final")?;
        self.expect(&Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            let is_line = self.eat_kw("line");
            let pos = self.here();
            let name = self.ident()?;
            self.expect(&Tok::Colon)?;
            let label = self.ident()?;
            self.expect(&Tok::Semi)?;
            self.finals.push((is_line, name, label, pos));
        }
        Ok(())
    }

    fn cat_spec(&mut self) -> Result<CatSpec, ParseError> {
        if self.eat_kw("full") {
            Ok(CatSpec::Full)
        } else {
            Ok(CatSpec::Atoms(self.ident_list_braced()?))
        }
    }

    fn config_item(&mut self) -> Result<(), ParseError> {
        self.expect_kw("config")?;
        self.expect(&Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            let pos = self.here();
            let key = self.ident()?;
            match key.as_str() {
                "mode" => {
                    let m = self.ident()?;
                    self.config.mode = m
                        .parse::<Mode>()
                        .map_err(|e| ParseError::at(ParseErrorKind::Invalid, pos, e))?;
                }
                "obs" => {
                    let level = self.ident()?;
                    let inst = self.cat_spec()?;
                    let host = self.cat_spec()?;
                    self.obs = Some(ObsDecl {
                        level,
                        inst,
                        host,
                        pos,
                    });
                }
                "cost" => {
                    let kind = self.ident()?;
                    let n = self.nat()?;
                    self.config.costs.comm = format!("{kind}:{n}")
                        .parse::<CostModel>()
                        .map_err(|e| ParseError::at(ParseErrorKind::Invalid, pos, e))?;
                }
                "recv_cost" => self.config.costs.recv = self.nat()?,
                "fuel" => self.config.fuel = self.nat()? as u32,
                "max_runs" => self.config.max_runs = self.nat()? as usize,
                "scheduler" => {
                    let s = self.ident()?;
                    self.config.scheduler = s
                        .parse::<SchedulerPolicy>()
                        .map_err(|e| ParseError::at(ParseErrorKind::Invalid, pos, e))?;
                }
                "domain" => {
                    let is_line = self.eat_kw("line");
                    let mut names = vec![self.ident()?];
                    while self.eat(&Tok::Comma) {
                        names.push(self.ident()?);
                    }
                    self.expect(&Tok::Eq)?;
                    let values = self.int_list()?;
                    for n in names {
                        let id = if is_line {
                            InputId::Line(n)
                        } else {
                            InputId::Var(n)
                        };
                        self.domains.push((id, values.clone(), pos));
                    }
                }
                "keys" => self.config.keys = self.int_list()?,
                "permissive_tstop" => self.config.permissive_tstop = true,
                "symmetric_equiv" => self.config.symmetric_equiv = true,
                other => {
                    return Err(ParseError::at(
                        ParseErrorKind::Syntax,
                        pos,
                        format!("unknown config setting `{other}`"),
                    ))
                }
            }
            self.expect(&Tok::Semi)?;
        }
        Ok(())
    }

    // ---------------------------------------------------------------- processes

    pub(super) fn process(&mut self) -> Result<Process, ParseError> {
        let mut p = self.seq_process()?;
        while self.eat(&Tok::ParBar) {
            let q = self.seq_process()?;
            p = Process::par(p, q);
        }
        Ok(p)
    }

    fn seq_process(&mut self) -> Result<Process, ParseError> {
        let first = self.atom_process()?;
        if self.eat(&Tok::Semi) {
            if matches!(self.peek(), Tok::RBrace | Tok::RParen | Tok::ParBar | Tok::Eof) {
                return Ok(first);
            }
            let rest = self.seq_process()?;
            Ok(Process::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn block(&mut self) -> Result<Process, ParseError> {
        self.expect(&Tok::LBrace)?;
        let p = if self.peek() == &Tok::RBrace {
            Process::Skip
        } else {
            self.process()?
        };
        self.expect(&Tok::RBrace)?;
        Ok(p)
    }

    fn atom_process(&mut self) -> Result<Process, ParseError> {
        if self.eat(&Tok::LParen) {
            let p = self.process()?;
            self.expect(&Tok::RParen)?;
            return Ok(p);
        }
        let Tok::Ident(word) = self.peek().clone() else {
            return self.unexpected("a process");
        };
        let next = self.peek_at(1).clone();
        match (word.as_str(), &next) {
            ("skip", _) => {
                self.advance();
                Ok(Process::Skip)
            }
            ("stop", _) => {
                self.advance();
                Ok(Process::Stop)
            }
            ("sleep", Tok::LParen) => {
                self.advance();
                self.advance();
                let n = self.nat()?;
                self.expect(&Tok::RParen)?;
                Ok(Process::Sleep(n))
            }
            ("moveP", Tok::LParen) => {
                self.advance();
                self.advance();
                let i = self.use_ident("instance")?;
                self.expect(&Tok::RParen)?;
                Ok(Process::MoveProcess(i))
            }
            ("moveI", Tok::LParen) => {
                self.advance();
                self.advance();
                let h = self.use_ident("host")?;
                self.expect(&Tok::RParen)?;
                Ok(Process::MoveInstance(h))
            }
            ("if", _) => {
                self.advance();
                let guard = self.bool_expr()?;
                let t = self.block()?;
                self.expect_kw("else")?;
                let e = self.block()?;
                Ok(Process::branch(guard, t, e))
            }
            ("while", _) => {
                self.advance();
                let guard = self.bool_expr()?;
                let body = self.block()?;
                Ok(Process::looping(guard, body))
            }
            ("within", Tok::Int(_)) => {
                self.advance();
                let deadline = self.nat()?;
                self.expect(&Tok::LBrace)?;
                let pos = self.here();
                let chan = self.use_ident("chan")?;
                self.expect(&Tok::Bang)?;
                let value = self.expr()?;
                self.expect(&Tok::Arrow)?;
                let chan2 = self.use_ident("chan")?;
                if chan2 != chan {
                    return Err(ParseError::at(
                        ParseErrorKind::Syntax,
                        pos,
                        format!(
                            "timed communication sends on `{chan}` but receives on `{chan2}`"
                        ),
                    ));
                }
                self.expect(&Tok::Question)?;
                let var = self.use_ident("var")?;
                self.expect(&Tok::RBrace)?;
                let cont = if self.eat_kw("then") {
                    self.block()?
                } else {
                    Process::Skip
                };
                Ok(Process::TimedComm {
                    deadline,
                    chan,
                    value,
                    var,
                    cont: Box::new(cont),
                })
            }
            (_, Tok::Assign) => {
                let x = self.use_ident("var")?;
                self.advance();
                let e = self.expr()?;
                Ok(Process::Assign(x, e))
            }
            (_, Tok::Bang) => {
                let a = self.use_ident("chan")?;
                self.advance();
                let e = self.expr()?;
                Ok(Process::Send(a, e))
            }
            (_, Tok::Question) => {
                let a = self.use_ident("chan")?;
                self.advance();
                let x = self.use_ident("var")?;
                Ok(Process::Recv(a, x))
            }
            _ => self.unexpected("a process"),
        }
    }

    // ---------------------------------------------------------------- expressions

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(e),
            };
            self.advance();
            let r = self.term()?;
            e = Expr::bin(op, e, r);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(e),
            };
            self.advance();
            let r = self.factor()?;
            e = Expr::bin(op, e, r);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.advance();
                let Tok::Int(n) = self.advance() else {
                    unreachable!()
                };
                Ok(Expr::Int(-n))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::LParen => {
                let pos = self.here();
                let f = Intrinsic::from_name(&name).ok_or_else(|| {
                    ParseError::at(
                        ParseErrorKind::Syntax,
                        pos,
                        format!("unknown function `{name}`"),
                    )
                })?;
                self.advance();
                self.advance();
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    args.push(self.expr()?);
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(&Tok::RParen)?;
                }
                if args.len() != f.arity() {
                    return Err(ParseError::at(
                        ParseErrorKind::Syntax,
                        pos,
                        format!(
                            "`{}` takes {} argument(s), got {}",
                            f.name(),
                            f.arity(),
                            args.len()
                        ),
                    ));
                }
                if f == Intrinsic::Read && !matches!(args[0], Expr::Var(_)) {
                    return Err(ParseError::at(
                        ParseErrorKind::Syntax,
                        pos,
                        "`read` takes a channel name",
                    ));
                }
                Ok(Expr::Call(f, args))
            }
            Tok::Ident(_) => Ok(Expr::Var(self.use_ident("var")?)),
            _ => self.unexpected("an expression"),
        }
    }

    fn bool_expr(&mut self) -> Result<BoolExpr, ParseError> {
        let mut b = self.bool_unary()?;
        while self.eat(&Tok::AndAnd) {
            let r = self.bool_unary()?;
            b = BoolExpr::And(Box::new(b), Box::new(r));
        }
        Ok(b)
    }

    fn bool_unary(&mut self) -> Result<BoolExpr, ParseError> {
        if self.eat(&Tok::Bang) {
            return Ok(BoolExpr::Not(Box::new(self.bool_unary()?)));
        }
        if self.eat_kw("true") {
            return Ok(BoolExpr::True);
        }
        if self.eat_kw("false") {
            return Ok(BoolExpr::Not(Box::new(BoolExpr::True)));
        }
        if self.peek() == &Tok::LParen {
            // Either a parenthesised boolean or a comparison whose left operand starts
            // with a parenthesis; try the comparison first.
            let save = self.pos;
            let saved_uses = self.uses.clone();
            if let Ok(c) = self.comparison() {
                return Ok(c);
            }
            self.pos = save;
            self.uses = saved_uses;
            self.advance();
            let b = self.bool_expr()?;
            self.expect(&Tok::RParen)?;
            return Ok(b);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<BoolExpr, ParseError> {
        let a = self.expr()?;
        let op = match self.peek() {
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::EqEq => CmpOp::Eq,
            _ => return self.unexpected("a comparison operator"),
        };
        self.advance();
        let b = self.expr()?;
        Ok(BoolExpr::Cmp(op, a, b))
    }

    // ---------------------------------------------------------------- validation

    fn pos_of(&self, kind: &'static str, name: &str) -> (usize, usize) {
        self.uses
            .get(&(kind, name.to_string()))
            .copied()
            .unwrap_or((0, 0))
    }

    fn undeclared(&self, kind: &'static str, name: &str) -> ParseError {
        ParseError::at(
            ParseErrorKind::Undeclared,
            self.pos_of(kind, name),
            format!("undeclared {} `{name}`", kind_name(kind)),
        )
    }

    fn finish(mut self) -> Result<Model, ParseError> {
        let lattice = if self.lattice_declared {
            Lattice::from_hasse(&self.lattice_elems, &self.lattice_covers)
        } else {
            Lattice::chain(&["L"])
        }
        .map_err(|e| ParseError::at(ParseErrorKind::Invalid, (0, 0), e.to_string()))?;
        let label = |name: &str, pos: (usize, usize)| {
            lattice.label(name).ok_or_else(|| {
                ParseError::at(
                    ParseErrorKind::Undeclared,
                    pos,
                    format!("undeclared security label `{name}`"),
                )
            })
        };

        if self.hosts.is_empty() {
            return Err(ParseError::at(
                ParseErrorKind::Invalid,
                (0, 0),
                "model declares no host",
            ));
        }

        // Instances: unique ids, disjoint pages.
        let mut page_owner: BTreeMap<String, String> = BTreeMap::new();
        let mut instances: BTreeMap<String, String> = BTreeMap::new();
        for h in &self.hosts {
            for vm in h.body.iter().flat_map(|b| b.vms()) {
                if instances.insert(vm.id.clone(), h.id.clone()).is_some() {
                    let pos = self
                        .vm_pos
                        .iter()
                        .filter(|(id, _)| *id == vm.id)
                        .nth(1)
                        .map(|(_, p)| *p)
                        .unwrap_or((0, 0));
                    return Err(ParseError::at(
                        ParseErrorKind::DuplicateInstance,
                        pos,
                        format!("instance `{}` declared more than once", vm.id),
                    ));
                }
                for page in &vm.pages {
                    if !self.lines.contains_key(page) {
                        return Err(self.undeclared("line", page));
                    }
                    if let Some(prev) = page_owner.insert(page.clone(), vm.id.clone()) {
                        return Err(ParseError::at(
                            ParseErrorKind::OverlappingPages,
                            self.pos_of("line", page),
                            format!(
                                "cache line `{page}` allocated to both `{prev}` and `{}`",
                                vm.id
                            ),
                        ));
                    }
                }
            }
        }

        let mut env = SecEnv::default();
        let mut var_init = BTreeMap::new();
        for (x, (lab, init, pos)) in &self.vars {
            env.var_labels.insert(x.clone(), label(lab, *pos)?);
            var_init.insert(x.clone(), *init);
        }
        let mut cache_init = BTreeMap::new();
        for (l, decl) in &self.lines {
            env.line_labels.insert(l.clone(), label(&decl.label, decl.pos)?);
            let owner = match (page_owner.get(l), &decl.owner) {
                (Some(p), Some(o)) if p != o => {
                    return Err(ParseError::at(
                        ParseErrorKind::Invalid,
                        decl.pos,
                        format!("line `{l}` is in the pages of `{p}` but declared owned by `{o}`"),
                    ))
                }
                (Some(p), _) => p.clone(),
                (None, Some(o)) => {
                    if !instances.contains_key(o) {
                        return Err(self.undeclared("instance", o));
                    }
                    o.clone()
                }
                (None, None) => {
                    return Err(ParseError::at(
                        ParseErrorKind::Invalid,
                        decl.pos,
                        format!("line `{l}` is in no instance's pages and has no owner"),
                    ))
                }
            };
            env.line_owner.insert(l.clone(), owner);
            cache_init.insert(l.clone(), decl.init);
        }

        let mut atoms: BTreeSet<String> = self.declared_atoms.clone();
        for (h, (cat, _)) in &self.host_cats {
            atoms.extend(cat.iter().cloned());
            env.host_cat
                .insert(h.clone(), cat.iter().cloned().collect::<Category>());
        }
        for (i, cat) in &self.vm_cats {
            atoms.extend(cat.iter().cloned());
            env.inst_cat
                .insert(i.clone(), cat.iter().cloned().collect::<Category>());
        }
        let universe: Category = atoms.iter().cloned().collect();

        let mut channels = BTreeMap::new();
        for (c, (line, pos)) in &self.channels {
            if !self.lines.contains_key(line) {
                return Err(ParseError::at(
                    ParseErrorKind::Undeclared,
                    *pos,
                    format!("channel `{c}` maps to undeclared line `{line}`"),
                ));
            }
            if self.vars.contains_key(c) {
                return Err(ParseError::at(
                    ParseErrorKind::Invalid,
                    *pos,
                    format!("`{c}` declared both as variable and channel"),
                ));
            }
            channels.insert(c.clone(), line.clone());
        }

        // Resolve `read` arguments to channels and check every identifier in the
        // process terms.
        let chan_names: BTreeSet<String> = channels.keys().cloned().collect();
        let mut hosts = std::mem::take(&mut self.hosts);
        for h in hosts.iter_mut() {
            if let Some(body) = h.body.take() {
                h.body = Some(map_hosted(body, &mut |p| {
                    map_exprs(p, &mut |e| resolve_expr(e, &|x| chan_names.contains(x)))
                }));
            }
        }
        for h in &hosts {
            for vm in h.body.iter().flat_map(|b| b.vms()) {
                self.check_process(&vm.body, &channels, &instances)?;
            }
        }
        let network = hosts
            .into_iter()
            .map(Network::Host)
            .reduce(Network::par)
            .expect("at least one host");

        let signature = if self.finals.is_empty() {
            None
        } else {
            let mut sig = env.clone();
            for (is_line, name, lab, pos) in &self.finals {
                let l = label(lab, *pos)?;
                let slot = if *is_line {
                    sig.line_labels.get_mut(name)
                } else {
                    sig.var_labels.get_mut(name)
                };
                match slot {
                    Some(s) => *s = l,
                    None => {
                        return Err(ParseError::at(
                            ParseErrorKind::Undeclared,
                            *pos,
                            format!(
                                "final label for undeclared {} `{name}`",
                                if *is_line { "line" } else { "variable" }
                            ),
                        ))
                    }
                }
            }
            Some(sig)
        };

        let mut config = self.config.clone();
        for (id, values, pos) in &self.domains {
            let known = match id {
                InputId::Var(x) => self.vars.contains_key(x),
                InputId::Line(l) => self.lines.contains_key(l),
            };
            if !known {
                return Err(ParseError::at(
                    ParseErrorKind::Undeclared,
                    *pos,
                    format!("domain for undeclared identifier `{id}`"),
                ));
            }
            config.domains.insert(id.clone(), values.clone());
        }
        if let Some(obs) = &self.obs {
            let resolve = |spec: &CatSpec| -> Result<Category, ParseError> {
                match spec {
                    CatSpec::Full => Ok(universe.clone()),
                    CatSpec::Atoms(a) => {
                        if let Some(bad) = a.iter().find(|x| !universe.contains(x)) {
                            return Err(ParseError::at(
                                ParseErrorKind::Undeclared,
                                obs.pos,
                                format!("undeclared category atom `{bad}`"),
                            ));
                        }
                        Ok(a.iter().cloned().collect())
                    }
                }
            };
            config.obs = Some(LevelTriple::new(
                label(&obs.level, obs.pos)?,
                resolve(&obs.inst)?,
                resolve(&obs.host)?,
            ));
        }
        if config.keys.is_empty() {
            return Err(ParseError::at(
                ParseErrorKind::Invalid,
                (0, 0),
                "key domain must not be empty",
            ));
        }

        Ok(Model {
            lattice,
            atoms: universe,
            network,
            env,
            signature,
            channels,
            var_init,
            cache_init,
            config,
        })
    }

    fn check_process(
        &self,
        p: &Process,
        channels: &BTreeMap<String, String>,
        instances: &BTreeMap<String, String>,
    ) -> Result<(), ParseError> {
        for x in p.variables() {
            if !self.vars.contains_key(&x) {
                if channels.contains_key(&x) {
                    return Err(ParseError::at(
                        ParseErrorKind::Invalid,
                        self.pos_of("var", &x),
                        format!("channel `{x}` used as a value"),
                    ));
                }
                return Err(self.undeclared("var", &x));
            }
        }
        for c in p.channels() {
            if !channels.contains_key(&c) {
                return Err(self.undeclared("chan", &c));
            }
        }
        let mut result = Ok(());
        p.visit(&mut |q| {
            if result.is_err() {
                return;
            }
            match q {
                Process::MoveProcess(i) if !instances.contains_key(i) => {
                    result = Err(self.undeclared("instance", i))
                }
                Process::MoveInstance(h) if !self.host_cats.contains_key(h) => {
                    result = Err(self.undeclared("host", h))
                }
                _ => {}
            }
        });
        result
    }
}

fn map_hosted(h: Hosted, f: &mut dyn FnMut(Process) -> Process) -> Hosted {
    match h {
        Hosted::Vm(mut vm) => {
            vm.body = f(vm.body);
            Hosted::Vm(vm)
        }
        Hosted::Par(a, b) => Hosted::par(map_hosted(*a, f), map_hosted(*b, f)),
    }
}

fn kind_name(kind: &str) -> &str {
    match kind {
        "var" => "variable",
        "chan" => "channel",
        "line" => "cache line",
        other => other,
    }
}
