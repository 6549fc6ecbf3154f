use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Intrinsic {
    KeyGen,
    Encrypt,
    Decrypt,
    Read,
}

impl Intrinsic {
    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::KeyGen => "keyGen",
            Intrinsic::Encrypt => "encrypt",
            Intrinsic::Decrypt => "decrypt",
            Intrinsic::Read => "read",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Intrinsic::KeyGen => 0,
            Intrinsic::Read => 1,
            Intrinsic::Encrypt | Intrinsic::Decrypt => 2,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "keyGen" => Intrinsic::KeyGen,
            "encrypt" => Intrinsic::Encrypt,
            "decrypt" => Intrinsic::Decrypt,
            "read" => Intrinsic::Read,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(String),
    /// A channel name. Only meaningful as the argument of `read`.
    Chan(String),
    Int(i64),
    /// A message literal, interned to an integer when evaluated.
    Str(String),
    Bin(ArithOp, Box<Expr>, Box<Expr>),
    Call(Intrinsic, Vec<Expr>),
}

impl Expr {
    pub fn bin(op: ArithOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn var(x: &str) -> Self {
        Expr::Var(x.to_string())
    }

    /// Free variables, in first-occurrence order without repeats.
    pub fn free_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(x) => {
                if !out.contains(&x.as_str()) {
                    out.push(x)
                }
            }
            Expr::Chan(_) | Expr::Int(_) | Expr::Str(_) => {}
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn channels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Chan(c) = e {
                out.push(c.as_str())
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolExpr {
    True,
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Cmp(CmpOp, Expr, Expr),
}

impl BoolExpr {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        BoolExpr::Cmp(op, a, b)
    }

    pub fn free_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.exprs(&mut |e| {
            for v in e.free_vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        });
        out
    }

    pub fn exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        match self {
            BoolExpr::True => {}
            BoolExpr::Not(b) => b.exprs(f),
            BoolExpr::And(a, b) => {
                a.exprs(f);
                b.exprs(f);
            }
            BoolExpr::Cmp(_, a, b) => {
                f(a);
                f(b);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Assign(String, Expr),
    Stop,
    Skip,
    Sleep(u64),
    MoveProcess(String),
    MoveInstance(String),
    Seq(Box<Process>, Box<Process>),
    /// `then ◁ guard ▷ else`
    Branch {
        guard: BoolExpr,
        then_branch: Box<Process>,
        else_branch: Box<Process>,
    },
    Loop {
        guard: BoolExpr,
        body: Box<Process>,
    },
    Send(String, Expr),
    Recv(String, String),
    Par(Box<Process>, Box<Process>),
    /// Deadline-padded communication `a!value ∥ a?var` that completes in exactly
    /// `deadline` ticks, then continues with `cont`.
    TimedComm {
        deadline: u64,
        chan: String,
        value: Expr,
        var: String,
        cont: Box<Process>,
    },
}

impl Process {
    pub fn seq(a: Process, b: Process) -> Self {
        Process::Seq(Box::new(a), Box::new(b))
    }

    pub fn par(a: Process, b: Process) -> Self {
        Process::Par(Box::new(a), Box::new(b))
    }

    pub fn assign(x: &str, e: Expr) -> Self {
        Process::Assign(x.to_string(), e)
    }

    pub fn branch(guard: BoolExpr, then_branch: Process, else_branch: Process) -> Self {
        Process::Branch {
            guard,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    pub fn looping(guard: BoolExpr, body: Process) -> Self {
        Process::Loop {
            guard,
            body: Box::new(body),
        }
    }

    /// Right-nested sequence of the given processes. Empty input gives `skip`.
    pub fn seq_all<I: IntoIterator<Item = Process>>(items: I) -> Self {
        let mut items: Vec<Process> = items.into_iter().collect();
        let mut acc = match items.pop() {
            Some(p) => p,
            None => return Process::Skip,
        };
        while let Some(p) = items.pop() {
            acc = Process::seq(p, acc);
        }
        acc
    }

    /// Splits top-level parallel composition into its operands, left to right.
    pub fn par_operands(&self) -> Vec<&Process> {
        match self {
            Process::Par(a, b) => {
                let mut v = a.par_operands();
                v.extend(b.par_operands());
                v
            }
            p => vec![p],
        }
    }

    /// Every variable the process reads or writes, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |p| match p {
            Process::Assign(x, e) => {
                out.insert(x.clone());
                out.extend(e.free_vars().into_iter().map(String::from));
            }
            Process::Recv(_, x) => {
                out.insert(x.clone());
            }
            Process::Send(_, e) => out.extend(e.free_vars().into_iter().map(String::from)),
            Process::Branch { guard, .. } | Process::Loop { guard, .. } => {
                out.extend(guard.free_vars().into_iter().map(String::from))
            }
            Process::TimedComm { value, var, .. } => {
                out.insert(var.clone());
                out.extend(value.free_vars().into_iter().map(String::from));
            }
            _ => {}
        });
        out
    }

    /// Every channel the process names (send, receive, timed communication, `read`).
    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |p| {
            let mut exprs: Vec<&Expr> = Vec::new();
            match p {
                Process::Send(a, e) => {
                    out.insert(a.clone());
                    exprs.push(e);
                }
                Process::Recv(a, _) => {
                    out.insert(a.clone());
                }
                Process::TimedComm { chan, value, .. } => {
                    out.insert(chan.clone());
                    exprs.push(value);
                }
                Process::Assign(_, e) => exprs.push(e),
                Process::Branch { guard, .. } | Process::Loop { guard, .. } => {
                    guard.exprs(&mut |e| exprs.push(e))
                }
                _ => {}
            }
            for e in exprs {
                out.extend(e.channels().into_iter().map(String::from));
            }
        });
        out
    }

    /// Pre-order traversal of every sub-process.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Process)) {
        f(self);
        match self {
            Process::Seq(a, b) | Process::Par(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Process::Branch {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.visit(f);
                else_branch.visit(f);
            }
            Process::Loop { body, .. } => body.visit(f),
            Process::TimedComm { cont, .. } => cont.visit(f),
            _ => {}
        }
    }

    pub fn at_path(&self, path: &Path) -> Option<&Process> {
        let mut cur = self;
        for seg in &path.0 {
            cur = match (seg, cur) {
                (PathSeg::SeqFirst, Process::Seq(a, _)) => a,
                (PathSeg::SeqSecond, Process::Seq(_, b)) => b,
                (PathSeg::ParLeft, Process::Par(a, _)) => a,
                (PathSeg::ParRight, Process::Par(_, b)) => b,
                (PathSeg::Then, Process::Branch { then_branch, .. }) => then_branch,
                (PathSeg::Else, Process::Branch { else_branch, .. }) => else_branch,
                (PathSeg::LoopBody, Process::Loop { body, .. }) => body,
                (PathSeg::TimedCont, Process::TimedComm { cont, .. }) => cont,
                _ => return None,
            };
        }
        Some(cur)
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathSeg {
    SeqFirst,
    SeqSecond,
    ParLeft,
    ParRight,
    Then,
    Else,
    LoopBody,
    TimedCont,
}

impl PathSeg {
    fn name(self) -> &'static str {
        match self {
            PathSeg::SeqFirst => "seq.0",
            PathSeg::SeqSecond => "seq.1",
            PathSeg::ParLeft => "par.0",
            PathSeg::ParRight => "par.1",
            PathSeg::Then => "then",
            PathSeg::Else => "else",
            PathSeg::LoopBody => "body",
            PathSeg::TimedCont => "cont",
        }
    }
}

/// Location of a sub-process inside a component's process term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<PathSeg>);

impl Path {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn child(&self, seg: PathSeg) -> Path {
        let mut v = self.0.clone();
        v.push(seg);
        Path(v)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "/");
        }
        for s in &self.0 {
            write!(f, "/{}", s.name())?;
        }
        Ok(())
    }
}

/// A VM instance with its allocated cache pages and the process it runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VmTerm {
    pub id: String,
    pub pages: BTreeSet<String>,
    pub body: Process,
}

/// Instances placed on a host: `i:[[I]].M ∥ ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Hosted {
    Vm(VmTerm),
    Par(Box<Hosted>, Box<Hosted>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HostTerm {
    pub id: String,
    /// `None` for a host that currently runs no instance.
    pub body: Option<Hosted>,
}

/// A virtual private network: `h:[[H]] ∥ ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Network {
    Host(HostTerm),
    Par(Box<Network>, Box<Network>),
}

impl Network {
    pub fn par(a: Network, b: Network) -> Self {
        Network::Par(Box::new(a), Box::new(b))
    }

    pub fn hosts(&self) -> Vec<&HostTerm> {
        match self {
            Network::Host(h) => vec![h],
            Network::Par(a, b) => {
                let mut v = a.hosts();
                v.extend(b.hosts());
                v
            }
        }
    }

    pub fn vms(&self) -> Vec<(&str, &VmTerm)> {
        self.hosts()
            .into_iter()
            .flat_map(|h| {
                h.body
                    .iter()
                    .flat_map(|b| b.vms())
                    .map(move |vm| (h.id.as_str(), vm))
            })
            .collect()
    }
}

impl Hosted {
    pub fn par(a: Hosted, b: Hosted) -> Self {
        Hosted::Par(Box::new(a), Box::new(b))
    }

    pub fn vms(&self) -> Vec<&VmTerm> {
        match self {
            Hosted::Vm(v) => vec![v],
            Hosted::Par(a, b) => {
                let mut v = a.vms();
                v.extend(b.vms());
                v
            }
        }
    }
}

/// One `h:i:[[P]].M` term of the parallel decomposition of a network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Component {
    pub host: String,
    pub instance: String,
    pub process: Process,
    pub pages: BTreeSet<String>,
}

impl Component {
    pub fn label(&self) -> String {
        format!("{}:{}", self.host, self.instance)
    }
}
