//! The flow security type system: judgements `(τ, ω_I, ω_H) ⊢ Ξ {P} Ξ′`.
//!
//! The checker is algorithmic. It computes the least final environment of a
//! process; subsumption is applied afterwards as a conformance check of the
//! computed environment against a declared one.

mod network;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use network::{typecheck_network, ComponentTyping, NetworkTypeError, NetworkTyping};

use crate::lattice::{Category, EnvEntry, EnvError, Label, Lattice, LevelTriple, SecEnv};
use crate::syntax::{BoolExpr, Expr, Path, PathSeg, Process};

/// The counter `(τ, ω_I, ω_H)`.
pub type Counter = LevelTriple;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{rule} at {path}: {message}")]
pub struct TypeError {
    /// `host:instance` of the offending component, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
    pub rule: String,
    pub path: String,
    pub message: String,
    pub idents: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
}

impl TypeError {
    fn new(rule: &str, path: &Path, message: impl Into<String>) -> Self {
        Self {
            component: None,
            rule: rule.to_string(),
            path: path.to_string(),
            message: message.into(),
            idents: Vec::new(),
            expected: None,
            actual: None,
        }
    }

    fn env(rule: &str, path: &Path, e: EnvError) -> Self {
        let mut err = Self::new(rule, path, e.to_string());
        match e {
            EnvError::OwnershipConflict { line, .. } => err.idents.push(line),
            EnvError::Missing { ident, .. } | EnvError::DomainMismatch { ident, .. } => {
                err.idents.push(ident)
            }
            EnvError::Lattice(_) => {}
        }
        err
    }
}

/// The rule application tree of a successful check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub rule: &'static str,
    pub path: String,
    /// Number of body checks the loop fixpoint took.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub children: Vec<Derivation>,
}

impl Derivation {
    fn leaf(rule: &'static str, path: &Path) -> Self {
        Self {
            rule,
            path: path.to_string(),
            iterations: None,
            children: Vec::new(),
        }
    }

    fn node(rule: &'static str, path: &Path, children: Vec<Derivation>) -> Self {
        Self {
            rule,
            path: path.to_string(),
            iterations: None,
            children,
        }
    }

    /// Iteration counts of every loop fixpoint in the tree, pre-order.
    pub fn loop_iterations(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_iterations(&mut out);
        out
    }

    fn collect_iterations(&self, out: &mut Vec<usize>) {
        if let Some(n) = self.iterations {
            out.push(n);
        }
        for c in &self.children {
            c.collect_iterations(out);
        }
    }
}

/// Where the checked process may currently run. Branches and loops whose arms
/// move differently leave several candidates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Loc {
    pub instances: BTreeSet<String>,
    pub hosts: BTreeSet<String>,
}

impl Loc {
    pub fn at(instance: &str, host: &str) -> Self {
        Self {
            instances: [instance.to_string()].into(),
            hosts: [host.to_string()].into(),
        }
    }

    fn union(&self, other: &Loc) -> Loc {
        Loc {
            instances: self.instances.union(&other.instances).cloned().collect(),
            hosts: self.hosts.union(&other.hosts).cloned().collect(),
        }
    }
}

/// The rule and position that last raised an identifier's label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raise {
    pub rule: &'static str,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct State {
    env: SecEnv,
    loc: Loc,
    prov: BTreeMap<EnvEntry, Raise>,
}

/// The outcome of checking one process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Typing {
    pub env_after: SecEnv,
    pub loc_after: Loc,
    pub derivation: Derivation,
    pub provenance: BTreeMap<EnvEntry, Raise>,
}

/// Static facts about the component whose process is checked.
#[derive(Debug, Clone)]
pub struct TypeCtx<'a> {
    pub lattice: &'a Lattice,
    pub channels: &'a BTreeMap<String, String>,
    /// Instance → host placement, for the host a process lands on after a move.
    pub placement: &'a BTreeMap<String, String>,
    /// `Var_P`: every variable of the component's process.
    pub vars: BTreeSet<String>,
    /// `CLines_P`: the component's cache pages.
    pub pages: BTreeSet<String>,
    /// The component's own counter; `stop` and `skip` are typable only here.
    pub base: Counter,
    pub permissive_tstop: bool,
}

/// Counter plus the guard, if any, that raised its level.
#[derive(Clone)]
struct Ambient {
    counter: Counter,
    raised_by: Option<Raise>,
}

/// `t = ⊔ Ξ(x)` over the free variables; a channel has its line's label.
pub fn type_of_expr(
    lattice: &Lattice,
    channels: &BTreeMap<String, String>,
    env: &SecEnv,
    e: &Expr,
) -> Result<Label, EnvError> {
    Ok(match e {
        Expr::Int(_) | Expr::Str(_) => lattice.bottom(),
        Expr::Var(x) => env.var(x)?,
        Expr::Chan(c) => {
            let line = channels.get(c).ok_or_else(|| EnvError::Missing {
                kind: "channel",
                ident: c.clone(),
            })?;
            env.line(line)?
        }
        Expr::Bin(_, a, b) => lattice.try_join(
            type_of_expr(lattice, channels, env, a)?,
            type_of_expr(lattice, channels, env, b)?,
        )?,
        Expr::Call(_, args) => {
            let mut t = lattice.bottom();
            for a in args {
                t = lattice.try_join(t, type_of_expr(lattice, channels, env, a)?)?;
            }
            t
        }
    })
}

pub fn type_of_bool(
    lattice: &Lattice,
    channels: &BTreeMap<String, String>,
    env: &SecEnv,
    b: &BoolExpr,
) -> Result<Label, EnvError> {
    let mut t = Ok(lattice.bottom());
    b.exprs(&mut |e| {
        if let Ok(acc) = t {
            t = type_of_expr(lattice, channels, env, e).and_then(|l| Ok(lattice.try_join(acc, l)?));
        }
    });
    t
}

/// Upper bound on loop fixpoint iterations: every step of the ascending chain
/// raises some label or category.
pub fn fixpoint_bound(lattice: &Lattice, env: &SecEnv) -> usize {
    let atoms: BTreeSet<&str> = env
        .host_cat
        .values()
        .chain(env.inst_cat.values())
        .flat_map(|c| c.atoms())
        .collect();
    (env.var_labels.len() + env.line_labels.len()) * lattice.height()
        + (env.host_cat.len() + env.inst_cat.len()) * (atoms.len() + 1)
        + 1
}

impl TypeCtx<'_> {
    /// Checks `counter ⊢ env {p} env′` starting at `loc`.
    pub fn typecheck(
        &self,
        counter: &Counter,
        env: &SecEnv,
        loc: &Loc,
        p: &Process,
    ) -> Result<Typing, TypeError> {
        self.run(counter, env, loc, p, None)
    }

    /// Re-applies a recorded derivation, with loops iterated exactly as recorded.
    pub fn replay(
        &self,
        counter: &Counter,
        env: &SecEnv,
        loc: &Loc,
        p: &Process,
        derivation: &Derivation,
    ) -> Result<SecEnv, TypeError> {
        self.run(counter, env, loc, p, Some(derivation)).map(|t| t.env_after)
    }

    fn run(
        &self,
        counter: &Counter,
        env: &SecEnv,
        loc: &Loc,
        p: &Process,
        guide: Option<&Derivation>,
    ) -> Result<Typing, TypeError> {
        let st = State {
            env: env.clone(),
            loc: loc.clone(),
            prov: BTreeMap::new(),
        };
        let amb = Ambient {
            counter: counter.clone(),
            raised_by: None,
        };
        let (st, derivation) = self.check(&amb, st, p, &Path::root(), guide)?;
        Ok(Typing {
            env_after: st.env,
            loc_after: st.loc,
            derivation,
            provenance: st.prov,
        })
    }

    /// Least fixpoint of the loop rule.
    pub fn loop_fixpoint(
        &self,
        counter: &Counter,
        env: &SecEnv,
        loc: &Loc,
        guard: &BoolExpr,
        body: &Process,
    ) -> Result<(SecEnv, usize), TypeError> {
        let p = Process::looping(guard.clone(), body.clone());
        let t = self.typecheck(counter, env, loc, &p)?;
        Ok((t.env_after, t.derivation.iterations.unwrap_or(0)))
    }

    fn lub(&self, a: Label, b: Label) -> Label {
        self.lattice.join(a, b)
    }

    fn raise_source(&self, amb: &Ambient, t: Label, rule: &'static str, path: &Path) -> Raise {
        match &amb.raised_by {
            Some(r) if !self.lattice.leq(amb.counter.level, t) => r.clone(),
            _ => Raise {
                rule,
                path: path.clone(),
            },
        }
    }

    fn expr_type(&self, env: &SecEnv, e: &Expr, rule: &str, path: &Path) -> Result<Label, TypeError> {
        type_of_expr(self.lattice, self.channels, env, e).map_err(|err| TypeError::env(rule, path, err))
    }

    fn line_of(&self, chan: &str, rule: &str, path: &Path) -> Result<String, TypeError> {
        self.channels.get(chan).cloned().ok_or_else(|| {
            let mut e = TypeError::new(rule, path, format!("channel `{chan}` has no cache line"));
            e.idents.push(chan.to_string());
            e
        })
    }

    fn set_var(&self, st: &mut State, x: &str, l: Label, raise: Raise, rule: &str, path: &Path) -> Result<(), TypeError> {
        match st.env.var_labels.get_mut(x) {
            Some(slot) => {
                *slot = l;
                st.prov.insert(EnvEntry::Var(x.to_string()), raise);
                Ok(())
            }
            None => Err(TypeError::env(
                rule,
                path,
                EnvError::Missing {
                    kind: "variable",
                    ident: x.to_string(),
                },
            )),
        }
    }

    fn set_line(&self, st: &mut State, line: &str, l: Label, raise: Raise, rule: &str, path: &Path) -> Result<(), TypeError> {
        match st.env.line_labels.get_mut(line) {
            Some(slot) => {
                *slot = l;
                st.prov.insert(EnvEntry::Line(line.to_string()), raise);
                Ok(())
            }
            None => Err(TypeError::env(
                rule,
                path,
                EnvError::Missing {
                    kind: "cache line",
                    ident: line.to_string(),
                },
            )),
        }
    }

    fn at_base(&self, amb: &Ambient) -> bool {
        self.permissive_tstop || amb.counter == self.base
    }

    fn counter_error(&self, rule: &str, path: &Path, amb: &Ambient) -> TypeError {
        let mut e = TypeError::new(
            rule,
            path,
            format!(
                "requires counter {} but the counter is {}",
                self.base.render(self.lattice),
                amb.counter.render(self.lattice)
            ),
        );
        e.expected = Some(self.base.render(self.lattice));
        e.actual = Some(amb.counter.render(self.lattice));
        if let Some(r) = &amb.raised_by {
            e.message.push_str(&format!(" (raised by the guard at {})", r.path));
        }
        e
    }

    fn join_states(
        &self,
        mut a: State,
        mut b: State,
        before: &SecEnv,
        rule: &str,
        path: &Path,
    ) -> Result<State, TypeError> {
        reconcile_owners(&mut a.env, &mut b.env, before);
        let env = a
            .env
            .join(&b.env, self.lattice)
            .map_err(|e| TypeError::env(rule, path, e))?;
        // Keep the provenance of whichever operand produced the larger label.
        let mut prov = a.prov.clone();
        for (k, rb) in b.prov {
            let take_b = match prov.get(&k) {
                None => true,
                Some(_) => !entry_leq(&k, &b.env, &a.env, self.lattice),
            };
            if take_b {
                prov.insert(k, rb);
            }
        }
        Ok(State {
            env,
            loc: a.loc.union(&b.loc),
            prov,
        })
    }

    fn check_guide<'g>(
        &self,
        guide: Option<&'g Derivation>,
        rule: &'static str,
        path: &Path,
    ) -> Result<Option<&'g Derivation>, TypeError> {
        match guide {
            Some(d) if d.rule != rule => Err(TypeError::new(
                rule,
                path,
                format!("derivation records rule {} here", d.rule),
            )),
            g => Ok(g),
        }
    }

    fn child(guide: Option<&Derivation>, k: usize) -> Option<&Derivation> {
        guide.and_then(|d| d.children.get(k))
    }

    fn check(
        &self,
        amb: &Ambient,
        mut st: State,
        p: &Process,
        path: &Path,
        guide: Option<&Derivation>,
    ) -> Result<(State, Derivation), TypeError> {
        let tau = amb.counter.level;
        match p {
            Process::Assign(x, e) => {
                self.check_guide(guide, "TASS", path)?;
                let t = self.expr_type(&st.env, e, "TASS", path)?;
                let raise = self.raise_source(amb, t, "TASS", path);
                self.set_var(&mut st, x, self.lub(tau, t), raise, "TASS", path)?;
                Ok((st, Derivation::leaf("TASS", path)))
            }
            Process::Stop => {
                self.check_guide(guide, "TSTOP", path)?;
                if !self.at_base(amb) {
                    return Err(self.counter_error("TSTOP", path, amb));
                }
                self.flush_pages(&mut st, path);
                Ok((st, Derivation::leaf("TSTOP", path)))
            }
            Process::Skip => {
                self.check_guide(guide, "TSKIP", path)?;
                if !self.at_base(amb) {
                    return Err(self.counter_error("TSKIP", path, amb));
                }
                Ok((st, Derivation::leaf("TSKIP", path)))
            }
            Process::Sleep(_) => {
                self.check_guide(guide, "TSLEEP", path)?;
                Ok((st, Derivation::leaf("TSLEEP", path)))
            }
            Process::MoveProcess(dest) => {
                self.check_guide(guide, "TMOVE", path)?;
                let raise = Raise {
                    rule: "TMOVE",
                    path: path.clone(),
                };
                self.raise_process_identifiers(&mut st, tau, &raise);
                for l in &self.pages {
                    st.env.line_owner.insert(l.clone(), dest.clone());
                }
                let omega = st
                    .loc
                    .instances
                    .iter()
                    .fold(Category::empty(), |acc, i| acc.join(&st.env.instance_category(i)));
                let omega2 = st.env.instance_category(dest);
                let joined = omega.join(&omega2).join(&amb.counter.inst_cat);
                st.env.inst_cat.insert(dest.clone(), joined);
                st.prov.insert(EnvEntry::Instance(dest.clone()), raise);
                st.loc = match self.placement.get(dest) {
                    Some(h) => Loc::at(dest, h),
                    None => Loc {
                        instances: [dest.clone()].into(),
                        hosts: st.loc.hosts.clone(),
                    },
                };
                Ok((st, Derivation::leaf("TMOVE", path)))
            }
            Process::MoveInstance(dest) => {
                self.check_guide(guide, "TMOVE-I", path)?;
                let raise = Raise {
                    rule: "TMOVE-I",
                    path: path.clone(),
                };
                self.raise_process_identifiers(&mut st, tau, &raise);
                let omega = st
                    .loc
                    .hosts
                    .iter()
                    .fold(Category::empty(), |acc, h| acc.join(&st.env.host_category(h)));
                let omega2 = st.env.host_category(dest);
                let joined = omega.join(&omega2).join(&amb.counter.host_cat);
                st.env.host_cat.insert(dest.clone(), joined);
                st.prov.insert(EnvEntry::Host(dest.clone()), raise);
                st.loc.hosts = [dest.clone()].into();
                Ok((st, Derivation::leaf("TMOVE-I", path)))
            }
            Process::Seq(a, b) => {
                let g = self.check_guide(guide, "TSEQ", path)?;
                let (st, da) = self.check(amb, st, a, &path.child(PathSeg::SeqFirst), Self::child(g, 0))?;
                let (st, db) = self.check(amb, st, b, &path.child(PathSeg::SeqSecond), Self::child(g, 1))?;
                Ok((st, Derivation::node("TSEQ", path, vec![da, db])))
            }
            Process::Send(a, e) => {
                self.check_guide(guide, "TSEND", path)?;
                let t = self.expr_type(&st.env, e, "TSEND", path)?;
                let line = self.line_of(a, "TSEND", path)?;
                let raise = self.raise_source(amb, t, "TSEND", path);
                self.set_line(&mut st, &line, self.lub(tau, t), raise, "TSEND", path)?;
                Ok((st, Derivation::leaf("TSEND", path)))
            }
            Process::Recv(a, x) => {
                self.check_guide(guide, "TRECV", path)?;
                let line = self.line_of(a, "TRECV", path)?;
                let t = st
                    .env
                    .line(&line)
                    .map_err(|e| TypeError::env("TRECV", path, e))?;
                let raise = self.raise_source(amb, t, "TRECV", path);
                self.set_var(&mut st, x, self.lub(tau, t), raise, "TRECV", path)?;
                Ok((st, Derivation::leaf("TRECV", path)))
            }
            Process::Branch {
                guard,
                then_branch,
                else_branch,
            } => {
                let g = self.check_guide(guide, "TBRANCH", path)?;
                let t = type_of_bool(self.lattice, self.channels, &st.env, guard)
                    .map_err(|e| TypeError::env("TBRANCH", path, e))?;
                let inner = self.raised(amb, t, "TBRANCH", path);
                let before = st.env.clone();
                let (a, da) = self.check(&inner, st.clone(), then_branch, &path.child(PathSeg::Then), Self::child(g, 0))?;
                let (b, db) = self.check(&inner, st, else_branch, &path.child(PathSeg::Else), Self::child(g, 1))?;
                let st = self.join_states(a, b, &before, "TBRANCH", path)?;
                Ok((st, Derivation::node("TBRANCH", path, vec![da, db])))
            }
            Process::Loop { guard, body } => {
                let g = self.check_guide(guide, "TLOOP", path)?;
                let fixed = g.and_then(|d| d.iterations);
                let bound = fixpoint_bound(self.lattice, &st.env);
                let base = st.clone();
                let body_path = path.child(PathSeg::LoopBody);
                let mut cur = st;
                let mut children = Vec::new();
                let mut n = 0;
                loop {
                    let t = type_of_bool(self.lattice, self.channels, &cur.env, guard)
                        .map_err(|e| TypeError::env("TLOOP", path, e))?;
                    let inner = self.raised(amb, t, "TLOOP", path);
                    let (after, d) = self.check(&inner, cur.clone(), body, &body_path, Self::child(g, n))?;
                    children.push(d);
                    n += 1;
                    let next = self.join_states(after, base.clone(), &base.env, "TLOOP", path)?;
                    let stable = next.env == cur.env && next.loc == cur.loc;
                    cur = next;
                    match fixed {
                        Some(k) if n >= k => break,
                        Some(_) => {}
                        None if stable => break,
                        None => {}
                    }
                    if n > bound {
                        return Err(TypeError::new(
                            "TLOOP",
                            path,
                            format!("fixpoint not reached within {bound} iterations"),
                        ));
                    }
                }
                let mut d = Derivation::node("TLOOP", path, children);
                d.iterations = Some(n);
                Ok((cur, d))
            }
            Process::Par(a, b) => {
                let g = self.check_guide(guide, "TPAR", path)?;
                let before = st.env.clone();
                let (sa, da) = self.check(amb, st.clone(), a, &path.child(PathSeg::ParLeft), Self::child(g, 0))?;
                let (sb, db) = self.check(amb, st, b, &path.child(PathSeg::ParRight), Self::child(g, 1))?;
                let st = self.join_states(sa, sb, &before, "TPAR", path)?;
                Ok((st, Derivation::node("TPAR", path, vec![da, db])))
            }
            Process::TimedComm {
                chan,
                value,
                var,
                cont,
                ..
            } => {
                let g = self.check_guide(guide, "TCOMM", path)?;
                let t = self.expr_type(&st.env, value, "TCOMM", path)?;
                let line = self.line_of(chan, "TCOMM", path)?;
                let raise = self.raise_source(amb, t, "TSEND", path);
                let lt = self.lub(tau, t);
                self.set_line(&mut st, &line, lt, raise, "TCOMM", path)?;
                let raise = self.raise_source(amb, lt, "TRECV", path);
                self.set_var(&mut st, var, self.lub(tau, lt), raise, "TCOMM", path)?;
                let (st, dc) = self.check(amb, st, cont, &path.child(PathSeg::TimedCont), Self::child(g, 0))?;
                Ok((st, Derivation::node("TCOMM", path, vec![dc])))
            }
        }
    }

    fn raised(&self, amb: &Ambient, t: Label, rule: &'static str, path: &Path) -> Ambient {
        let level = self.lub(amb.counter.level, t);
        let raised_by = if level != amb.counter.level {
            Some(Raise {
                rule,
                path: path.clone(),
            })
        } else {
            amb.raised_by.clone()
        };
        Ambient {
            counter: Counter::new(level, amb.counter.inst_cat.clone(), amb.counter.host_cat.clone()),
            raised_by,
        }
    }

    fn flush_pages(&self, st: &mut State, path: &Path) {
        for l in &self.pages {
            if let Some(slot) = st.env.line_labels.get_mut(l) {
                *slot = self.lattice.bottom();
                st.prov.insert(
                    EnvEntry::Line(l.clone()),
                    Raise {
                        rule: "TSTOP",
                        path: path.clone(),
                    },
                );
            }
        }
    }

    fn raise_process_identifiers(&self, st: &mut State, tau: Label, raise: &Raise) {
        for x in &self.vars {
            if let Some(slot) = st.env.var_labels.get_mut(x) {
                let new = self.lattice.join(*slot, tau);
                if new != *slot {
                    *slot = new;
                    st.prov.insert(EnvEntry::Var(x.clone()), raise.clone());
                }
            }
        }
        for l in &self.pages {
            if let Some(slot) = st.env.line_labels.get_mut(l) {
                let new = self.lattice.join(*slot, tau);
                if new != *slot {
                    *slot = new;
                    st.prov.insert(EnvEntry::Line(l.clone()), raise.clone());
                }
            }
        }
    }
}

/// Where only one operand retargeted a line's owner, both adopt the new owner.
/// Lines retargeted differently by both operands are left to conflict in the join.
pub(crate) fn reconcile_owners(a: &mut SecEnv, b: &mut SecEnv, before: &SecEnv) {
    for (line, owner_b) in b.line_owner.iter_mut() {
        let Some(owner_a) = a.line_owner.get_mut(line) else {
            continue;
        };
        if owner_a == owner_b {
            continue;
        }
        match before.line_owner.get(line) {
            Some(orig) if orig == owner_a => *owner_a = owner_b.clone(),
            Some(orig) if orig == owner_b => *owner_b = owner_a.clone(),
            _ => {}
        }
    }
}

fn entry_leq(k: &EnvEntry, a: &SecEnv, b: &SecEnv, lattice: &Lattice) -> bool {
    match k {
        EnvEntry::Var(x) => match (a.var_labels.get(x), b.var_labels.get(x)) {
            (Some(p), Some(q)) => lattice.leq(*p, *q),
            _ => true,
        },
        EnvEntry::Line(x) => match (a.line_labels.get(x), b.line_labels.get(x)) {
            (Some(p), Some(q)) => lattice.leq(*p, *q),
            _ => true,
        },
        EnvEntry::Host(h) => a.host_category(h).leq(&b.host_category(h)),
        EnvEntry::Instance(i) => a.instance_category(i).leq(&b.instance_category(i)),
    }
}

/// Subsumption against a declared final environment: `computed ⊑ declared`.
pub fn conformance(
    lattice: &Lattice,
    computed: &SecEnv,
    declared: &SecEnv,
    provenance: &BTreeMap<EnvEntry, Raise>,
) -> Result<(), TypeError> {
    let Some(entry) = computed.first_violation(declared, lattice) else {
        return Ok(());
    };
    let (rule, path) = provenance
        .get(&entry)
        .map(|r| (r.rule, r.path.clone()))
        .unwrap_or(("TSUB", Path::root()));
    let actual = entry.render_in(computed, lattice);
    let expected = entry.render_in(declared, lattice);
    let mut e = TypeError::new(
        rule,
        &path,
        format!(
            "{} `{}` is raised to {actual} above its declared {expected}",
            entry.kind(),
            entry.ident()
        ),
    );
    e.idents.push(entry.ident().to_string());
    e.expected = Some(expected);
    e.actual = Some(actual);
    Err(e)
}

/// The base counter of a component: `(⊥, β_i(instance), β_h(host))`.
pub fn base_counter(lattice: &Lattice, env: &SecEnv, instance: &str, host: &str) -> Counter {
    Counter::new(
        lattice.bottom(),
        env.instance_category(instance),
        env.host_category(host),
    )
}
