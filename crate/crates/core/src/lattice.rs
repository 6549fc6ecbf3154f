//! Finite security lattices, category orders and the flow security environment.
//!
//! A [`Lattice`] is declared as a Hasse diagram (elements plus covering pairs); the
//! reflexive-transitive closure and the join table are computed once at construction, so
//! every later query is a table lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("lattice has no elements")]
    Empty,
    #[error("duplicate lattice element `{0}`")]
    DuplicateElement(String),
    #[error("unknown lattice element `{0}`")]
    UnknownElement(String),
    #[error("ordering is not antisymmetric: `{0}` and `{1}` are mutually below each other")]
    NotAntisymmetric(String, String),
    #[error("elements `{0}` and `{1}` have no unique least upper bound")]
    NoJoin(String, String),
    #[error("lattice has no bottom element")]
    NoBottom,
    #[error("label index {0} does not belong to this lattice")]
    ForeignLabel(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("environments differ on their {kind} domain (`{ident}`)")]
    DomainMismatch { kind: &'static str, ident: String },
    #[error("cache line `{line}` owned by both `{first}` and `{second}`")]
    OwnershipConflict {
        line: String,
        first: String,
        second: String,
    },
    #[error("no label for {kind} `{ident}`")]
    Missing { kind: &'static str, ident: String },
}

/// An element of a [`Lattice`], stored as an index into its element table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub(crate) usize);

impl Label {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    names: Vec<String>,
    leq: Vec<Vec<bool>>,
    join: Vec<Vec<usize>>,
    bottom: usize,
    top: usize,
    height: usize,
}

impl Lattice {
    /// Builds a lattice from its element names and covering pairs `(lower, upper)`.
    pub fn from_hasse<S: AsRef<str>>(
        elements: &[S],
        covers: &[(S, S)],
    ) -> Result<Self, LatticeError> {
        if elements.is_empty() {
            return Err(LatticeError::Empty);
        }
        let mut names: Vec<String> = Vec::with_capacity(elements.len());
        for e in elements {
            let e = e.as_ref();
            if names.iter().any(|n| n == e) {
                return Err(LatticeError::DuplicateElement(e.to_string()));
            }
            names.push(e.to_string());
        }
        let n = names.len();
        let idx = |s: &str| {
            names
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| LatticeError::UnknownElement(s.to_string()))
        };
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (lo, hi) in covers {
            leq[idx(lo.as_ref())?][idx(hi.as_ref())?] = true;
        }
        // Warshall closure.
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    let row = leq[k].clone();
                    for (cell, &via) in leq[i].iter_mut().zip(&row) {
                        *cell |= via;
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if leq[i][j] && leq[j][i] {
                    return Err(LatticeError::NotAntisymmetric(
                        names[i].clone(),
                        names[j].clone(),
                    ));
                }
            }
        }
        let mut join = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let uppers: Vec<usize> = (0..n).filter(|&u| leq[a][u] && leq[b][u]).collect();
                let least: Vec<usize> = uppers
                    .iter()
                    .copied()
                    .filter(|&u| uppers.iter().all(|&v| leq[u][v]))
                    .collect();
                match least.as_slice() {
                    [u] => join[a][b] = *u,
                    _ => return Err(LatticeError::NoJoin(names[a].clone(), names[b].clone())),
                }
            }
        }
        let bottom = (0..n)
            .find(|&b| (0..n).all(|x| leq[b][x]))
            .ok_or(LatticeError::NoBottom)?;
        // A finite join-semilattice with a bottom always has a top: the join of everything.
        let top = (0..n).fold(bottom, |acc, x| join[acc][x]);

        // Longest strictly ascending chain, counted in edges.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&x| (0..n).filter(|&y| leq[y][x]).count());
        let mut depth = vec![0usize; n];
        for &x in &order {
            for y in 0..n {
                if y != x && leq[y][x] {
                    depth[x] = depth[x].max(depth[y] + 1);
                }
            }
        }
        let height = depth.iter().copied().max().unwrap_or(0);

        Ok(Self {
            names,
            leq,
            join,
            bottom,
            top,
            height,
        })
    }

    /// A totally ordered lattice `names[0] ⊏ names[1] ⊏ ...`.
    pub fn chain<S: AsRef<str>>(names: &[S]) -> Result<Self, LatticeError> {
        let covers: Vec<(&str, &str)> = names
            .windows(2)
            .map(|w| (w[0].as_ref(), w[1].as_ref()))
            .collect();
        let names: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        Self::from_hasse(&names, &covers)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn bottom(&self) -> Label {
        Label(self.bottom)
    }

    pub fn top(&self) -> Label {
        Label(self.top)
    }

    /// Length of the longest ascending chain, in edges.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.names.len()).map(Label)
    }

    pub fn label(&self, name: &str) -> Option<Label> {
        self.names.iter().position(|n| n == name).map(Label)
    }

    pub fn name(&self, l: Label) -> &str {
        &self.names[l.0]
    }

    /// Covering pairs of the order, recomputed from the closure.
    pub fn covers(&self) -> Vec<(Label, Label)> {
        let n = self.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b
                    && self.leq[a][b]
                    && !(0..n).any(|c| c != a && c != b && self.leq[a][c] && self.leq[c][b])
                {
                    out.push((Label(a), Label(b)));
                }
            }
        }
        out
    }

    fn check(&self, l: Label) -> Result<usize, LatticeError> {
        if l.0 < self.len() {
            Ok(l.0)
        } else {
            Err(LatticeError::ForeignLabel(l.0))
        }
    }

    pub fn try_join(&self, a: Label, b: Label) -> Result<Label, LatticeError> {
        Ok(Label(self.join[self.check(a)?][self.check(b)?]))
    }

    pub fn try_leq(&self, a: Label, b: Label) -> Result<bool, LatticeError> {
        Ok(self.leq[self.check(a)?][self.check(b)?])
    }

    /// Join of two labels of this lattice. Panics on a foreign label.
    pub fn join(&self, a: Label, b: Label) -> Label {
        Label(self.join[a.0][b.0])
    }

    pub fn leq(&self, a: Label, b: Label) -> bool {
        self.leq[a.0][b.0]
    }

    pub fn lt(&self, a: Label, b: Label) -> bool {
        a != b && self.leq(a, b)
    }

    pub fn join_all<I: IntoIterator<Item = Label>>(&self, it: I) -> Label {
        it.into_iter().fold(self.bottom(), |acc, l| self.join(acc, l))
    }
}

/// A set of category atoms ordered by inclusion.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Category(BTreeSet<String>);

impl Category {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.0.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn leq(&self, other: &Category) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn join(&self, other: &Category) -> Category {
        Category(self.0.union(&other.0).cloned().collect())
    }

    /// Every subset of this category, smallest first.
    pub fn subsets(&self) -> Vec<Category> {
        let atoms: Vec<&String> = self.0.iter().collect();
        let mut out: Vec<Category> = (0u64..(1u64 << atoms.len()))
            .map(|mask| {
                Category(
                    atoms
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, a)| (*a).clone())
                        .collect(),
                )
            })
            .collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }
}

impl<S: Into<String>> FromIterator<S> for Category {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Category(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// `(t, ω_I, ω_H)`: a label with an instance and a host category. Used both as the
/// typing counter and as the observation level of an attacker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LevelTriple {
    pub level: Label,
    pub inst_cat: Category,
    pub host_cat: Category,
}

impl LevelTriple {
    pub fn new(level: Label, inst_cat: Category, host_cat: Category) -> Self {
        Self {
            level,
            inst_cat,
            host_cat,
        }
    }

    pub fn bottom(lattice: &Lattice) -> Self {
        Self::new(lattice.bottom(), Category::empty(), Category::empty())
    }

    pub fn leq(&self, other: &Self, lattice: &Lattice) -> bool {
        lattice.leq(self.level, other.level)
            && self.inst_cat.leq(&other.inst_cat)
            && self.host_cat.leq(&other.host_cat)
    }

    pub fn render(&self, lattice: &Lattice) -> String {
        format!(
            "({}, {}, {})",
            lattice.name(self.level),
            self.inst_cat,
            self.host_cat
        )
    }
}

/// The flow security environment: variable and line labels, line ownership and the
/// host/instance categories.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SecEnv {
    pub var_labels: BTreeMap<String, Label>,
    pub line_labels: BTreeMap<String, Label>,
    pub line_owner: BTreeMap<String, String>,
    pub host_cat: BTreeMap<String, Category>,
    pub inst_cat: BTreeMap<String, Category>,
}

fn same_keys<V, W>(
    a: &BTreeMap<String, V>,
    b: &BTreeMap<String, W>,
    kind: &'static str,
) -> Result<(), EnvError> {
    if let Some(k) = a
        .keys()
        .find(|k| !b.contains_key(*k))
        .or_else(|| b.keys().find(|k| !a.contains_key(*k)))
    {
        return Err(EnvError::DomainMismatch {
            kind,
            ident: k.clone(),
        });
    }
    Ok(())
}

impl SecEnv {
    pub fn var(&self, x: &str) -> Result<Label, EnvError> {
        self.var_labels.get(x).copied().ok_or_else(|| EnvError::Missing {
            kind: "variable",
            ident: x.to_string(),
        })
    }

    pub fn line(&self, l: &str) -> Result<Label, EnvError> {
        self.line_labels.get(l).copied().ok_or_else(|| EnvError::Missing {
            kind: "cache line",
            ident: l.to_string(),
        })
    }

    pub fn instance_category(&self, i: &str) -> Category {
        self.inst_cat.get(i).cloned().unwrap_or_default()
    }

    pub fn host_category(&self, h: &str) -> Category {
        self.host_cat.get(h).cloned().unwrap_or_default()
    }

    fn check_domains(&self, other: &SecEnv) -> Result<(), EnvError> {
        same_keys(&self.var_labels, &other.var_labels, "variable")?;
        same_keys(&self.line_labels, &other.line_labels, "cache line")?;
        same_keys(&self.host_cat, &other.host_cat, "host")?;
        same_keys(&self.inst_cat, &other.inst_cat, "instance")?;
        Ok(())
    }

    /// Pointwise ordering on labels and categories. Line ownership does not take part.
    pub fn leq(&self, other: &SecEnv, lattice: &Lattice) -> Result<bool, EnvError> {
        self.check_domains(other)?;
        Ok(self.first_violation(other, lattice).is_none())
    }

    /// The first identifier (in kind order, then name order) where `self ⋢ other`.
    pub fn first_violation(&self, other: &SecEnv, lattice: &Lattice) -> Option<EnvEntry> {
        for (x, l) in &self.var_labels {
            if let Some(r) = other.var_labels.get(x) {
                if !lattice.leq(*l, *r) {
                    return Some(EnvEntry::Var(x.clone()));
                }
            }
        }
        for (x, l) in &self.line_labels {
            if let Some(r) = other.line_labels.get(x) {
                if !lattice.leq(*l, *r) {
                    return Some(EnvEntry::Line(x.clone()));
                }
            }
        }
        for (h, c) in &self.host_cat {
            if let Some(r) = other.host_cat.get(h) {
                if !c.leq(r) {
                    return Some(EnvEntry::Host(h.clone()));
                }
            }
        }
        for (i, c) in &self.inst_cat {
            if let Some(r) = other.inst_cat.get(i) {
                if !c.leq(r) {
                    return Some(EnvEntry::Instance(i.clone()));
                }
            }
        }
        None
    }

    /// Pointwise least upper bound. Ownership must agree wherever both sides define it.
    pub fn join(&self, other: &SecEnv, lattice: &Lattice) -> Result<SecEnv, EnvError> {
        self.check_domains(other)?;
        let mut out = self.clone();
        for (x, l) in out.var_labels.iter_mut() {
            *l = lattice.try_join(*l, other.var_labels[x])?;
        }
        for (x, l) in out.line_labels.iter_mut() {
            *l = lattice.try_join(*l, other.line_labels[x])?;
        }
        for (h, c) in out.host_cat.iter_mut() {
            *c = c.join(&other.host_cat[h]);
        }
        for (i, c) in out.inst_cat.iter_mut() {
            *c = c.join(&other.inst_cat[i]);
        }
        for (line, owner) in &other.line_owner {
            match out.line_owner.get(line) {
                Some(mine) if mine != owner => {
                    return Err(EnvError::OwnershipConflict {
                        line: line.clone(),
                        first: mine.clone(),
                        second: owner.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    out.line_owner.insert(line.clone(), owner.clone());
                }
            }
        }
        Ok(out)
    }

    /// `Ξ ⊑ (t, ω_I, ω_H)`.
    pub fn leq_bound(&self, bound: &LevelTriple, lattice: &Lattice) -> bool {
        self.var_labels
            .values()
            .chain(self.line_labels.values())
            .all(|l| lattice.leq(*l, bound.level))
            && self.host_cat.values().all(|c| c.leq(&bound.host_cat))
            && self.inst_cat.values().all(|c| c.leq(&bound.inst_cat))
    }
}

/// Names one entry of a [`SecEnv`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnvEntry {
    Var(String),
    Line(String),
    Host(String),
    Instance(String),
}

impl EnvEntry {
    pub fn ident(&self) -> &str {
        match self {
            EnvEntry::Var(s) | EnvEntry::Line(s) | EnvEntry::Host(s) | EnvEntry::Instance(s) => s,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvEntry::Var(_) => "variable",
            EnvEntry::Line(_) => "line",
            EnvEntry::Host(_) => "host",
            EnvEntry::Instance(_) => "instance",
        }
    }

    /// The entry's value in `env`, rendered.
    pub fn render_in(&self, env: &SecEnv, lattice: &Lattice) -> String {
        match self {
            EnvEntry::Var(x) => env
                .var_labels
                .get(x)
                .map(|l| lattice.name(*l).to_string())
                .unwrap_or_default(),
            EnvEntry::Line(x) => env
                .line_labels
                .get(x)
                .map(|l| lattice.name(*l).to_string())
                .unwrap_or_default(),
            EnvEntry::Host(h) => env.host_category(h).to_string(),
            EnvEntry::Instance(i) => env.instance_category(i).to_string(),
        }
    }
}
