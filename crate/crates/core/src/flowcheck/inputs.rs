use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::config::{InputId, DEFAULT_HIGH_DOMAIN};
use crate::lattice::Label;
use crate::model::Model;
use crate::semantics::Inputs;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputSpaceError {
    #[error("empty domain for {0}")]
    EmptyDomain(String),
    #[error("input space has more than {limit} initial states")]
    TooLarge { limit: usize },
}

/// Finite domains for the initial values of variables and lines, and the
/// values `keyGen()` may produce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InputSpace {
    pub vars: BTreeMap<String, Vec<i64>>,
    pub lines: BTreeMap<String, Vec<Option<i64>>>,
    pub keys: Vec<i64>,
}

impl InputSpace {
    /// Largest number of initial states enumerated.
    pub const LIMIT: usize = 4096;

    /// Explicit domains from the model; other variables labelled above `low`
    /// range over the default high domain, the rest keep their declared value.
    /// Lines without a domain keep their declared content.
    pub fn from_model(model: &Model, low: Label) -> Self {
        let mut vars = BTreeMap::new();
        for (x, label) in &model.env.var_labels {
            let dom = match model.config.domains.get(&InputId::Var(x.clone())) {
                Some(d) => d.clone(),
                None if !model.lattice.leq(*label, low) => DEFAULT_HIGH_DOMAIN.to_vec(),
                None => vec![model.var_init.get(x).copied().unwrap_or(0)],
            };
            vars.insert(x.clone(), dom);
        }
        let mut lines = BTreeMap::new();
        for l in model.env.line_labels.keys() {
            let dom = match model.config.domains.get(&InputId::Line(l.clone())) {
                Some(d) => d.iter().copied().map(Some).collect(),
                None => vec![model.cache_init.get(l).copied().flatten()],
            };
            lines.insert(l.clone(), dom);
        }
        Self {
            vars,
            lines,
            keys: model.config.keys.clone(),
        }
    }

    /// Number of initial states, saturating.
    pub fn size(&self) -> usize {
        self.vars
            .values()
            .map(Vec::len)
            .chain(self.lines.values().map(Vec::len))
            .chain(std::iter::once(self.keys.len()))
            .fold(1usize, |acc, n| acc.saturating_mul(n))
    }

    /// Every initial state, varying the last dimension (keys) fastest.
    pub fn enumerate(&self) -> Result<Vec<Inputs>, InputSpaceError> {
        for (x, d) in &self.vars {
            if d.is_empty() {
                return Err(InputSpaceError::EmptyDomain(x.clone()));
            }
        }
        for (l, d) in &self.lines {
            if d.is_empty() {
                return Err(InputSpaceError::EmptyDomain(format!("line {l}")));
            }
        }
        if self.keys.is_empty() {
            return Err(InputSpaceError::EmptyDomain("keys".into()));
        }
        if self.size() > Self::LIMIT {
            return Err(InputSpaceError::TooLarge { limit: Self::LIMIT });
        }
        let var_dims: Vec<(&String, &Vec<i64>)> = self.vars.iter().collect();
        let line_dims: Vec<(&String, &Vec<Option<i64>>)> = self.lines.iter().collect();
        let radices: Vec<usize> = var_dims
            .iter()
            .map(|(_, d)| d.len())
            .chain(line_dims.iter().map(|(_, d)| d.len()))
            .chain(std::iter::once(self.keys.len()))
            .collect();
        let mut digits = vec![0usize; radices.len()];
        let mut out = Vec::with_capacity(self.size());
        loop {
            let nv = var_dims.len();
            let nl = line_dims.len();
            out.push(Inputs {
                vars: var_dims
                    .iter()
                    .enumerate()
                    .map(|(k, (x, d))| ((*x).clone(), d[digits[k]]))
                    .collect(),
                lines: line_dims
                    .iter()
                    .enumerate()
                    .map(|(k, (l, d))| ((*l).clone(), d[digits[nv + k]]))
                    .collect(),
                key: self.keys[digits[nv + nl]],
            });
            let mut pos = radices.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}
