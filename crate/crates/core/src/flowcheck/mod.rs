//! Bounded decision procedures for configuration equivalence, run
//! bisimulation, the cache flow security policy and the semantic flow
//! security condition, plus a randomized soundness harness.

mod harness;
mod inputs;
mod policy;

use serde::Serialize;

pub use harness::{soundness_harness, HarnessConfig, HarnessFailure, HarnessReport, ProgramGen};
pub use inputs::{InputSpace, InputSpaceError};
pub use policy::{
    check_cache_flow_secure, check_semantic_security, replay_cache_flow_witness,
    replay_semantic_witness, SemanticCheck,
};

use crate::config::Mode;
use crate::lattice::{Lattice, LevelTriple, SecEnv};
use crate::semantics::{Configuration, Inputs, TimedRun};

/// The attacker's observation triple `(t, ω_I, ω_H)`.
pub type ObservationLevel = LevelTriple;

/// What an observer at a given level can distinguish.
#[derive(Debug, Clone, Copy)]
pub struct Observer<'a> {
    pub lattice: &'a Lattice,
    pub env: &'a SecEnv,
    pub obs: &'a ObservationLevel,
    /// Require equal categories instead of the one-directional `⊑`.
    pub symmetric: bool,
}

impl Observer<'_> {
    /// Observable identifiers on which `g1` and `g2` disagree, in a fixed order:
    /// variables, then lines, then `owner`/`host` for the category clauses.
    pub fn diff(&self, g1: &Configuration, g2: &Configuration) -> Vec<String> {
        let mut out = Vec::new();
        let cats_visible = self
            .env
            .instance_category(&g1.owner)
            .leq(&self.obs.inst_cat)
            && self.env.host_category(&g1.host).leq(&self.obs.host_cat);
        if cats_visible {
            for (x, v) in &g1.store {
                let low = self
                    .env
                    .var_labels
                    .get(x)
                    .is_some_and(|l| self.lattice.leq(*l, self.obs.level));
                if low && g2.store.get(x) != Some(v) {
                    out.push(x.clone());
                }
            }
            for (l, v) in &g1.cache {
                let low = self
                    .env
                    .line_labels
                    .get(l)
                    .is_some_and(|lab| self.lattice.leq(*lab, self.obs.level));
                if low && g2.cache.get(l) != Some(v) {
                    out.push(format!("line {l}"));
                }
            }
        }
        let (i1, i2) = (
            self.env.instance_category(&g1.owner),
            self.env.instance_category(&g2.owner),
        );
        if !(i1.leq(&i2) && (!self.symmetric || i2.leq(&i1))) {
            out.push("owner".into());
        }
        let (h1, h2) = (
            self.env.host_category(&g1.host),
            self.env.host_category(&g2.host),
        );
        if !(h1.leq(&h2) && (!self.symmetric || h2.leq(&h1))) {
            out.push("host".into());
        }
        out
    }

    pub fn equiv(&self, g1: &Configuration, g2: &Configuration) -> bool {
        self.diff(g1, g2).is_empty()
    }

    /// Stepwise comparison: equivalent configurations and equal durations at
    /// every index.
    pub fn strong(&self, r1: &TimedRun, r2: &TimedRun) -> Bisim {
        if r1.steps.len() != r2.steps.len() {
            return Bisim::NotComparable {
                lengths: [r1.steps.len(), r2.steps.len()],
            };
        }
        for (j, (g1, g2)) in r1.configs().zip(r2.configs()).enumerate() {
            let d = self.diff(g1, g2);
            if !d.is_empty() {
                return Bisim::Differ(Violation::Config {
                    index: j,
                    differing: d,
                });
            }
            if let (Some(s1), Some(s2)) = (r1.steps.get(j), r2.steps.get(j)) {
                if s1.dt != s2.dt {
                    return Bisim::Differ(Violation::Duration {
                        index: j,
                        durations: [s1.dt, s2.dt],
                    });
                }
            }
        }
        Bisim::Bisimilar
    }

    /// Final configurations equivalent and total times equal.
    pub fn weak(&self, r1: &TimedRun, r2: &TimedRun) -> Bisim {
        if r1.total_time != r2.total_time {
            return Bisim::Differ(Violation::Timing {
                totals: [r1.total_time, r2.total_time],
            });
        }
        let d = self.diff(&r1.final_config, &r2.final_config);
        if !d.is_empty() {
            return Bisim::Differ(Violation::Config {
                index: r1.steps.len(),
                differing: d,
            });
        }
        Bisim::Bisimilar
    }

    /// Comparison under `mode`; unequal lengths count as distinguishable in
    /// strong mode.
    pub fn compare(&self, mode: Mode, r1: &TimedRun, r2: &TimedRun) -> Option<Violation> {
        match mode {
            Mode::Weak => self.weak(r1, r2).violation(),
            Mode::Strong => match self.strong(r1, r2) {
                Bisim::Bisimilar => None,
                Bisim::Differ(v) => Some(v),
                Bisim::NotComparable { lengths } => Some(Violation::Length { lengths }),
            },
        }
    }
}

pub fn config_equiv(
    g1: &Configuration,
    g2: &Configuration,
    lattice: &Lattice,
    env: &SecEnv,
    obs: &ObservationLevel,
) -> bool {
    Observer {
        lattice,
        env,
        obs,
        symmetric: false,
    }
    .equiv(g1, g2)
}

pub fn strong_bisimilar(
    r1: &TimedRun,
    r2: &TimedRun,
    lattice: &Lattice,
    env: &SecEnv,
    obs: &ObservationLevel,
) -> Bisim {
    Observer {
        lattice,
        env,
        obs,
        symmetric: false,
    }
    .strong(r1, r2)
}

pub fn weak_bisimilar(
    r1: &TimedRun,
    r2: &TimedRun,
    lattice: &Lattice,
    env: &SecEnv,
    obs: &ObservationLevel,
) -> bool {
    Observer {
        lattice,
        env,
        obs,
        symmetric: false,
    }
    .weak(r1, r2)
    .holds()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bisim {
    Bisimilar,
    Differ(Violation),
    /// Runs of different length have no common index set.
    NotComparable { lengths: [usize; 2] },
}

impl Bisim {
    pub fn holds(&self) -> bool {
        matches!(self, Bisim::Bisimilar)
    }

    fn violation(self) -> Option<Violation> {
        match self {
            Bisim::Differ(v) => Some(v),
            _ => None,
        }
    }
}

/// Why two runs, or a run and its inputs, are distinguishable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// Total times differ.
    Timing { totals: [u64; 2] },
    /// The durations at one step differ.
    Duration { index: usize, durations: [u64; 2] },
    /// Observable parts of the configurations at `index` differ.
    Config { index: usize, differing: Vec<String> },
    /// Runs of different length under the strong policy.
    Length { lengths: [usize; 2] },
    /// An identifier typed strictly below the counter was changed.
    Changed { ident: String },
}

impl Violation {
    pub fn is_timing(&self) -> bool {
        matches!(
            self,
            Violation::Timing { .. } | Violation::Duration { .. } | Violation::Length { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Secure,
    Insecure,
    BoundExceeded,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Secure => "secure",
            Status::Insecure => "insecure",
            Status::BoundExceeded => "bound-exceeded",
        }
    }
}

/// A counterexample: the initial inputs, the runs they produced and what an
/// observer tells apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub component: String,
    #[serde(skip)]
    pub component_index: usize,
    /// The observation triple the violation is visible at.
    pub obs: String,
    #[serde(skip)]
    pub triple: ObservationLevel,
    pub inputs: Vec<Inputs>,
    pub runs: Vec<TimedRun>,
    pub violation: Violation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub inputs: usize,
    pub initial_pairs: usize,
    pub runs_explored: usize,
    pub pairs_compared: usize,
    pub timing_mismatches: usize,
    pub config_mismatches: usize,
    pub truncated_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub obs: String,
    /// First violation of every violating component, in component order.
    pub witnesses: Vec<Witness>,
    pub stats: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn is_secure(&self) -> bool {
        self.status == Status::Secure
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witnesses.first()
    }
}

#[cfg(test)]
mod tests;
