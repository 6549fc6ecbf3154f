//! Timed small-step interpreter, deterministic schedulers and exhaustive run
//! enumeration.

mod enumerate;
mod eval;
mod step;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use enumerate::{enumerate_runs, run, EnumerateError, RunSet, RunVector};
pub use eval::{eval_bool, eval_expr, EvalError};
pub use step::{step, step_timed_comm, Effect, Next, Transition};

use crate::config::{AnalysisConfig, Costs};
use crate::lattice::SecEnv;
use crate::model::Model;
use crate::syntax::Component;

pub type Store = BTreeMap<String, i64>;
/// Cache line contents; `None` is the flushed marker ∅.
pub type Cache = BTreeMap<String, Option<i64>>;

/// `(σ, δ, I, H)` as seen by one component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Configuration {
    pub store: Store,
    pub cache: Cache,
    pub owner: String,
    pub host: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Assign,
    Stop,
    Skip,
    SleepTick,
    MoveP,
    MoveI,
    Branch,
    Send,
    Recv,
    TimedComm,
    LoopUnfold,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Assign => "assign",
            EventKind::Stop => "stop",
            EventKind::Skip => "skip",
            EventKind::SleepTick => "sleep-tick",
            EventKind::MoveP => "moveP",
            EventKind::MoveI => "moveI",
            EventKind::Branch => "branch",
            EventKind::Send => "send",
            EventKind::Recv => "recv",
            EventKind::TimedComm => "timed-comm",
            EventKind::LoopUnfold => "loop-unfold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub subject: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.as_str(), self.subject)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TimedStep {
    pub config: Configuration,
    pub event: Event,
    pub dt: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "kebab-case")]
pub enum Outcome {
    Terminated,
    Deadlocked,
    Faulted(String),
    FuelExhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Terminated => f.write_str("terminated"),
            Outcome::Deadlocked => f.write_str("deadlocked"),
            Outcome::Faulted(m) => write!(f, "faulted: {m}"),
            Outcome::FuelExhausted => f.write_str("fuel-exhausted"),
        }
    }
}

/// The run of one component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TimedRun {
    pub component: String,
    pub steps: Vec<TimedStep>,
    #[serde(rename = "final")]
    pub final_config: Configuration,
    pub outcome: Outcome,
    pub total_time: u64,
}

impl TimedRun {
    pub fn durations(&self) -> impl Iterator<Item = u64> + '_ {
        self.steps.iter().map(|s| s.dt)
    }

    /// Configurations before each step, followed by the final one.
    pub fn configs(&self) -> impl Iterator<Item = &Configuration> {
        self.steps
            .iter()
            .map(|s| &s.config)
            .chain(std::iter::once(&self.final_config))
    }
}

/// Initial values of one analysed starting point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Inputs {
    pub vars: BTreeMap<String, i64>,
    pub lines: BTreeMap<String, Option<i64>>,
    /// The value `keyGen()` returns.
    pub key: i64,
}

impl Inputs {
    /// The model's declared initial values, with the first key of the key domain.
    pub fn declared(model: &Model) -> Self {
        Self {
            vars: model.var_init.clone(),
            lines: model.cache_init.clone(),
            key: model.config.keys.first().copied().unwrap_or(0),
        }
    }
}

/// Everything the interpreter needs besides the process terms.
#[derive(Debug, Clone)]
pub struct System {
    pub components: Vec<Component>,
    pub env: SecEnv,
    pub channels: BTreeMap<String, String>,
    /// Initial host of every instance.
    pub placement: BTreeMap<String, String>,
    pub costs: Costs,
    pub fuel: u32,
    pub max_runs: usize,
}

impl System {
    pub fn from_model(model: &Model) -> Self {
        Self::with_components(model, model.components(), &model.config)
    }

    pub fn with_components(model: &Model, components: Vec<Component>, cfg: &AnalysisConfig) -> Self {
        let placement = model
            .network
            .vms()
            .into_iter()
            .map(|(h, vm)| (vm.id.clone(), h.to_string()))
            .collect();
        Self {
            components,
            env: model.env.clone(),
            channels: model.channels.clone(),
            placement,
            costs: cfg.costs,
            fuel: cfg.fuel,
            max_runs: cfg.max_runs,
        }
    }

    /// Lines a component can observe: its pages, the lines of the channels it
    /// names, and lines of the instance it runs on.
    pub fn reachable_lines(&self, c: &Component) -> Vec<String> {
        let mut lines: std::collections::BTreeSet<String> = c.pages.clone();
        for ch in c.process.channels() {
            if let Some(l) = self.channels.get(&ch) {
                lines.insert(l.clone());
            }
        }
        lines.into_iter().collect()
    }

    /// The initial configuration of component `idx` under `inputs`.
    pub fn initial_config(&self, idx: usize, inputs: &Inputs) -> Configuration {
        let c = &self.components[idx];
        let store = c
            .process
            .variables()
            .into_iter()
            .map(|x| {
                let v = inputs.vars.get(&x).copied().unwrap_or(0);
                (x, v)
            })
            .collect();
        let cache = self
            .reachable_lines(c)
            .into_iter()
            .map(|l| {
                let v = inputs.lines.get(&l).copied().flatten();
                (l, v)
            })
            .collect();
        Configuration {
            store,
            cache,
            owner: c.instance.clone(),
            host: c.host.clone(),
        }
    }
}
