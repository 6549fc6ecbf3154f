//! Analysis settings carried by a model file and overridable from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::lattice::LevelTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strong,
    Weak,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strong" => Ok(Mode::Strong),
            "weak" => Ok(Mode::Weak),
            _ => Err(format!("unknown mode `{s}` (expected strong|weak)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strong => "strong",
            Mode::Weak => "weak",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerPolicy {
    /// After a component steps, the next enabled component in cyclic order goes next.
    RoundRobin,
    /// Always the lowest-index enabled component.
    LowestIndex,
    /// Every scheduling choice is explored.
    Exhaustive,
}

impl FromStr for SchedulerPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "roundrobin" => Ok(SchedulerPolicy::RoundRobin),
            "lowestindex" => Ok(SchedulerPolicy::LowestIndex),
            "exhaustive" => Ok(SchedulerPolicy::Exhaustive),
            _ => Err(format!(
                "unknown scheduler `{s}` (expected roundrobin|lowestindex|exhaustive)"
            )),
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerPolicy::RoundRobin => "roundrobin",
            SchedulerPolicy::LowestIndex => "lowestindex",
            SchedulerPolicy::Exhaustive => "exhaustive",
        })
    }
}

/// Duration, in ticks, of a cache communication carrying a given value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CostModel {
    /// Every transfer takes the same time.
    Constant(u64),
    /// `1 + (|v| mod k)`: transfer time depends on the value sent.
    ValueMod(u64),
}

impl CostModel {
    pub fn comm_cost(&self, _chan: &str, value: i64) -> u64 {
        match *self {
            CostModel::Constant(n) => n,
            CostModel::ValueMod(k) => 1 + value.unsigned_abs() % k,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::ValueMod(4)
    }
}

impl FromStr for CostModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| format!("bad cost model `{s}` (expected constant:<n>|valuemod:<k>)"))?;
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| format!("bad cost parameter `{n}`"))?;
        if n == 0 {
            return Err("cost parameter must be at least 1".into());
        }
        match kind.trim() {
            "constant" => Ok(CostModel::Constant(n)),
            "valuemod" => Ok(CostModel::ValueMod(n)),
            k => Err(format!("unknown cost model `{k}`")),
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Constant(n) => write!(f, "constant:{n}"),
            CostModel::ValueMod(k) => write!(f, "valuemod:{k}"),
        }
    }
}

/// Ticks charged for bare (non-deadline) sends and receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Costs {
    pub comm: CostModel,
    pub recv: u64,
}

/// A store or cache identifier whose initial value can range over a domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum InputId {
    Var(String),
    Line(String),
}

impl fmt::Display for InputId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputId::Var(x) => f.write_str(x),
            InputId::Line(l) => write!(f, "line {l}"),
        }
    }
}

pub const DEFAULT_HIGH_DOMAIN: [i64; 4] = [0, 1, 2, 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub mode: Mode,
    /// Observation triple. `None` means `(⊥, all atoms, all atoms)`.
    pub obs: Option<LevelTriple>,
    pub costs: Costs,
    pub fuel: u32,
    pub scheduler: SchedulerPolicy,
    /// Explicit input domains; identifiers not listed get defaults.
    pub domains: BTreeMap<InputId, Vec<i64>>,
    /// Values `keyGen()` may produce; one is chosen per analysed initial state.
    pub keys: Vec<i64>,
    pub permissive_tstop: bool,
    pub symmetric_equiv: bool,
    /// Cap on distinct run vectors kept during exhaustive enumeration.
    pub max_runs: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Weak,
            obs: None,
            costs: Costs::default(),
            fuel: 40,
            scheduler: SchedulerPolicy::RoundRobin,
            domains: BTreeMap::new(),
            keys: DEFAULT_HIGH_DOMAIN.to_vec(),
            permissive_tstop: false,
            symmetric_equiv: false,
            max_runs: 200_000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_models() {
        let vm: CostModel = "valuemod:4".parse().unwrap();
        assert_eq!(vm.comm_cost("a", 0), 1);
        assert_eq!(vm.comm_cost("a", 3), 4);
        assert_eq!(vm.comm_cost("a", -5), 2);
        assert_eq!(vm.comm_cost("a", i64::MIN), 1);
        let c: CostModel = "constant:6".parse().unwrap();
        assert_eq!(c.comm_cost("a", 12345), 6);
        assert!("constant:0".parse::<CostModel>().is_err());
        assert!("linear:2".parse::<CostModel>().is_err());
        assert_eq!(vm.to_string(), "valuemod:4");
    }
}
