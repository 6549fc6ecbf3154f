//! Report records. Each record is one JSON object per line; the `record` tag
//! comes first and the remaining fields keep their declaration order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::flowcheck::{HarnessReport, Verdict, Violation, Witness};
use crate::lattice::{Lattice, SecEnv};
use crate::semantics::{Configuration, Event, Inputs, Outcome, TimedRun};
use crate::typesystem::{Derivation, TypeError};

pub const FORMAT: &str = "seccloud-report";
pub const VERSION: u32 = 1;

/// Steps of a witness run shown in pretty output.
const PRETTY_STEPS: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigView {
    pub mode: String,
    pub obs: String,
    pub cost: String,
    pub recv_cost: u64,
    pub fuel: u32,
    pub scheduler: String,
    pub max_runs: usize,
    pub keys: Vec<i64>,
    pub domains: BTreeMap<String, Vec<i64>>,
    pub permissive_tstop: bool,
    pub symmetric_equiv: bool,
}

impl ConfigView {
    pub fn new(cfg: &AnalysisConfig, obs: String) -> Self {
        Self {
            mode: cfg.mode.to_string(),
            obs,
            cost: cfg.costs.comm.to_string(),
            recv_cost: cfg.costs.recv,
            fuel: cfg.fuel,
            scheduler: cfg.scheduler.to_string(),
            max_runs: cfg.max_runs,
            keys: cfg.keys.clone(),
            domains: cfg
                .domains
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            permissive_tstop: cfg.permissive_tstop,
            symmetric_equiv: cfg.symmetric_equiv,
        }
    }
}

/// A security environment with labels and categories spelled out.
#[derive(Debug, Clone, Serialize)]
pub struct EnvView {
    pub vars: BTreeMap<String, String>,
    pub lines: BTreeMap<String, String>,
    pub owners: BTreeMap<String, String>,
    pub instances: BTreeMap<String, String>,
    pub hosts: BTreeMap<String, String>,
}

impl EnvView {
    pub fn new(env: &SecEnv, lattice: &Lattice) -> Self {
        let names = |m: &BTreeMap<String, crate::lattice::Label>| {
            m.iter()
                .map(|(k, l)| (k.clone(), lattice.name(*l).to_string()))
                .collect()
        };
        Self {
            vars: names(&env.var_labels),
            lines: names(&env.line_labels),
            owners: env.line_owner.clone(),
            instances: env.inst_cat.iter().map(|(k, c)| (k.clone(), c.to_string())).collect(),
            hosts: env.host_cat.iter().map(|(k, c)| (k.clone(), c.to_string())).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub component: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub total_time: u64,
    pub events: Vec<String>,
    #[serde(rename = "final")]
    pub final_config: Configuration,
}

impl RunSummary {
    pub fn new(r: &TimedRun) -> Self {
        Self {
            component: r.component.clone(),
            outcome: r.outcome.clone(),
            total_time: r.total_time,
            events: r
                .steps
                .iter()
                .map(|s| format!("{} +{}", s.event, s.dt))
                .collect(),
            final_config: r.final_config.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum Record {
    Header {
        format: &'static str,
        version: u32,
        command: String,
        model: String,
    },
    Config(ConfigView),
    Error {
        kind: String,
        line: usize,
        col: usize,
        message: String,
    },
    Component {
        component: String,
        counter: String,
        status: &'static str,
        max_loop_iterations: usize,
        env_after: EnvView,
        #[serde(skip_serializing_if = "Option::is_none")]
        derivation: Option<Derivation>,
    },
    TypeError(TypeError),
    Verdict(Verdict),
    Step {
        component: String,
        index: usize,
        event: Event,
        dt: u64,
        config: Configuration,
    },
    RunEnd {
        component: String,
        #[serde(flatten)]
        outcome: Outcome,
        total_time: u64,
        #[serde(rename = "final")]
        final_config: Configuration,
    },
    Vector {
        index: usize,
        runs: Vec<RunSummary>,
    },
    RunSet {
        inputs: Inputs,
        vectors: usize,
        interleavings: u128,
    },
    Soundness(HarnessReport),
    Exit {
        code: i32,
        reason: &'static str,
    },
}

pub fn render_json(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn store_str(g: &Configuration) -> String {
    let vars: Vec<String> = g.store.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let lines: Vec<String> = g
        .cache
        .iter()
        .map(|(k, v)| match v {
            Some(v) => format!("{k}={v}"),
            None => format!("{k}=∅"),
        })
        .collect();
    format!(
        "[{}] cache [{}] on {}@{}",
        vars.join(" "),
        lines.join(" "),
        g.owner,
        g.host
    )
}

fn inputs_str(i: &Inputs) -> String {
    let mut parts: Vec<String> = i.vars.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.extend(i.lines.iter().map(|(k, v)| match v {
        Some(v) => format!("line {k}={v}"),
        None => format!("line {k}=∅"),
    }));
    parts.push(format!("key={}", i.key));
    parts.join(" ")
}

fn violation_str(v: &Violation) -> String {
    match v {
        Violation::Timing { totals } => format!("total times differ: {} vs {}", totals[0], totals[1]),
        Violation::Duration { index, durations } => format!(
            "durations differ at step {index}: {} vs {}",
            durations[0], durations[1]
        ),
        Violation::Config { index, differing } => {
            format!("observable state differs at step {index}: {}", differing.join(", "))
        }
        Violation::Length { lengths } => format!("run lengths differ: {} vs {}", lengths[0], lengths[1]),
        Violation::Changed { ident } => format!("`{ident}` changed although typed below the counter"),
    }
}

fn witness_pretty(out: &mut String, w: &Witness) {
    let _ = writeln!(out, "  witness {} at {}: {}", w.component, w.obs, violation_str(&w.violation));
    for (k, (i, r)) in w.inputs.iter().zip(&w.runs).enumerate() {
        let _ = writeln!(out, "    run {}: inputs {}", k + 1, inputs_str(i));
        for s in r.steps.iter().take(PRETTY_STEPS) {
            let _ = writeln!(out, "      {:<40} +{}", s.event.to_string(), s.dt);
        }
        if r.steps.len() > PRETTY_STEPS {
            let _ = writeln!(out, "      ... {} more steps", r.steps.len() - PRETTY_STEPS);
        }
        let _ = writeln!(
            out,
            "      {} after {} ticks, final {}",
            r.outcome,
            r.total_time,
            store_str(&r.final_config)
        );
    }
}

pub fn render_pretty(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        match r {
            Record::Header { command, model, .. } => {
                let _ = writeln!(out, "{command} {model}");
            }
            Record::Config(c) => {
                let _ = writeln!(
                    out,
                    "  mode {} | obs {} | cost {} | fuel {} | keys {:?}",
                    c.mode, c.obs, c.cost, c.fuel, c.keys
                );
            }
            Record::Error {
                kind,
                line,
                col,
                message,
            } => {
                let _ = writeln!(out, "error: {line}:{col}: {kind}: {message}");
            }
            Record::Component {
                component,
                counter,
                status,
                max_loop_iterations,
                env_after,
                derivation,
            } => {
                let _ = writeln!(
                    out,
                    "component {component} at {counter}: {status} (loop iterations ≤ {max_loop_iterations})"
                );
                let vars: Vec<String> = env_after.vars.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                let lines: Vec<String> = env_after.lines.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                let _ = writeln!(out, "  vars {}  lines {}", vars.join(" "), lines.join(" "));
                if let Some(d) = derivation {
                    derivation_pretty(&mut out, d, 1);
                }
            }
            Record::TypeError(e) => {
                let who = e.component.as_deref().unwrap_or("-");
                let _ = writeln!(out, "type error in {who}: {e}");
                if let (Some(exp), Some(act)) = (&e.expected, &e.actual) {
                    let _ = writeln!(out, "  expected {exp}, found {act}");
                }
            }
            Record::Verdict(v) => {
                let mode = v.mode.map(|m| format!("{m}, ")).unwrap_or_default();
                let _ = writeln!(out, "verdict: {} ({mode}obs {})", v.status.as_str(), v.obs);
                let s = &v.stats;
                let _ = writeln!(
                    out,
                    "  inputs {} | initial pairs {} | runs {} | run pairs {} | timing mismatches {} | state mismatches {} | truncated {}",
                    s.inputs,
                    s.initial_pairs,
                    s.runs_explored,
                    s.pairs_compared,
                    s.timing_mismatches,
                    s.config_mismatches,
                    s.truncated_runs
                );
                if let Some(n) = &v.note {
                    let _ = writeln!(out, "  note: {n}");
                }
                for w in &v.witnesses {
                    witness_pretty(&mut out, w);
                }
            }
            Record::Step {
                component,
                index,
                event,
                dt,
                config,
            } => {
                let _ = writeln!(
                    out,
                    "{component} #{index:<3} {:<40} +{dt}  {}",
                    event.to_string(),
                    store_str(config)
                );
            }
            Record::RunEnd {
                component,
                outcome,
                total_time,
                final_config,
            } => {
                let _ = writeln!(
                    out,
                    "{component} {outcome} after {total_time} ticks, final {}",
                    store_str(final_config)
                );
            }
            Record::Vector { index, runs } => {
                let _ = writeln!(out, "vector {index}");
                for r in runs {
                    let _ = writeln!(
                        out,
                        "  {} {} after {} ticks: {}",
                        r.component,
                        r.outcome,
                        r.total_time,
                        r.events.join("; ")
                    );
                }
            }
            Record::RunSet {
                inputs,
                vectors,
                interleavings,
            } => {
                let _ = writeln!(
                    out,
                    "{vectors} distinct run vectors from {interleavings} interleavings (inputs {})",
                    inputs_str(inputs)
                );
            }
            Record::Soundness(r) => {
                let _ = writeln!(
                    out,
                    "programs {} | accepted {} (secure {}, undecided {}) | rejected {} (insecure {})",
                    r.programs,
                    r.accepted,
                    r.accepted_secure,
                    r.accepted_bound_exceeded,
                    r.rejected,
                    r.rejected_insecure
                );
                let _ = writeln!(
                    out,
                    "loops {} | max fixpoint iterations {} | timed models {} (accepted {}, secure {})",
                    r.loops_checked, r.max_loop_iterations, r.timed_models, r.timed_accepted, r.timed_secure
                );
                for f in r
                    .soundness_failures
                    .iter()
                    .chain(&r.fixpoint_bound_failures)
                    .chain(&r.timed_failures)
                {
                    let _ = writeln!(out, "FAILURE #{}: {}\n{}", f.index, f.reason, f.model);
                }
            }
            Record::Exit { code, reason } => {
                let _ = writeln!(out, "exit {code}: {reason}");
            }
        }
    }
    out
}

fn derivation_pretty(out: &mut String, d: &Derivation, depth: usize) {
    let its = d
        .iterations
        .map(|n| format!(" ({n} iterations)"))
        .unwrap_or_default();
    let _ = writeln!(out, "{}{} {}{its}", "  ".repeat(depth), d.rule, d.path);
    for c in &d.children {
        derivation_pretty(out, c, depth + 1);
    }
}
