//! Randomized cross-check of the type system against the semantic oracles.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Mode;
use crate::lattice::LevelTriple;
use crate::model::Model;
use crate::semantics::System;
use crate::syntax::parse_model;
use crate::typesystem::{conformance, typecheck_network};

use super::{check_cache_flow_secure, check_semantic_security, InputSpace, SemanticCheck, Status};

/// Deadline used for generated timed communications. With `valuemod:4` every
/// transfer costs at most 4 ticks, so none of them fails.
const DEADLINE: u64 = 5;

#[derive(Debug, Clone, Serialize)]
pub struct HarnessConfig {
    pub programs: usize,
    pub seed: u64,
    /// Nesting depth of generated statements.
    pub max_depth: usize,
    pub fuel: u32,
    /// Generated timed-communication models checked against the cache flow policy.
    pub timed_models: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            programs: 500,
            seed: 0,
            max_depth: 3,
            fuel: 60,
            timed_models: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarnessFailure {
    pub index: usize,
    pub model: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HarnessReport {
    pub programs: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub accepted_secure: usize,
    pub accepted_bound_exceeded: usize,
    pub rejected_insecure: usize,
    /// Programs the type system accepts but the semantic oracle rejects.
    pub soundness_failures: Vec<HarnessFailure>,
    pub loops_checked: usize,
    pub max_loop_iterations: usize,
    /// Loops whose fixpoint took more than `(vars + lines) × height + 1` iterations.
    pub fixpoint_bound_failures: Vec<HarnessFailure>,
    pub timed_models: usize,
    pub timed_accepted: usize,
    pub timed_secure: usize,
    /// Accepted timed models the weak cache flow check rejects.
    pub timed_failures: Vec<HarnessFailure>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.soundness_failures.is_empty()
            && self.fixpoint_bound_failures.is_empty()
            && self.timed_failures.is_empty()
    }
}

/// Random small models: one VM, two or three variables, one channel.
pub struct ProgramGen {
    rng: ChaCha8Rng,
    vars: Vec<String>,
    max_depth: usize,
    /// Straight-line mode: no branches, loops or bare channel operations.
    straight: bool,
}

impl ProgramGen {
    pub fn new(seed: u64, max_depth: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vars: Vec::new(),
            max_depth,
            straight: false,
        }
    }

    fn pick<'a>(&mut self, xs: &'a [String]) -> &'a str {
        &xs[self.rng.random_range(0..xs.len())]
    }

    fn var(&mut self) -> String {
        let vars = self.vars.clone();
        self.pick(&vars).to_string()
    }

    fn expr(&mut self, depth: usize) -> String {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=3 => self.var(),
            4..=5 => self.rng.random_range(0..3).to_string(),
            6 if !self.straight => "read(ch)".into(),
            _ if depth > 0 => {
                let op = ["+", "-", "*"][self.rng.random_range(0..3)];
                format!("({} {op} {})", self.expr(depth - 1), self.expr(depth - 1))
            }
            _ => self.var(),
        }
    }

    fn guard(&mut self, depth: usize) -> String {
        match self.rng.random_range(0..8) {
            0 if depth > 0 => format!("!({})", self.guard(depth - 1)),
            1 if depth > 0 => format!("{} && {}", self.guard(depth - 1), self.guard(depth - 1)),
            _ => {
                let op = ["<", "<=", "==", ">", ">="][self.rng.random_range(0..5)];
                format!("{} {op} {}", self.expr(1), self.expr(1))
            }
        }
    }

    fn stmt(&mut self, depth: usize) -> String {
        let roll = self.rng.random_range(0..100);
        let nested = depth > 0;
        match roll {
            0..=34 => format!("{} := {}", self.var(), self.expr(2)),
            35..=39 => "skip".into(),
            40..=44 => format!("sleep({})", self.rng.random_range(0..3)),
            45..=59 if nested && !self.straight => format!(
                "if {} {{ {} }} else {{ {} }}",
                self.guard(1),
                self.stmt(depth - 1),
                self.stmt(depth - 1)
            ),
            60..=66 if nested && !self.straight => {
                let v = self.var();
                format!("while {v} < 2 {{ {}; {v} := {v} + 1 }}", self.stmt(depth - 1))
            }
            67..=71 if !self.straight => format!("ch ! {}", self.expr(1)),
            72..=76 if !self.straight => format!("ch ? {}", self.var()),
            77..=84 => {
                let cont = if nested {
                    self.stmt(depth - 1)
                } else {
                    "skip".into()
                };
                format!(
                    "within {DEADLINE} {{ ch ! {} -> ch ? {} }} then {{ {cont} }}",
                    self.expr(1),
                    self.var()
                )
            }
            _ if nested => format!("{}; {}", self.stmt(depth - 1), self.stmt(depth - 1)),
            _ => format!("{} := {}", self.var(), self.expr(1)),
        }
    }

    /// A complete model source. Odd-numbered draws use a three-point chain.
    pub fn model(&mut self, index: usize) -> String {
        let three = index % 2 == 1;
        let labels: &[&str] = if three { &["L", "M", "H"] } else { &["L", "H"] };
        let nvars = self.rng.random_range(2..=3);
        self.vars = ["a", "b", "c"][..nvars].iter().map(|s| s.to_string()).collect();
        let mut out = format!("lattice {{ {}; }}\n", labels.join(" < "));
        for v in self.vars.clone() {
            let l = labels[self.rng.random_range(0..labels.len())];
            out.push_str(&format!("var {v} : {l};\n"));
        }
        let ll = labels[self.rng.random_range(0..labels.len())];
        out.push_str(&format!("line l : {ll} owner i1;\nchannel ch -> l;\n"));
        let n = self.rng.random_range(1..=3);
        let mut body: Vec<String> = (0..n).map(|_| self.stmt(self.max_depth)).collect();
        if self.rng.random_bool(0.3) {
            body.push("stop".into());
        }
        out.push_str(&format!(
            "host h1 category {{c1}} {{\n  vm i1 category {{t1}} pages {{}} {{\n    {}\n  }}\n}}\n",
            body.join(";\n    ")
        ));
        out.push_str(&format!(
            "config {{\n  cost valuemod 4;\n  keys 0;\n  domain {} = 0, 1;\n  domain line l = 0, 1;\n}}\n",
            self.vars.join(", ")
        ));
        out
    }

    /// A model with only assignments, sleeps and timed communications.
    pub fn timed_model(&mut self, index: usize) -> String {
        self.straight = true;
        let m = self.model(index);
        self.straight = false;
        m
    }
}

struct Checked {
    model: Model,
    accepted: bool,
    iterations: Vec<usize>,
    spec_bound: usize,
}

/// Typechecks against a declared final environment equal to the initial one.
fn typecheck(src: &str, fuel: u32) -> Option<Checked> {
    let mut model = parse_model(src).ok()?;
    model.config.fuel = fuel;
    let nt = typecheck_network(&model, false);
    let spec_bound = (model.env.var_labels.len() + model.env.line_labels.len()) * model.lattice.height() + 1;
    let (accepted, iterations) = match nt {
        Ok(nt) => {
            let conforms = nt.components.iter().all(|c| {
                conformance(&model.lattice, &c.typing.env_after, &model.env, &c.typing.provenance).is_ok()
            });
            let its = nt
                .components
                .iter()
                .flat_map(|c| c.typing.derivation.loop_iterations())
                .collect();
            (conforms, its)
        }
        Err(_) => (false, Vec::new()),
    };
    Some(Checked {
        model,
        accepted,
        iterations,
        spec_bound,
    })
}

/// Generates random programs, typechecks them and runs the semantic oracle on
/// each. Every accepted program the oracle finds insecure is reported.
pub fn soundness_harness(cfg: &HarnessConfig) -> HarnessReport {
    let mut report = HarnessReport::default();
    let mut gen = ProgramGen::new(cfg.seed, cfg.max_depth);
    for index in 0..cfg.programs {
        let src = gen.model(index);
        let Some(checked) = typecheck(&src, cfg.fuel) else {
            continue;
        };
        report.programs += 1;
        for &n in &checked.iterations {
            report.loops_checked += 1;
            report.max_loop_iterations = report.max_loop_iterations.max(n);
            if n > checked.spec_bound {
                report.fixpoint_bound_failures.push(HarnessFailure {
                    index,
                    model: src.clone(),
                    reason: format!("{n} iterations, bound {}", checked.spec_bound),
                });
            }
        }
        let m = &checked.model;
        let sys = System::from_model(m);
        let space = InputSpace::from_model(m, m.lattice.bottom());
        for (c, comp) in sys.components.iter().enumerate() {
            let counter = crate::typesystem::base_counter(&m.lattice, &m.env, &comp.instance, &comp.host);
            let chk = SemanticCheck {
                sys: &sys,
                lattice: &m.lattice,
                component: c,
                env_before: &m.env,
                env_after: &m.env,
                counter: &counter,
                atoms: &m.atoms,
                symmetric: false,
            };
            let v = check_semantic_security(&chk, &space);
            if checked.accepted {
                match v.status {
                    Status::Secure => report.accepted_secure += 1,
                    Status::BoundExceeded => report.accepted_bound_exceeded += 1,
                    Status::Insecure => report.soundness_failures.push(HarnessFailure {
                        index,
                        model: src.clone(),
                        reason: serde_json::to_string(&v.witnesses).unwrap_or_default(),
                    }),
                }
            } else if v.status == Status::Insecure {
                report.rejected_insecure += 1;
            }
        }
        if checked.accepted {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
    }

    for index in 0..cfg.timed_models {
        let src = gen.timed_model(index);
        let Some(checked) = typecheck(&src, cfg.fuel) else {
            continue;
        };
        report.timed_models += 1;
        if !checked.accepted {
            continue;
        }
        report.timed_accepted += 1;
        let m = &checked.model;
        let sys = System::from_model(m);
        let space = InputSpace::from_model(m, m.lattice.bottom());
        let obs = LevelTriple::new(m.lattice.bottom(), m.atoms.clone(), m.atoms.clone());
        let v = check_cache_flow_secure(&sys, &m.lattice, &obs, Mode::Weak, false, &space);
        match v.status {
            Status::Secure => report.timed_secure += 1,
            Status::BoundExceeded => {}
            Status::Insecure => report.timed_failures.push(HarnessFailure {
                index,
                model: src,
                reason: serde_json::to_string(&v.witnesses).unwrap_or_default(),
            }),
        }
    }
    report
}
