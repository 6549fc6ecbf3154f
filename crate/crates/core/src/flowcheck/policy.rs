use crate::config::Mode;
use crate::lattice::{Category, Lattice, SecEnv};
use crate::semantics::{enumerate_runs, Configuration, Inputs, Outcome, RunSet, System, TimedRun};
use crate::typesystem::Counter;

use super::{InputSpace, ObservationLevel, Observer, Stats, Status, Verdict, Violation, Witness};

fn bound_exceeded(mode: Option<Mode>, obs: String, stats: Stats, note: String) -> Verdict {
    Verdict {
        status: Status::BoundExceeded,
        mode,
        obs,
        witnesses: Vec::new(),
        stats,
        note: Some(note),
    }
}

/// Inputs and the run sets they produce.
fn explore(sys: &System, space: &InputSpace, stats: &mut Stats) -> Result<(Vec<Inputs>, Vec<RunSet>), String> {
    let inputs = space.enumerate().map_err(|e| e.to_string())?;
    stats.inputs = inputs.len();
    let mut sets = Vec::with_capacity(inputs.len());
    for inp in &inputs {
        sets.push(enumerate_runs(sys, inp).map_err(|e| e.to_string())?);
    }
    Ok((inputs, sets))
}

fn truncated(r: &TimedRun) -> bool {
    r.outcome == Outcome::FuelExhausted
}

/// The cache flow security policy: for every component and every pair of
/// low-equivalent initial states, every run from the first is bisimilar to
/// every run from the second. Runs cut off by fuel are compared as prefixes.
pub fn check_cache_flow_secure(
    sys: &System,
    lattice: &Lattice,
    obs: &ObservationLevel,
    mode: Mode,
    symmetric: bool,
    space: &InputSpace,
) -> Verdict {
    let observer = Observer {
        lattice,
        env: &sys.env,
        obs,
        symmetric,
    };
    let obs_str = obs.render(lattice);
    let mut stats = Stats::default();
    let (inputs, sets) = match explore(sys, space, &mut stats) {
        Ok(x) => x,
        Err(note) => return bound_exceeded(Some(mode), obs_str, stats, note),
    };
    let mut witnesses = Vec::new();
    for c in 0..sys.components.len() {
        let runs: Vec<Vec<TimedRun>> = sets.iter().map(|s| s.component_runs(c)).collect();
        for rs in &runs {
            stats.runs_explored += rs.len();
            stats.truncated_runs += rs.iter().filter(|r| truncated(r)).count();
        }
        let inits: Vec<Configuration> = inputs.iter().map(|i| sys.initial_config(c, i)).collect();
        let mut witness = None;
        for i in 0..inputs.len() {
            for j in 0..inputs.len() {
                if !observer.equiv(&inits[i], &inits[j]) {
                    continue;
                }
                stats.initial_pairs += 1;
                for r1 in &runs[i] {
                    for r2 in &runs[j] {
                        stats.pairs_compared += 1;
                        let Some(v) = observer.compare(mode, r1, r2) else {
                            continue;
                        };
                        if v.is_timing() {
                            stats.timing_mismatches += 1;
                        } else {
                            stats.config_mismatches += 1;
                        }
                        if witness.is_none() {
                            witness = Some(Witness {
                                component: sys.components[c].label(),
                                component_index: c,
                                obs: obs_str.clone(),
                                triple: obs.clone(),
                                inputs: vec![inputs[i].clone(), inputs[j].clone()],
                                runs: vec![r1.clone(), r2.clone()],
                                violation: v,
                            });
                        }
                    }
                }
            }
        }
        witnesses.extend(witness);
    }
    let (status, note) = if !witnesses.is_empty() {
        (Status::Insecure, None)
    } else if stats.truncated_runs > 0 {
        (
            Status::BoundExceeded,
            Some(format!(
                "no violation within fuel {}, but {} runs were cut off",
                sys.fuel, stats.truncated_runs
            )),
        )
    } else {
        (Status::Secure, None)
    };
    Verdict {
        status,
        mode: Some(mode),
        obs: obs_str,
        witnesses,
        stats,
        note,
    }
}

/// Re-enumerates both witnessed initial states and confirms the recorded runs
/// occur and are still told apart.
pub fn replay_cache_flow_witness(
    sys: &System,
    lattice: &Lattice,
    mode: Mode,
    symmetric: bool,
    w: &Witness,
) -> bool {
    if w.inputs.len() != 2 || w.runs.len() != 2 || !occurs(sys, w) {
        return false;
    }
    let observer = Observer {
        lattice,
        env: &sys.env,
        obs: &w.triple,
        symmetric,
    };
    observer.compare(mode, &w.runs[0], &w.runs[1]).as_ref() == Some(&w.violation)
}

fn occurs(sys: &System, w: &Witness) -> bool {
    w.inputs.iter().zip(&w.runs).all(|(inp, run)| {
        enumerate_runs(sys, inp)
            .map(|s| s.component_runs(w.component_index).contains(run))
            .unwrap_or(false)
    })
}

/// Inputs to the semantic flow security check of one component.
#[derive(Debug, Clone, Copy)]
pub struct SemanticCheck<'a> {
    pub sys: &'a System,
    pub lattice: &'a Lattice,
    pub component: usize,
    pub env_before: &'a SecEnv,
    pub env_after: &'a SecEnv,
    pub counter: &'a Counter,
    /// Category universe the observation triples range over.
    pub atoms: &'a Category,
    pub symmetric: bool,
}

impl SemanticCheck<'_> {
    /// Every `(t, o, o′)` in the lattice × category × category product.
    fn triples(&self) -> Vec<ObservationLevel> {
        let subsets = self.atoms.subsets();
        let mut out = Vec::new();
        for t in self.lattice.labels() {
            for o in &subsets {
                for o2 in &subsets {
                    out.push(ObservationLevel::new(t, o.clone(), o2.clone()));
                }
            }
        }
        out
    }

    /// Identifiers whose final label lies strictly below the counter level.
    fn below_counter(&self, g: &Configuration) -> Vec<(String, bool)> {
        let lt = |l: &crate::lattice::Label| self.lattice.lt(*l, self.counter.level);
        let vars = g
            .store
            .keys()
            .filter(|x| self.env_after.var_labels.get(*x).is_some_and(lt))
            .map(|x| (x.clone(), true));
        let lines = g
            .cache
            .keys()
            .filter(|l| self.env_after.line_labels.get(*l).is_some_and(lt))
            .map(|l| (l.clone(), false));
        vars.chain(lines).collect()
    }

    fn changed(&self, init: &Configuration, fin: &Configuration) -> Option<String> {
        self.below_counter(init).into_iter().find_map(|(id, is_var)| {
            let same = if is_var {
                init.store.get(&id) == fin.store.get(&id)
            } else {
                init.cache.get(&id) == fin.cache.get(&id)
            };
            (!same).then(|| if is_var { id } else { format!("line {id}") })
        })
    }
}

/// Terminated runs of the component per input, one representative per
/// distinct final configuration. Deadlocked and faulted runs have no final
/// state.
fn finals(sets: &[RunSet], c: usize) -> Vec<Vec<TimedRun>> {
    sets.iter()
        .map(|s| {
            let mut out: Vec<TimedRun> = Vec::new();
            for r in s.component_runs(c) {
                if r.outcome == Outcome::Terminated
                    && !out.iter().any(|o| o.final_config == r.final_config)
                {
                    out.push(r);
                }
            }
            out
        })
        .collect()
}

/// The semantic flow security condition for one component: nothing typed
/// strictly below the counter changes, and at every observation triple
/// low-equivalent initial states lead only to low-equivalent final states.
pub fn check_semantic_security(chk: &SemanticCheck, space: &InputSpace) -> Verdict {
    let sys = chk.sys;
    let c = chk.component;
    let obs_str = chk.counter.render(chk.lattice);
    let mut stats = Stats::default();
    let (inputs, sets) = match explore(sys, space, &mut stats) {
        Ok(x) => x,
        Err(note) => return bound_exceeded(None, obs_str, stats, note),
    };
    let all: Vec<Vec<TimedRun>> = sets.iter().map(|s| s.component_runs(c)).collect();
    stats.runs_explored = all.iter().map(Vec::len).sum();
    stats.truncated_runs = all.iter().flatten().filter(|r| truncated(r)).count();
    if stats.truncated_runs > 0 {
        let note = format!("{} runs do not finish within fuel {}", stats.truncated_runs, sys.fuel);
        return bound_exceeded(None, obs_str, stats, note);
    }
    let inits: Vec<Configuration> = inputs.iter().map(|i| sys.initial_config(c, i)).collect();
    let fins = finals(&sets, c);
    let label = sys.components[c].label();
    let insecure = |stats: Stats, w: Witness| Verdict {
        status: Status::Insecure,
        mode: None,
        obs: obs_str.clone(),
        witnesses: vec![w],
        stats,
        note: None,
    };

    for (i, rs) in fins.iter().enumerate() {
        for r in rs {
            if let Some(ident) = chk.changed(&inits[i], &r.final_config) {
                stats.config_mismatches += 1;
                let w = Witness {
                    component: label.clone(),
                    component_index: c,
                    obs: obs_str.clone(),
                    triple: chk.counter.clone(),
                    inputs: vec![inputs[i].clone()],
                    runs: vec![r.clone()],
                    violation: Violation::Changed { ident },
                };
                return insecure(stats, w);
            }
        }
    }

    for triple in chk.triples() {
        let before = Observer {
            lattice: chk.lattice,
            env: chk.env_before,
            obs: &triple,
            symmetric: chk.symmetric,
        };
        let after = Observer {
            env: chk.env_after,
            ..before
        };
        for i in 0..inputs.len() {
            for j in 0..inputs.len() {
                if !before.equiv(&inits[i], &inits[j]) {
                    continue;
                }
                stats.initial_pairs += 1;
                for f1 in &fins[i] {
                    for f2 in &fins[j] {
                        stats.pairs_compared += 1;
                        let differing = after.diff(&f1.final_config, &f2.final_config);
                        if differing.is_empty() {
                            continue;
                        }
                        stats.config_mismatches += 1;
                        let w = Witness {
                            component: label.clone(),
                            component_index: c,
                            obs: triple.render(chk.lattice),
                            triple: triple.clone(),
                            inputs: vec![inputs[i].clone(), inputs[j].clone()],
                            runs: vec![f1.clone(), f2.clone()],
                            violation: Violation::Config {
                                index: f1.steps.len(),
                                differing,
                            },
                        };
                        return insecure(stats, w);
                    }
                }
            }
        }
    }
    Verdict {
        status: Status::Secure,
        mode: None,
        obs: obs_str,
        witnesses: Vec::new(),
        stats,
        note: None,
    }
}

/// Re-runs a semantic witness and confirms the violation.
pub fn replay_semantic_witness(chk: &SemanticCheck, w: &Witness) -> bool {
    if w.inputs.len() != w.runs.len() || !occurs(chk.sys, w) {
        return false;
    }
    match &w.violation {
        Violation::Changed { ident } => {
            let init = chk.sys.initial_config(w.component_index, &w.inputs[0]);
            chk.changed(&init, &w.runs[0].final_config).as_ref() == Some(ident)
        }
        Violation::Config { differing, .. } if w.runs.len() == 2 => {
            let before = Observer {
                lattice: chk.lattice,
                env: chk.env_before,
                obs: &w.triple,
                symmetric: chk.symmetric,
            };
            let after = Observer {
                env: chk.env_after,
                ..before
            };
            let i1 = chk.sys.initial_config(w.component_index, &w.inputs[0]);
            let i2 = chk.sys.initial_config(w.component_index, &w.inputs[1]);
            before.equiv(&i1, &i2)
                && &after.diff(&w.runs[0].final_config, &w.runs[1].final_config) == differing
        }
        _ => false,
    }
}
