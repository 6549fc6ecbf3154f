use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::rc::Rc;

use thiserror::Error;

use super::step::{Next, StepCtx, Transition};
use super::{Cache, Configuration, Event, Inputs, Outcome, Store, System, TimedRun, TimedStep};
use crate::config::SchedulerPolicy;
use crate::syntax::Process;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("more than {limit} distinct run vectors")]
    BoundExceeded { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CompState {
    /// `None` once the component has terminated or faulted.
    proc: Option<Process>,
    store: Store,
    owner: String,
    fuel: u32,
    fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct NetState {
    cache: Cache,
    inst_host: BTreeMap<String, String>,
    comps: Vec<CompState>,
}

struct Machine<'a> {
    sys: &'a System,
    key: i64,
    reach: Vec<Vec<String>>,
}

impl<'a> Machine<'a> {
    fn new(sys: &'a System, key: i64) -> Self {
        let reach = sys.components.iter().map(|c| sys.reachable_lines(c)).collect();
        Self { sys, key, reach }
    }

    fn initial(&self, inputs: &Inputs) -> NetState {
        let comps = (0..self.sys.components.len())
            .map(|i| {
                let g = self.sys.initial_config(i, inputs);
                CompState {
                    proc: Some(self.sys.components[i].process.clone()),
                    store: g.store,
                    owner: g.owner,
                    fuel: self.sys.fuel,
                    fault: None,
                }
            })
            .collect();
        let mut cache: Cache = inputs.lines.clone();
        for lines in &self.reach {
            for l in lines {
                cache.entry(l.clone()).or_insert(None);
            }
        }
        NetState {
            cache,
            inst_host: self.sys.placement.clone(),
            comps,
        }
    }

    fn config(&self, s: &NetState, i: usize) -> Configuration {
        let c = &s.comps[i];
        Configuration {
            store: c.store.clone(),
            cache: self.reach[i]
                .iter()
                .map(|l| (l.clone(), s.cache.get(l).copied().flatten()))
                .collect(),
            owner: c.owner.clone(),
            host: s
                .inst_host
                .get(&c.owner)
                .cloned()
                .unwrap_or_else(|| self.sys.components[i].host.clone()),
        }
    }

    fn enabled(&self, s: &NetState, i: usize) -> Vec<Transition> {
        let c = &s.comps[i];
        match &c.proc {
            Some(p) if c.fuel > 0 => {
                let g = self.config(s, i);
                StepCtx {
                    sys: self.sys,
                    g: &g,
                    key: self.key,
                }
                .steps(p)
            }
            _ => Vec::new(),
        }
    }

    fn outcome(&self, s: &NetState, i: usize) -> Outcome {
        let c = &s.comps[i];
        match (&c.fault, &c.proc) {
            (Some(m), _) => Outcome::Faulted(m.clone()),
            (None, None) => Outcome::Terminated,
            (None, Some(_)) if c.fuel == 0 => Outcome::FuelExhausted,
            (None, Some(_)) => Outcome::Deadlocked,
        }
    }

    fn apply(&self, s: &NetState, i: usize, t: &Transition) -> NetState {
        use super::step::Effect;
        let mut s = s.clone();
        let pages = &self.sys.components[i].pages;
        for e in &t.effects {
            match e {
                Effect::SetVar(x, v) => {
                    s.comps[i].store.insert(x.clone(), *v);
                }
                Effect::SetLine(l, v) => {
                    s.cache.insert(l.clone(), *v);
                }
                Effect::FlushPages => {
                    for l in pages {
                        s.cache.insert(l.clone(), None);
                    }
                }
                Effect::SetOwner(o) => s.comps[i].owner = o.clone(),
                Effect::MoveInstance(h) => {
                    let owner = s.comps[i].owner.clone();
                    s.inst_host.insert(owner, h.clone());
                }
            }
        }
        let c = &mut s.comps[i];
        c.fuel -= 1;
        match &t.next {
            Next::Continue(p) => c.proc = Some(p.clone()),
            Next::Done | Next::Halt => c.proc = None,
            Next::Fault(m) => {
                c.proc = None;
                c.fault = Some(m.clone());
            }
        }
        s
    }
}

/// Executes the system under a deterministic scheduler. Inside a parallel
/// composition the left operand's step is preferred. `Exhaustive` is treated as
/// `LowestIndex` here.
pub fn run(sys: &System, inputs: &Inputs, policy: SchedulerPolicy) -> Vec<TimedRun> {
    let m = Machine::new(sys, inputs.key);
    let n = sys.components.len();
    let mut s = m.initial(inputs);
    let mut runs: Vec<Vec<TimedStep>> = vec![Vec::new(); n];
    let mut last: Option<usize> = None;
    loop {
        let order: Vec<usize> = match (policy, last) {
            (SchedulerPolicy::RoundRobin, Some(l)) => (1..=n).map(|k| (l + k) % n).collect(),
            _ => (0..n).collect(),
        };
        let chosen = order.into_iter().find_map(|i| {
            let t = m.enabled(&s, i);
            t.into_iter().next().map(|t| (i, t))
        });
        let Some((i, t)) = chosen else { break };
        runs[i].push(TimedStep {
            config: m.config(&s, i),
            event: t.event.clone(),
            dt: t.dt,
        });
        s = m.apply(&s, i, &t);
        last = Some(i);
    }
    runs.into_iter()
        .enumerate()
        .map(|(i, steps)| TimedRun {
            component: sys.components[i].label(),
            total_time: steps.iter().map(|s| s.dt).sum(),
            steps,
            final_config: m.config(&s, i),
            outcome: m.outcome(&s, i),
        })
        .collect()
}

struct Interner<T> {
    ids: HashMap<T, u32>,
    items: Vec<T>,
}

impl<T: Clone + Eq + Hash> Interner<T> {
    fn new() -> Self {
        Self {
            ids: HashMap::new(),
            items: Vec::new(),
        }
    }

    fn intern(&mut self, t: T) -> u32 {
        if let Some(&id) = self.ids.get(&t) {
            return id;
        }
        let id = self.items.len() as u32;
        self.items.push(t.clone());
        self.ids.insert(t, id);
        id
    }

    fn get(&self, id: u32) -> &T {
        &self.items[id as usize]
    }
}

/// Suffix of one component's run, shared between all runs that end the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    End { config: u32, outcome: u32 },
    Step { config: u32, event: u32, dt: u64, next: u32 },
}

struct Arena {
    configs: Interner<Configuration>,
    events: Interner<Event>,
    outcomes: Interner<Outcome>,
    nodes: Interner<Node>,
    vectors: Interner<Vec<u32>>,
}

impl Arena {
    fn new() -> Self {
        Self {
            configs: Interner::new(),
            events: Interner::new(),
            outcomes: Interner::new(),
            nodes: Interner::new(),
            vectors: Interner::new(),
        }
    }

    fn materialize(&self, label: String, mut node: u32) -> TimedRun {
        let mut steps = Vec::new();
        loop {
            match *self.nodes.get(node) {
                Node::Step {
                    config,
                    event,
                    dt,
                    next,
                } => {
                    steps.push(TimedStep {
                        config: self.configs.get(config).clone(),
                        event: self.events.get(event).clone(),
                        dt,
                    });
                    node = next;
                }
                Node::End { config, outcome } => {
                    return TimedRun {
                        component: label,
                        total_time: steps.iter().map(|s| s.dt).sum(),
                        steps,
                        final_config: self.configs.get(config).clone(),
                        outcome: self.outcomes.get(outcome).clone(),
                    }
                }
            }
        }
    }
}

/// One run per component.
pub type RunVector = Vec<TimedRun>;

/// The distinct run vectors reachable under every scheduling choice.
pub struct RunSet {
    labels: Vec<String>,
    arena: Arena,
    vectors: Vec<u32>,
    interleavings: u128,
}

impl RunSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of distinct complete schedules (saturating).
    pub fn interleavings(&self) -> u128 {
        self.interleavings
    }

    pub fn vector(&self, k: usize) -> RunVector {
        let v = self.arena.vectors.get(self.vectors[k]);
        v.iter()
            .enumerate()
            .map(|(i, &n)| self.arena.materialize(self.labels[i].clone(), n))
            .collect()
    }

    pub fn vectors(&self) -> impl Iterator<Item = RunVector> + '_ {
        (0..self.len()).map(|k| self.vector(k))
    }

    /// Distinct runs of component `i` across all vectors, in a deterministic order.
    pub fn component_runs(&self, i: usize) -> Vec<TimedRun> {
        let mut nodes: Vec<u32> = self
            .vectors
            .iter()
            .map(|&v| self.arena.vectors.get(v)[i])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
            .into_iter()
            .map(|n| self.arena.materialize(self.labels[i].clone(), n))
            .collect()
    }
}

struct Explorer<'a> {
    m: Machine<'a>,
    arena: Arena,
    memo: HashMap<NetState, (Rc<[u32]>, u128)>,
    limit: usize,
}

impl Explorer<'_> {
    fn explore(&mut self, s: &NetState) -> Result<(Rc<[u32]>, u128), EnumerateError> {
        if let Some(r) = self.memo.get(s) {
            return Ok(r.clone());
        }
        let n = s.comps.len();
        let mut moves = Vec::new();
        for i in 0..n {
            for t in self.m.enabled(s, i) {
                moves.push((i, t));
            }
        }
        let result: (Rc<[u32]>, u128) = if moves.is_empty() {
            let ends: Vec<u32> = (0..n)
                .map(|i| {
                    let config = self.arena.configs.intern(self.m.config(s, i));
                    let outcome = self.arena.outcomes.intern(self.m.outcome(s, i));
                    self.arena.nodes.intern(Node::End { config, outcome })
                })
                .collect();
            (Rc::from(vec![self.arena.vectors.intern(ends)]), 1)
        } else {
            let mut acc: Vec<u32> = Vec::new();
            let mut count: u128 = 0;
            for (i, t) in moves {
                let config = self.arena.configs.intern(self.m.config(s, i));
                let event = self.arena.events.intern(t.event.clone());
                let next_state = self.m.apply(s, i, &t);
                let (sub, c) = self.explore(&next_state)?;
                count = count.saturating_add(c);
                for &v in sub.iter() {
                    let mut vec = self.arena.vectors.get(v).clone();
                    vec[i] = self.arena.nodes.intern(Node::Step {
                        config,
                        event,
                        dt: t.dt,
                        next: vec[i],
                    });
                    acc.push(self.arena.vectors.intern(vec));
                }
                if acc.len() > 2 * self.limit {
                    acc.sort_unstable();
                    acc.dedup();
                }
            }
            acc.sort_unstable();
            acc.dedup();
            if acc.len() > self.limit {
                return Err(EnumerateError::BoundExceeded { limit: self.limit });
            }
            (Rc::from(acc), count)
        };
        self.memo.insert(s.clone(), result.clone());
        Ok(result)
    }
}

/// Explores every scheduling choice (which component steps, and which side of
/// a parallel composition) up to each component's fuel.
pub fn enumerate_runs(sys: &System, inputs: &Inputs) -> Result<RunSet, EnumerateError> {
    let m = Machine::new(sys, inputs.key);
    let init = m.initial(inputs);
    let mut ex = Explorer {
        m,
        arena: Arena::new(),
        memo: HashMap::new(),
        limit: sys.max_runs,
    };
    let (set, interleavings) = ex.explore(&init)?;
    // Interning order follows the depth-first exploration, so it is deterministic.
    Ok(RunSet {
        labels: sys.components.iter().map(|c| c.label()).collect(),
        arena: ex.arena,
        vectors: set.to_vec(),
        interleavings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_model;

    fn system(src: &str) -> (System, Inputs) {
        let m = parse_model(src).unwrap();
        (System::from_model(&m), Inputs::declared(&m))
    }

    #[test]
    fn single_sequential_component_has_one_vector() {
        let (sys, inp) = system("var x : L; host h { vm i pages {} { x := 1; x := x + 1; skip } }");
        let rs = enumerate_runs(&sys, &inp).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.interleavings(), 1);
        let v = rs.vector(0);
        assert_eq!(v[0].steps.len(), 3);
        assert_eq!(v[0].final_config.store["x"], 2);
        assert_eq!(v[0].outcome, Outcome::Terminated);
    }

    #[test]
    fn par_inside_a_component_gives_two_vectors() {
        let (sys, inp) = system("var x, y : L; host h { vm i pages {} { (x := 1 || y := 2); skip } }");
        let rs = enumerate_runs(&sys, &inp).unwrap();
        assert_eq!(rs.len(), 2);
        let finals: Vec<Store> = rs.vectors().map(|v| v[0].final_config.store.clone()).collect();
        assert_eq!(finals[0], finals[1]);
        assert_eq!(finals[0]["x"], 1);
        assert_eq!(finals[0]["y"], 2);
    }

    #[test]
    fn two_components_interleave_six_ways() {
        let (sys, inp) = system(
            "var x, y : L; host h { vm i pages {} { x := 1; x := 2 } || vm j pages {} { y := 1; y := 2 } }",
        );
        let rs = enumerate_runs(&sys, &inp).unwrap();
        // C(4, 2) schedules; the components share nothing, so every schedule
        // yields the same pair of runs.
        assert_eq!(rs.interleavings(), 6);
        assert_eq!(rs.len(), 1);
    }

    #[test]
    fn shared_line_makes_schedules_observable() {
        let (sys, inp) = system(
            "var z : L; line l : L owner i; channel a -> l;
             host h { vm i pages {} { a ! 0 } || vm j pages {} { z := read(a) } }",
        );
        let rs = enumerate_runs(&sys, &inp).unwrap();
        assert_eq!(rs.interleavings(), 2);
        assert_eq!(rs.len(), 2);
        let zs: Vec<i64> = rs.vectors().map(|v| v[1].final_config.store["z"]).collect();
        assert!(zs.contains(&1) && zs.contains(&-1));
    }

    #[test]
    fn sleep_totals() {
        let (sys, inp) = system("host h { vm i pages {} { sleep(3) } }");
        let runs = run(&sys, &inp, SchedulerPolicy::RoundRobin);
        assert_eq!(runs[0].steps.len(), 3);
        assert_eq!(runs[0].total_time, 3);
        assert!(runs[0].durations().all(|d| d == 1));
    }

    #[test]
    fn deadlock_and_fuel() {
        let (sys, inp) = system(
            "var x : L; line l : L owner i; channel a -> l; host h { vm i pages {} { a ? x } }",
        );
        assert_eq!(run(&sys, &inp, SchedulerPolicy::RoundRobin)[0].outcome, Outcome::Deadlocked);
        let (sys, inp) = system("host h { vm i pages {} { while true { skip } } } config { fuel 7; }");
        let r = &run(&sys, &inp, SchedulerPolicy::RoundRobin)[0];
        assert_eq!(r.outcome, Outcome::FuelExhausted);
        assert_eq!(r.steps.len(), 7);
    }

    #[test]
    fn stop_flushes_pages_in_every_run() {
        let (sys, inp) = system(
            "var x : L; line p1, p2 : L = 5; line c : L owner i; channel a -> c;
             host h { vm i pages {p1, p2} { a ! 1; stop; x := 9 } || vm j pages {} { a ? x } }",
        );
        let rs = enumerate_runs(&sys, &inp).unwrap();
        assert!(!rs.is_empty());
        for v in rs.vectors() {
            let r = &v[0];
            assert_eq!(r.outcome, Outcome::Terminated);
            assert_eq!(r.final_config.cache["p1"], None);
            assert_eq!(r.final_config.cache["p2"], None);
            assert_eq!(r.final_config.store["x"], 0, "stop discards the continuation");
        }
    }

    #[test]
    fn deterministic_run_is_enumerated() {
        let (sys, inp) = system(
            "var z, w : L; line l : L owner i; channel a -> l;
             host h { vm i pages {} { a ! 3; w := 1 || w := 2 } || vm j pages {} { z := read(a); z := read(a) } }",
        );
        let rs = enumerate_runs(&sys, &inp).unwrap();
        let all: Vec<RunVector> = rs.vectors().collect();
        for policy in [SchedulerPolicy::RoundRobin, SchedulerPolicy::LowestIndex] {
            assert!(all.contains(&run(&sys, &inp, policy)));
        }
    }

    #[test]
    fn bound_exceeded_is_reported() {
        let (mut sys, inp) = system(
            "var z : L; line l : L owner i; channel a -> l;
             host h { vm i pages {} { a ! 1; a ! 2; a ! 3 } || vm j pages {} { z := read(a); z := read(a); z := read(a) } }",
        );
        sys.max_runs = 2;
        assert_eq!(
            enumerate_runs(&sys, &inp).err(),
            Some(EnumerateError::BoundExceeded { limit: 2 })
        );
    }
}
