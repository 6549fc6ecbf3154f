use super::eval::EvalCtx;
use super::{Configuration, Event, EventKind, System};
use crate::syntax::{Component, Process};

/// A state change produced by one step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Effect {
    SetVar(String, i64),
    SetLine(String, Option<i64>),
    /// Flush the stepping component's pages.
    FlushPages,
    SetOwner(String),
    /// Relocate every component of the stepping component's instance.
    MoveInstance(String),
}

/// What remains of the stepped process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Next {
    Continue(Process),
    /// Completed normally; a sequential continuation runs next.
    Done,
    /// `stop`: the whole sequential thread ends.
    Halt,
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub event: Event,
    pub dt: u64,
    pub next: Next,
    pub effects: Vec<Effect>,
}

impl Transition {
    fn new(kind: EventKind, subject: String, dt: u64, next: Next) -> Self {
        Self {
            event: Event {
                kind,
                subject,
                channel: None,
            },
            dt,
            next,
            effects: Vec::new(),
        }
    }

    fn on(mut self, chan: &str) -> Self {
        self.event.channel = Some(chan.to_string());
        self
    }

    fn with(mut self, e: Effect) -> Self {
        self.effects.push(e);
        self
    }

    fn map_next(mut self, f: impl FnOnce(Next) -> Next) -> Self {
        self.next = f(self.next);
        self
    }
}

pub(crate) struct StepCtx<'a> {
    pub sys: &'a System,
    pub g: &'a Configuration,
    pub key: i64,
}

impl StepCtx<'_> {
    fn eval(&self) -> EvalCtx<'_> {
        EvalCtx {
            store: &self.g.store,
            cache: &self.g.cache,
            channels: &self.sys.channels,
            key: self.key,
        }
    }

    fn line(&self, chan: &str) -> Option<&str> {
        self.sys.channels.get(chan).map(String::as_str)
    }

    /// All enabled steps of `p`. An empty result means `p` is blocked.
    pub(crate) fn steps(&self, p: &Process) -> Vec<Transition> {
        use EventKind as K;
        let fault = |kind, subject: String, msg: String| {
            vec![Transition::new(kind, subject, 0, Next::Fault(msg))]
        };
        match p {
            Process::Assign(x, e) => {
                let subject = p.to_string();
                match self.eval().expr(e) {
                    Ok(v) => vec![Transition::new(K::Assign, subject, 0, Next::Done)
                        .with(Effect::SetVar(x.clone(), v))],
                    Err(err) => fault(K::Assign, subject, err.to_string()),
                }
            }
            Process::Stop => vec![
                Transition::new(K::Stop, "stop".into(), 0, Next::Halt).with(Effect::FlushPages)
            ],
            Process::Skip => vec![Transition::new(K::Skip, "skip".into(), 0, Next::Done)],
            Process::Sleep(0) => vec![Transition::new(K::SleepTick, p.to_string(), 0, Next::Done)],
            Process::Sleep(n) => {
                let next = if *n == 1 {
                    Next::Done
                } else {
                    Next::Continue(Process::Sleep(n - 1))
                };
                vec![Transition::new(K::SleepTick, p.to_string(), 1, next)]
            }
            Process::MoveProcess(i) => {
                let env = &self.sys.env;
                let dest = env.instance_category(i);
                let src = env.instance_category(&self.g.owner);
                if dest.leq(&src) {
                    vec![Transition::new(K::MoveP, p.to_string(), 0, Next::Done)
                        .with(Effect::SetOwner(i.clone()))]
                } else {
                    fault(
                        K::MoveP,
                        p.to_string(),
                        format!("move violation: category of `{i}` is not below that of `{}`", self.g.owner),
                    )
                }
            }
            Process::MoveInstance(h) => {
                let env = &self.sys.env;
                if env.host_category(h).leq(&env.host_category(&self.g.host)) {
                    vec![Transition::new(K::MoveI, p.to_string(), 0, Next::Done)
                        .with(Effect::MoveInstance(h.clone()))]
                } else {
                    fault(
                        K::MoveI,
                        p.to_string(),
                        format!("move violation: category of `{h}` is not below that of `{}`", self.g.host),
                    )
                }
            }
            Process::Seq(a, b) => self
                .steps(a)
                .into_iter()
                .map(|t| {
                    t.map_next(|n| match n {
                        Next::Continue(a2) => Next::Continue(Process::Seq(Box::new(a2), b.clone())),
                        Next::Done => Next::Continue((**b).clone()),
                        other => other,
                    })
                })
                .collect(),
            Process::Branch {
                guard,
                then_branch,
                else_branch,
            } => match self.eval().boolean(guard) {
                Ok(true) => vec![Transition::new(
                    K::Branch,
                    format!("{guard} -> then"),
                    0,
                    Next::Continue((**then_branch).clone()),
                )],
                Ok(false) => vec![Transition::new(
                    K::Branch,
                    format!("{guard} -> else"),
                    0,
                    Next::Continue((**else_branch).clone()),
                )],
                Err(err) => fault(K::Branch, guard.to_string(), err.to_string()),
            },
            Process::Loop { guard, body } => {
                let unfolded = Process::branch(
                    guard.clone(),
                    Process::seq((**body).clone(), p.clone()),
                    Process::Skip,
                );
                vec![Transition::new(
                    K::LoopUnfold,
                    format!("while {guard}"),
                    0,
                    Next::Continue(unfolded),
                )]
            }
            Process::Send(a, e) => {
                let subject = p.to_string();
                let Some(line) = self.line(a) else {
                    return fault(K::Send, subject, format!("channel `{a}` has no cache line"));
                };
                match self.eval().expr(e) {
                    Ok(v) => {
                        let dt = self.sys.costs.comm.comm_cost(a, v);
                        vec![Transition::new(K::Send, subject, dt, Next::Done)
                            .on(a)
                            .with(Effect::SetLine(line.to_string(), Some(v)))]
                    }
                    Err(err) => fault(K::Send, subject, err.to_string()),
                }
            }
            Process::Recv(a, x) => {
                let Some(line) = self.line(a) else {
                    return fault(K::Recv, p.to_string(), format!("channel `{a}` has no cache line"));
                };
                match self.g.cache.get(line) {
                    Some(Some(v)) => vec![Transition::new(
                        K::Recv,
                        p.to_string(),
                        self.sys.costs.recv,
                        Next::Done,
                    )
                    .on(a)
                    .with(Effect::SetVar(x.clone(), *v))],
                    _ => Vec::new(),
                }
            }
            Process::Par(a, b) => {
                let left = self.steps(a).into_iter().map(|t| {
                    t.map_next(|n| match n {
                        Next::Continue(a2) => Next::Continue(Process::Par(Box::new(a2), b.clone())),
                        Next::Done | Next::Halt => Next::Continue((**b).clone()),
                        f => f,
                    })
                });
                let right = self.steps(b).into_iter().map(|t| {
                    t.map_next(|n| match n {
                        Next::Continue(b2) => Next::Continue(Process::Par(a.clone(), Box::new(b2))),
                        Next::Done | Next::Halt => Next::Continue((**a).clone()),
                        f => f,
                    })
                });
                left.chain(right).collect()
            }
            Process::TimedComm { .. } => vec![self.timed_comm(p)],
        }
    }

    pub(crate) fn timed_comm(&self, p: &Process) -> Transition {
        let Process::TimedComm {
            deadline,
            chan,
            value,
            var,
            cont,
        } = p
        else {
            panic!("timed_comm called on a non-timed process");
        };
        let subject = format!("{chan} ! {value} -> {chan} ? {var}");
        let Some(line) = self.line(chan) else {
            return Transition::new(
                EventKind::TimedComm,
                subject,
                0,
                Next::Fault(format!("channel `{chan}` has no cache line")),
            );
        };
        let v = match self.eval().expr(value) {
            Ok(v) => v,
            Err(err) => {
                return Transition::new(EventKind::TimedComm, subject, 0, Next::Fault(err.to_string()))
            }
        };
        let t = self.sys.costs.comm.comm_cost(chan, v);
        if t < *deadline {
            Transition::new(
                EventKind::TimedComm,
                subject,
                *deadline,
                Next::Continue((**cont).clone()),
            )
            .on(chan)
            .with(Effect::SetVar(var.clone(), v))
            .with(Effect::SetLine(line.to_string(), None))
        } else {
            Transition::new(
                EventKind::TimedComm,
                format!("{subject} failed"),
                *deadline,
                Next::Continue(Process::Stop),
            )
            .on(chan)
        }
    }
}

/// Every enabled step of a component in configuration `g`.
pub fn step(sys: &System, c: &Component, g: &Configuration, key: i64) -> Vec<Transition> {
    StepCtx { sys, g, key }.steps(&c.process)
}

/// The single atomic step of a deadline-padded communication node.
pub fn step_timed_comm(sys: &System, g: &Configuration, node: &Process, key: i64) -> Transition {
    StepCtx { sys, g, key }.timed_comm(node)
}

#[cfg(test)]
fn apply_local(g: &mut Configuration, t: &Transition, pages: &std::collections::BTreeSet<String>) {
    for e in &t.effects {
        match e {
            Effect::SetVar(x, v) => {
                g.store.insert(x.clone(), *v);
            }
            Effect::SetLine(l, v) => {
                if let Some(slot) = g.cache.get_mut(l) {
                    *slot = *v;
                }
            }
            Effect::FlushPages => {
                for l in pages {
                    if let Some(slot) = g.cache.get_mut(l) {
                        *slot = None;
                    }
                }
            }
            Effect::SetOwner(i) => g.owner = i.clone(),
            Effect::MoveInstance(h) => g.host = h.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CostModel, Costs};
    use crate::lattice::SecEnv;
    use crate::semantics::Cache;
    use crate::syntax::parse_process;
    use std::collections::BTreeMap;

    fn system(costs: CostModel) -> System {
        System {
            components: Vec::new(),
            env: SecEnv::default(),
            channels: [("a".to_string(), "la".to_string())].into(),
            placement: BTreeMap::new(),
            costs: Costs { comm: costs, recv: 0 },
            fuel: 10,
            max_runs: 1000,
        }
    }

    fn config(store: &[(&str, i64)], cache: &[(&str, Option<i64>)]) -> Configuration {
        Configuration {
            store: store.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            cache: cache.iter().map(|(k, v)| (k.to_string(), *v)).collect::<Cache>(),
            owner: "i".into(),
            host: "h".into(),
        }
    }

    fn steps(sys: &System, src: &str, g: &Configuration) -> Vec<Transition> {
        StepCtx { sys, g, key: 0 }.steps(&parse_process(src).unwrap())
    }

    #[test]
    fn assign_and_par() {
        let sys = system(CostModel::ValueMod(4));
        let g = config(&[("x", 0), ("y", 0)], &[]);
        let t = steps(&sys, "x := 1 + 1", &g);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].effects, vec![Effect::SetVar("x".into(), 2)]);
        assert_eq!(t[0].dt, 0);
        assert_eq!(steps(&sys, "x := 1 || y := 2", &g).len(), 2);
    }

    #[test]
    fn stop_flushes_pages() {
        let mut g = config(&[], &[("l0", Some(5)), ("l1", None), ("la", Some(1))]);
        let sys = system(CostModel::ValueMod(4));
        let t = &steps(&sys, "stop; x := 1", &g)[0];
        assert_eq!(t.next, Next::Halt);
        let pages = ["l0".to_string(), "l1".to_string()].into();
        apply_local(&mut g, t, &pages);
        assert_eq!(g.cache["l0"], None);
        assert_eq!(g.cache["l1"], None);
        assert_eq!(g.cache["la"], Some(1));
    }

    #[test]
    fn sleep_ticks() {
        let sys = system(CostModel::ValueMod(4));
        let g = config(&[], &[]);
        let t = &steps(&sys, "sleep(3)", &g)[0];
        assert_eq!((t.dt, &t.next), (1, &Next::Continue(Process::Sleep(2))));
        let t = &steps(&sys, "sleep(1)", &g)[0];
        assert_eq!((t.dt, &t.next), (1, &Next::Done));
        let t = &steps(&sys, "sleep(0)", &g)[0];
        assert_eq!((t.dt, &t.next), (0, &Next::Done));
    }

    #[test]
    fn recv_blocks_on_empty_line() {
        let sys = system(CostModel::ValueMod(4));
        assert!(steps(&sys, "a ? x", &config(&[("x", 0)], &[("la", None)])).is_empty());
        let t = steps(&sys, "a ? x", &config(&[("x", 0)], &[("la", Some(4))]));
        assert_eq!(t[0].effects, vec![Effect::SetVar("x".into(), 4)]);
    }

    #[test]
    fn send_costs_depend_on_value() {
        let sys = system(CostModel::ValueMod(4));
        let g = config(&[("x", 2)], &[("la", None)]);
        let t = &steps(&sys, "a ! x", &g)[0];
        assert_eq!(t.dt, 3);
        assert_eq!(t.effects, vec![Effect::SetLine("la".into(), Some(2))]);
    }

    #[test]
    fn timed_comm_success_and_failure() {
        let g = config(&[("w", 9), ("x", 0)], &[("la", Some(1))]);
        let node = parse_process("within 5 { a ! w -> a ? x } then { skip }").unwrap();
        let ok = step_timed_comm(&system(CostModel::Constant(2)), &g, &node, 0);
        assert_eq!(ok.dt, 5);
        assert_eq!(ok.next, Next::Continue(Process::Skip));
        assert_eq!(
            ok.effects,
            vec![Effect::SetVar("x".into(), 9), Effect::SetLine("la".into(), None)]
        );
        for cost in [7, 5] {
            let bad = step_timed_comm(&system(CostModel::Constant(cost)), &g, &node, 0);
            assert_eq!(bad.dt, 5);
            assert_eq!(bad.next, Next::Continue(Process::Stop));
            assert!(bad.effects.is_empty());
        }
    }

    #[test]
    fn loop_unfolds_to_branch() {
        let sys = system(CostModel::ValueMod(4));
        let g = config(&[("x", 0)], &[]);
        let t = &steps(&sys, "while x < 1 { x := x + 1 }", &g)[0];
        assert_eq!(t.event.kind, EventKind::LoopUnfold);
        let expected = parse_process("if x < 1 { x := x + 1; while x < 1 { x := x + 1 } } else { skip }").unwrap();
        assert_eq!(t.next, Next::Continue(expected));
    }

    #[test]
    fn division_by_zero_faults() {
        let sys = system(CostModel::ValueMod(4));
        let t = &steps(&sys, "x := 1 / x", &config(&[("x", 0)], &[]))[0];
        assert!(matches!(t.next, Next::Fault(_)));
    }
}
