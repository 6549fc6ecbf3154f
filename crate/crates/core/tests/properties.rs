//! Property tests for the lattice, normalization, printing, typing and the
//! bisimulation checks.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seccloud::config::SchedulerPolicy;
use seccloud::flowcheck::{InputSpace, Observer, ProgramGen};
use seccloud::lattice::{Category, Lattice, LevelTriple, SecEnv};
use seccloud::model::Model;
use seccloud::semantics::{run, System, TimedRun};
use seccloud::syntax::{normalize, parse_model, parse_process, print_model, Hosted, HostTerm, Network, VmTerm};
use seccloud::typesystem::typecheck_network;

fn diamond() -> Lattice {
    Lattice::from_hasse(
        &["L", "A", "B", "H"],
        &[("L", "A"), ("L", "B"), ("A", "H"), ("B", "H")],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn join_is_least_upper_bound(a in 0usize..4, b in 0usize..4) {
        let lat = diamond();
        let labels: Vec<_> = lat.labels().collect();
        let (a, b) = (labels[a], labels[b]);
        let j = lat.join(a, b);
        prop_assert!(lat.leq(a, j) && lat.leq(b, j));
        prop_assert_eq!(j, lat.join(b, a));
        for &u in &labels {
            if lat.leq(a, u) && lat.leq(b, u) {
                prop_assert!(lat.leq(j, u));
            }
        }
    }
}

// Normalization.

const BODIES: [&str; 5] = ["skip", "x := 1", "sleep(2); stop", "while x < 2 { x := x + 1 }", "ch ! x"];

/// A network given by hosts, their instances and each instance's parallel operands.
type Shape = Vec<(String, Vec<(String, Vec<String>)>)>;

fn shape(rng: &mut ChaCha8Rng) -> Shape {
    let hosts = rng.random_range(1..=3);
    let mut inst = 0;
    (0..hosts)
        .map(|h| {
            let vms = (0..rng.random_range(1..=3))
                .map(|_| {
                    inst += 1;
                    let ops = (0..rng.random_range(1..=3))
                        .map(|_| BODIES[rng.random_range(0..BODIES.len())].to_string())
                        .collect();
                    (format!("i{inst}"), ops)
                })
                .collect();
            (format!("h{h}"), vms)
        })
        .collect()
}

/// Folds `items` into a random binary tree after shuffling them.
fn associate<T>(mut items: Vec<T>, rng: &mut ChaCha8Rng, par: &dyn Fn(T, T) -> T) -> T {
    items.shuffle(rng);
    fn go<T>(mut items: Vec<T>, rng: &mut ChaCha8Rng, par: &dyn Fn(T, T) -> T) -> T {
        if items.len() == 1 {
            return items.pop().unwrap();
        }
        let cut = rng.random_range(1..items.len());
        let right = items.split_off(cut);
        par(go(items, rng, par), go(right, rng, par))
    }
    go(items, rng, par)
}

fn build(shape: &Shape, rng: &mut ChaCha8Rng) -> Network {
    let hosts = shape
        .iter()
        .map(|(h, vms)| {
            let vms = vms
                .iter()
                .map(|(i, ops)| {
                    let ops = ops.iter().map(|s| parse_process(s).unwrap()).collect();
                    Hosted::Vm(VmTerm {
                        id: i.clone(),
                        pages: Default::default(),
                        body: associate(ops, rng, &seccloud::syntax::Process::par),
                    })
                })
                .collect();
            Network::Host(HostTerm {
                id: h.clone(),
                body: Some(associate(vms, rng, &Hosted::par)),
            })
        })
        .collect();
    associate(hosts, rng, &Network::par)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn normalize_ignores_parallel_structure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = shape(&mut rng);
        let a = normalize(&build(&s, &mut rng));
        let b = normalize(&build(&s, &mut rng));
        prop_assert_eq!(&a, &b);
        let rebuilt = Network::from_components(&a).unwrap();
        prop_assert_eq!(normalize(&rebuilt), a);
    }
}

// Printing.

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn printed_models_parse_back(seed in any::<u64>(), index in 0usize..2) {
        let src = ProgramGen::new(seed, 3).model(index);
        let m = parse_model(&src).unwrap();
        let printed = print_model(&m);
        let back = parse_model(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(print_model(&back), printed);
    }
}

// Typing.

/// Raises a random subset of variable and line labels by one covering step.
fn raise(model: &Model, rng: &mut ChaCha8Rng) -> SecEnv {
    let lat = &model.lattice;
    let up = |l| {
        let covers = lat.covers();
        let ups: Vec<_> = covers.iter().filter(|(a, _)| *a == l).map(|(_, b)| *b).collect();
        ups.first().copied().unwrap_or(l)
    };
    let mut env = model.env.clone();
    for l in env.var_labels.values_mut().chain(env.line_labels.values_mut()) {
        if rng.random_bool(0.4) {
            *l = up(*l);
        }
    }
    env
}

#[test]
fn typing_is_monotone_in_the_environment() {
    let mut gen = ProgramGen::new(7, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for index in 0..1000 {
        let mut m = parse_model(&gen.model(index)).unwrap();
        let e2 = raise(&m, &mut rng);
        assert!(m.env.leq(&e2, &m.lattice).unwrap());
        let t1 = typecheck_network(&m, true);
        m.env = e2;
        let t2 = typecheck_network(&m, true);
        if let (Ok(t1), Ok(t2)) = (t1, t2) {
            compared += 1;
            assert!(
                t1.env_after.leq(&t2.env_after, &m.lattice).unwrap(),
                "model {index}:\n{}",
                print_model(&m)
            );
        }
    }
    eprintln!("monotonicity: {compared} comparable cases");
    assert!(compared >= 200, "only {compared} comparable cases");
}

// Bisimulation.

fn sample_runs(seed: u64) -> (Model, Vec<TimedRun>) {
    let src = ProgramGen::new(seed, 2).model(seed as usize);
    let m = parse_model(&src).unwrap();
    let sys = System::from_model(&m);
    let inputs = InputSpace::from_model(&m, m.lattice.bottom()).enumerate().unwrap();
    let runs = inputs
        .iter()
        .take(8)
        .flat_map(|i| run(&sys, i, SchedulerPolicy::RoundRobin))
        .collect();
    (m, runs)
}

fn obs_from(m: &Model, level: usize, mask: u8) -> LevelTriple {
    let labels: Vec<_> = m.lattice.labels().collect();
    let atoms: Vec<&str> = m.atoms.atoms().collect();
    let pick = |bit: u8| -> Category {
        atoms
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (bit << (2 * k)) != 0)
            .map(|(_, a)| *a)
            .collect()
    };
    LevelTriple::new(labels[level % labels.len()], pick(1), pick(2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn strong_bisimilarity_implies_weak(seed in 0u64..10_000, symmetric in any::<bool>()) {
        let (m, runs) = sample_runs(seed);
        let obs = m.obs();
        let o = Observer { lattice: &m.lattice, env: &m.env, obs: &obs, symmetric };
        for r1 in &runs {
            for r2 in &runs {
                if o.strong(r1, r2).holds() {
                    prop_assert!(o.weak(r1, r2).holds());
                }
            }
        }
    }

    #[test]
    fn stronger_observers_see_more(seed in 0u64..10_000, lo in 0usize..3, extra in 0usize..3, m1 in 0u8..16, m2 in 0u8..16) {
        let (m, runs) = sample_runs(seed);
        let low = obs_from(&m, lo, m1);
        let mut high = obs_from(&m, lo + extra, m1 | m2);
        // Keep the level comparable on the chain.
        if !m.lattice.leq(low.level, high.level) {
            high.level = low.level;
        }
        prop_assert!(low.leq(&high, &m.lattice));
        let weak = Observer { lattice: &m.lattice, env: &m.env, obs: &low, symmetric: false };
        let strong = Observer { lattice: &m.lattice, env: &m.env, obs: &high, symmetric: false };
        for r1 in &runs {
            for r2 in &runs {
                let (a, b) = (&r1.final_config, &r2.final_config);
                let seen_low = weak.diff(a, b);
                let seen_high = strong.diff(a, b);
                prop_assert!(seen_low.iter().all(|d| seen_high.contains(d)), "{seen_low:?} vs {seen_high:?}");
                if strong.weak(r1, r2).holds() {
                    prop_assert!(weak.weak(r1, r2).holds());
                }
            }
        }
    }
}
