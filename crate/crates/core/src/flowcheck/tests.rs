use std::collections::BTreeMap;

use super::*;
use crate::config::CostModel;
use crate::lattice::Category;
use crate::model::Model;
use crate::semantics::{enumerate_runs, Outcome, System, TimedStep};
use crate::syntax::parse_model;
use crate::typesystem::base_counter;

fn corpus(name: &str) -> Model {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn chain_lh() -> Lattice {
    Lattice::chain(&["L", "H"]).unwrap()
}

fn env_xy(lat: &Lattice) -> SecEnv {
    let mut e = SecEnv::default();
    e.var_labels.insert("x".into(), lat.label("H").unwrap());
    e.var_labels.insert("y".into(), lat.label("L").unwrap());
    e.line_labels.insert("l".into(), lat.label("L").unwrap());
    e.inst_cat.insert("i".into(), ["t"].into_iter().collect());
    e.host_cat.insert("h".into(), ["v"].into_iter().collect());
    e
}

fn cfg(x: i64, y: i64, l: Option<i64>) -> Configuration {
    Configuration {
        store: [("x".to_string(), x), ("y".to_string(), y)].into(),
        cache: [("l".to_string(), l)].into(),
        owner: "i".into(),
        host: "h".into(),
    }
}

fn obs_at(lat: &Lattice, level: &str) -> ObservationLevel {
    LevelTriple::new(
        lat.label(level).unwrap(),
        ["t"].into_iter().collect(),
        ["v"].into_iter().collect(),
    )
}

#[test]
fn config_equivalence_examples() {
    let lat = chain_lh();
    let env = env_xy(&lat);
    let low = obs_at(&lat, "L");
    let g = cfg(1, 2, Some(3));
    assert!(config_equiv(&g, &g, &lat, &env, &low));
    assert!(config_equiv(&g, &cfg(7, 2, Some(3)), &lat, &env, &low));
    assert!(!config_equiv(&g, &cfg(1, 5, Some(3)), &lat, &env, &low));
    assert!(!config_equiv(&g, &cfg(1, 2, None), &lat, &env, &low));
    // Categories the observer cannot see hide the data clauses.
    let blind = LevelTriple::new(lat.bottom(), Category::empty(), Category::empty());
    assert!(config_equiv(&g, &cfg(1, 5, None), &lat, &env, &blind));
}

#[test]
fn top_observer_sees_everything() {
    let lat = chain_lh();
    let env = env_xy(&lat);
    let top = obs_at(&lat, "H");
    assert!(!config_equiv(&cfg(1, 2, None), &cfg(0, 2, None), &lat, &env, &top));
    assert!(config_equiv(&cfg(1, 2, None), &cfg(1, 2, None), &lat, &env, &top));
}

#[test]
fn category_clauses_are_one_directional() {
    let lat = chain_lh();
    let mut env = env_xy(&lat);
    env.inst_cat.insert("j".into(), ["t", "u"].into_iter().collect());
    let obs = LevelTriple::new(lat.bottom(), ["t", "u"].into_iter().collect(), ["v"].into_iter().collect());
    let g1 = cfg(0, 0, None);
    let mut g2 = g1.clone();
    g2.owner = "j".into();
    let o = |symmetric| Observer {
        lattice: &lat,
        env: &env,
        obs: &obs,
        symmetric,
    };
    assert!(o(false).equiv(&g1, &g2));
    assert!(!o(false).equiv(&g2, &g1));
    assert!(!o(true).equiv(&g1, &g2));
    assert_eq!(o(false).diff(&g2, &g1), vec!["owner".to_string()]);
}

fn run_of(configs: &[Configuration], dts: &[u64]) -> TimedRun {
    let steps: Vec<TimedStep> = configs[..dts.len()]
        .iter()
        .zip(dts)
        .map(|(g, &dt)| TimedStep {
            config: g.clone(),
            event: crate::semantics::Event {
                kind: crate::semantics::EventKind::Skip,
                subject: "skip".into(),
                channel: None,
            },
            dt,
        })
        .collect();
    TimedRun {
        component: "h:i".into(),
        steps,
        final_config: configs[dts.len()].clone(),
        outcome: Outcome::Terminated,
        total_time: dts.iter().sum(),
    }
}

#[test]
fn bisimulation_examples() {
    let lat = chain_lh();
    let env = env_xy(&lat);
    let low = obs_at(&lat, "L");
    let gs = [cfg(0, 0, None), cfg(1, 0, None), cfg(2, 0, None)];
    let r = run_of(&gs, &[1, 2]);
    assert!(strong_bisimilar(&r, &r, &lat, &env, &low).holds());
    assert!(weak_bisimilar(&r, &r, &lat, &env, &low));

    let slower = run_of(&gs, &[1, 3]);
    assert_eq!(
        strong_bisimilar(&r, &slower, &lat, &env, &low),
        Bisim::Differ(Violation::Duration {
            index: 1,
            durations: [2, 3]
        })
    );
    assert!(!weak_bisimilar(&r, &slower, &lat, &env, &low));

    // Only H data differs.
    let hs = [cfg(5, 0, None), cfg(6, 0, None), cfg(7, 0, None)];
    assert!(strong_bisimilar(&r, &run_of(&hs, &[1, 2]), &lat, &env, &low).holds());

    let shorter = run_of(&gs[..2], &[3]);
    assert_eq!(
        strong_bisimilar(&r, &shorter, &lat, &env, &low),
        Bisim::NotComparable { lengths: [2, 1] }
    );
    assert!(weak_bisimilar(&r, &shorter, &lat, &env, &low));

    let totals = run_of(&gs, &[3, 4]);
    let other = run_of(&gs, &[4, 5]);
    assert!(!weak_bisimilar(&totals, &other, &lat, &env, &low));
}

#[test]
fn permuted_independent_steps_are_weakly_bisimilar() {
    let m = parse_model(
        "var a, b : L; host h { vm i pages {} { skip; ((a := 1; sleep(1)) || (b := 2; sleep(1))) } }",
    )
    .unwrap();
    let sys = System::from_model(&m);
    let set = enumerate_runs(&sys, &crate::semantics::Inputs::declared(&m)).unwrap();
    let runs = set.component_runs(0);
    assert!(runs.len() > 1);
    let obs = m.obs();
    for r1 in &runs {
        for r2 in &runs {
            assert!(weak_bisimilar(r1, r2, &m.lattice, &m.env, &obs));
        }
    }
}

#[test]
fn input_space_enumeration() {
    let m = corpus("example2.scl");
    let space = InputSpace::from_model(&m, m.lattice.bottom());
    assert_eq!(space.vars["x"], vec![0, 1]);
    assert_eq!(space.vars["y"], vec![0]);
    assert_eq!(space.lines["l_pwd"], vec![Some(0), Some(1)]);
    let all = space.enumerate().unwrap();
    assert_eq!(all.len(), 4);
    assert_eq!(all.len(), space.size());
    assert_eq!(all[1].lines["l_pwd"], Some(1));
    let mut empty = space.clone();
    empty.keys.clear();
    assert!(empty.enumerate().is_err());
}

#[test]
fn low_only_network_is_secure() {
    let m = parse_model(
        "var a : L; line l : L owner i; channel c -> l; \
         host h { vm i pages {} { a := 1; c ! a; stop } || vm j pages {} { skip } } \
         config { keys 0, 1; }",
    )
    .unwrap();
    let sys = System::from_model(&m);
    let space = InputSpace::from_model(&m, m.lattice.bottom());
    for mode in [Mode::Weak, Mode::Strong] {
        let v = check_cache_flow_secure(&sys, &m.lattice, &m.obs(), mode, false, &space);
        assert_eq!(v.status, Status::Secure, "{v:?}");
        assert!(v.witness().is_none());
    }
}

#[test]
fn example1_leaks_key_timing() {
    let m = corpus("example1.scl");
    let sys = System::from_model(&m);
    let space = InputSpace::from_model(&m, m.obs().level);
    let v = check_cache_flow_secure(&sys, &m.lattice, &m.obs(), Mode::Weak, false, &space);
    assert_eq!(v.status, Status::Insecure);
    let w = v.witness().unwrap();
    assert!(matches!(w.violation, Violation::Timing { .. }), "{:?}", w.violation);
    assert_ne!(w.runs[0].total_time, w.runs[1].total_time);
    assert_ne!(w.inputs[0].key, w.inputs[1].key);
    assert!(replay_cache_flow_witness(&sys, &m.lattice, Mode::Weak, false, w));
}

#[test]
fn timed_rewrite_closes_timing_but_not_config() {
    let m = corpus("example3.scl");
    let sys = System::from_model(&m);
    let space = InputSpace::from_model(&m, m.obs().level);
    let v = check_cache_flow_secure(&sys, &m.lattice, &m.obs(), Mode::Weak, false, &space);
    assert_eq!(v.status, Status::Insecure);
    assert_eq!(v.stats.timing_mismatches, 0);
    assert!(v.stats.pairs_compared > 0);
    let w = v.witness().unwrap();
    match &w.violation {
        Violation::Config { differing, .. } => assert!(differing.contains(&"z".to_string())),
        other => panic!("unexpected {other:?}"),
    }
    assert!(replay_cache_flow_witness(&sys, &m.lattice, Mode::Weak, false, w));
}

fn semantic(m: &Model, instance: &str) -> Verdict {
    let sys = System::from_model(m);
    let c = sys
        .components
        .iter()
        .position(|c| c.instance == instance)
        .unwrap();
    let comp = &sys.components[c];
    let counter = base_counter(&m.lattice, &m.env, &comp.instance, &comp.host);
    let space = InputSpace::from_model(m, m.obs().level);
    let chk = SemanticCheck {
        sys: &sys,
        lattice: &m.lattice,
        component: c,
        env_before: &m.env,
        env_after: m.signature_or_initial(),
        counter: &counter,
        atoms: &m.atoms,
        symmetric: false,
    };
    let v = check_semantic_security(&chk, &space);
    if let Some(w) = v.witness() {
        assert!(replay_semantic_witness(&chk, w));
    }
    v
}

#[test]
fn example2_implicit_flow_is_insecure() {
    let m = corpus("example2.scl");
    let v = semantic(&m, "vm1");
    assert_eq!(v.status, Status::Insecure);
    let w = v.witness().unwrap();
    assert_eq!(w.component, "h1:vm1");
    let xs: Vec<i64> = w.runs.iter().map(|r| r.final_config.store["x"]).collect();
    let ys: Vec<i64> = w.runs.iter().map(|r| r.final_config.store["y"]).collect();
    assert_eq!(xs, vec![0, 1]);
    assert_ne!(ys[0], ys[1]);
}

#[test]
fn example4_depends_on_communication_outcome() {
    let mut m = corpus("example4.scl");
    assert_eq!(semantic(&m, "i2").status, Status::Secure);
    m.config.costs.comm = CostModel::Constant(2);
    let v = semantic(&m, "i2");
    assert_eq!(v.status, Status::Insecure);
    match &v.witness().unwrap().violation {
        Violation::Config { differing, .. } => assert_eq!(differing, &vec!["z".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn constant_program_satisfies_condition() {
    let m = parse_model("var x : L; host h { vm i pages {} { x := 0 } }").unwrap();
    assert_eq!(semantic(&m, "i").status, Status::Secure);
}

#[test]
fn clause_one_flags_writes_below_counter() {
    let m = parse_model("lattice { L < H; } var x : L; var h : H; host h1 { vm i pages {} { x := 0 } }").unwrap();
    let sys = System::from_model(&m);
    let counter = LevelTriple::new(m.lattice.top(), Category::empty(), Category::empty());
    let space = InputSpace {
        vars: BTreeMap::from([("x".to_string(), vec![1])]),
        lines: BTreeMap::new(),
        keys: vec![0],
    };
    let chk = SemanticCheck {
        sys: &sys,
        lattice: &m.lattice,
        component: 0,
        env_before: &m.env,
        env_after: &m.env,
        counter: &counter,
        atoms: &m.atoms,
        symmetric: false,
    };
    let v = check_semantic_security(&chk, &space);
    assert_eq!(v.status, Status::Insecure);
    assert_eq!(
        v.witness().unwrap().violation,
        Violation::Changed { ident: "x".into() }
    );
    assert!(replay_semantic_witness(&chk, v.witness().unwrap()));
}

#[test]
fn nonterminating_component_exceeds_bound() {
    let m = parse_model("var x : L; host h { vm i pages {} { while true { x := 1 } } }").unwrap();
    assert_eq!(semantic(&m, "i").status, Status::BoundExceeded);
}

#[test]
fn small_harness_run_is_clean() {
    let report = soundness_harness(&HarnessConfig {
        programs: 40,
        seed: 7,
        timed_models: 10,
        ..HarnessConfig::default()
    });
    assert!(report.programs > 0);
    assert!(report.accepted > 0 && report.rejected > 0, "{report:?}");
    assert!(report.passed(), "{report:#?}");
}
