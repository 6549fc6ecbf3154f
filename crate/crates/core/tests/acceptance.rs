//! Acceptance criteria. Runs without the test harness so that the PASS/FAIL
//! line of every criterion is always printed; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seccloud::cli::run_with_args;
use seccloud::config::{CostModel, Mode, SchedulerPolicy};
use seccloud::flowcheck::{
    check_cache_flow_secure, check_semantic_security, soundness_harness, HarnessConfig, InputSpace,
    Observer, ProgramGen, SemanticCheck, Status, Verdict, Violation,
};
use seccloud::model::Model;
use seccloud::semantics::{enumerate_runs, run, Inputs, Outcome, System};
use seccloud::syntax::{normalize, parse_model, parse_process, HostTerm, Hosted, Network, Process, VmTerm};
use seccloud::typesystem::{base_counter, typecheck_network};

type Criterion = Result<String, String>;

/// Hosts, their instances and each instance's parallel operands.
type Shape<'a> = Vec<(String, Vec<(String, Vec<&'a str>)>)>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_path(name: &str) -> String {
    corpus_dir().join(name).to_string_lossy().into_owned()
}

fn corpus(name: &str) -> Model {
    parse_model(&std::fs::read_to_string(corpus_path(name)).unwrap()).unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cache_flow(m: &Model) -> Verdict {
    let sys = System::from_model(m);
    let obs = m.obs();
    let space = InputSpace::from_model(m, obs.level);
    check_cache_flow_secure(&sys, &m.lattice, &obs, m.config.mode, m.config.symmetric_equiv, &space)
}

fn semantic(m: &Model, instance: &str) -> Verdict {
    let sys = System::from_model(m);
    let c = sys.components.iter().position(|c| c.instance == instance).unwrap();
    let comp = &sys.components[c];
    let counter = base_counter(&m.lattice, &m.env, &comp.instance, &comp.host);
    let space = InputSpace::from_model(m, m.obs().level);
    check_semantic_security(
        &SemanticCheck {
            sys: &sys,
            lattice: &m.lattice,
            component: c,
            env_before: &m.env,
            env_after: m.signature_or_initial(),
            counter: &counter,
            atoms: &m.atoms,
            symmetric: false,
        },
        &space,
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with_args(std::iter::once("seccloud").chain(args.iter().copied()), &mut out, &mut err);
    (code, out)
}

fn criterion_1() -> Criterion {
    let start = Instant::now();
    let m = corpus("example1.scl");
    ensure(m.config.fuel <= 200, "fuel above 200")?;
    ensure(m.config.costs.comm == CostModel::ValueMod(4), "cost model is not valuemod:4")?;
    ensure(m.config.keys == vec![0, 1, 2, 3], "key domain is not {0,1,2,3}")?;
    ensure(m.config.mode == Mode::Weak, "mode is not weak")?;
    ensure(m.obs() == seccloud::lattice::LevelTriple::new(m.lattice.bottom(), m.atoms.clone(), m.atoms.clone()), "obs is not (L, full, full)")?;
    let (code, _) = cli(&["check", &corpus_path("example1.scl")]);
    ensure(code == 2, format!("check exited {code}"))?;
    let v = cache_flow(&m);
    let w = v.witness().ok_or("no witness")?;
    ensure(
        w.runs[0].total_time != w.runs[1].total_time,
        format!("witness total times equal: {:?}", w.violation),
    )?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("exit 2, witness totals {} vs {}, {t:.2?}", w.runs[0].total_time, w.runs[1].total_time))
}

fn criterion_2() -> Criterion {
    let start = Instant::now();
    let m = corpus("example3.scl");
    let sys = System::from_model(&m);
    let obs = m.obs();
    let space = InputSpace::from_model(&m, obs.level);
    let inputs = space.enumerate().map_err(|e| e.to_string())?;
    let observer = Observer {
        lattice: &m.lattice,
        env: &m.env,
        obs: &obs,
        symmetric: false,
    };
    // Independent pass: every pair of runs from low-equivalent initial states
    // must have the same total time.
    let sets: Vec<_> = inputs
        .iter()
        .map(|i| enumerate_runs(&sys, i).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let mut pairs = 0usize;
    for c in 0..sys.components.len() {
        let runs: Vec<_> = sets.iter().map(|s| s.component_runs(c)).collect();
        for (a, ia) in inputs.iter().enumerate() {
            for (b, ib) in inputs.iter().enumerate() {
                let (ga, gb) = (sys.initial_config(c, ia), sys.initial_config(c, ib));
                if !observer.equiv(&ga, &gb) {
                    continue;
                }
                for ra in &runs[a] {
                    for rb in &runs[b] {
                        pairs += 1;
                        ensure(
                            ra.total_time == rb.total_time,
                            format!("total times {} vs {}", ra.total_time, rb.total_time),
                        )?;
                    }
                }
            }
        }
    }
    ensure(pairs > 0, "no pairs compared")?;
    let v = cache_flow(&m);
    ensure(v.status == Status::Insecure, format!("status {}", v.status.as_str()))?;
    ensure(v.stats.timing_mismatches == 0, "checker found a timing mismatch")?;
    let w = v.witness().ok_or("no witness")?;
    match &w.violation {
        Violation::Config { differing, .. } if differing.iter().any(|d| d == "z") => {}
        other => return Err(format!("witness does not involve z: {other:?}")),
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("{pairs} run pairs with equal totals, config witness on z, {t:.2?}"))
}

fn criterion_3() -> Criterion {
    let m = corpus("example2.scl");
    let errs = match typecheck_network(&m, false) {
        Ok(_) => return Err("typecheck accepted".into()),
        Err(e) => e.errors,
    };
    let e = errs
        .iter()
        .find(|e| e.idents.iter().any(|i| i == "y"))
        .ok_or("no diagnostic names y")?;
    ensure(e.rule == "TBRANCH", format!("rule {}", e.rule))?;
    ensure(e.expected.as_deref() == Some("L"), format!("expected {:?}", e.expected))?;
    let v = semantic(&m, "vm1");
    ensure(v.status == Status::Insecure, format!("oracle says {}", v.status.as_str()))?;
    let w = v.witness().ok_or("no witness")?;
    // x receives the secret from the password line, so its value after the
    // receive is what separates the two runs.
    let mut xs: Vec<i64> = w.runs.iter().map(|r| r.final_config.store["x"]).collect();
    xs.sort();
    ensure(xs == vec![0, 1], format!("witness x values {xs:?}"))?;
    Ok(format!("{} at {}, oracle witness x ∈ {{0,1}}", e.rule, e.path))
}

fn criterion_4() -> Criterion {
    let mut m = corpus("example4.scl");
    let errs = match typecheck_network(&m, false) {
        Ok(_) => return Err("typecheck accepted".into()),
        Err(e) => e.errors,
    };
    let r = errs
        .iter()
        .find(|e| e.component.as_deref() == Some("h1:i2"))
        .ok_or("no error for R")?;
    ensure(
        r.idents.iter().any(|i| i == "z") && r.expected.as_deref() == Some("L") && r.actual.as_deref() == Some("H"),
        format!("R error: {r}"),
    )?;
    ensure(m.config.costs.comm == CostModel::Constant(6), "corpus cost is not constant:6")?;
    let secure = semantic(&m, "i2").status;
    ensure(secure == Status::Secure, format!("constant:6 gives {}", secure.as_str()))?;
    m.config.costs.comm = CostModel::Constant(2);
    let insecure = semantic(&m, "i2").status;
    ensure(insecure == Status::Insecure, format!("constant:2 gives {}", insecure.as_str()))?;
    Ok("R rejected (z: H vs L); secure at constant:6, insecure at constant:2".into())
}

fn harness() -> &'static (seccloud::flowcheck::HarnessReport, Duration) {
    static REPORT: std::sync::OnceLock<(seccloud::flowcheck::HarnessReport, Duration)> = std::sync::OnceLock::new();
    REPORT.get_or_init(|| {
        let start = Instant::now();
        let r = soundness_harness(&HarnessConfig {
            programs: 500,
            ..HarnessConfig::default()
        });
        (r, start.elapsed())
    })
}

fn criterion_5() -> Criterion {
    let (r, t) = harness();
    ensure(r.programs >= 500, format!("only {} programs", r.programs))?;
    ensure(r.accepted > 0, "no program accepted")?;
    ensure(
        r.soundness_failures.is_empty(),
        format!("{} accepted programs found insecure", r.soundness_failures.len()),
    )?;
    ensure(r.timed_failures.is_empty(), format!("{} timed failures", r.timed_failures.len()))?;
    ensure(*t < Duration::from_secs(300), format!("took {t:?}"))?;
    Ok(format!(
        "{} programs, {} accepted ({} secure, {} undecided), 0 failures, {t:.2?}",
        r.programs, r.accepted, r.accepted_secure, r.accepted_bound_exceeded
    ))
}

fn criterion_6() -> Criterion {
    let mut gen = ProgramGen::new(11, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    for index in 0..400 {
        let mut m = parse_model(&gen.model(index)).unwrap();
        let covers = m.lattice.covers();
        let mut e2 = m.env.clone();
        for l in e2.var_labels.values_mut().chain(e2.line_labels.values_mut()) {
            if rng.random_bool(0.5) {
                if let Some((_, up)) = covers.iter().find(|(a, _)| a == l) {
                    *l = *up;
                }
            }
        }
        ensure(m.env.leq(&e2, &m.lattice) == Ok(true), "raised env is not above")?;
        let t1 = typecheck_network(&m, true);
        m.env = e2;
        let t2 = typecheck_network(&m, true);
        if let (Ok(t1), Ok(t2)) = (t1, t2) {
            cases += 1;
            ensure(
                t1.env_after.leq(&t2.env_after, &m.lattice) == Ok(true),
                format!("not monotone on program {index}"),
            )?;
        }
    }
    ensure(cases >= 200, format!("only {cases} cases"))?;
    Ok(format!("{cases} comparable cases, 0 failures"))
}

fn criterion_7() -> Criterion {
    let (r, _) = harness();
    ensure(r.loops_checked > 0, "no loops checked")?;
    ensure(
        r.fixpoint_bound_failures.is_empty(),
        format!("{} loops exceeded the bound", r.fixpoint_bound_failures.len()),
    )?;
    Ok(format!(
        "{} loops, at most {} iterations, within (vars+lines)·height+1",
        r.loops_checked, r.max_loop_iterations
    ))
}

fn associate<T>(mut items: Vec<T>, rng: &mut ChaCha8Rng, par: &dyn Fn(T, T) -> T) -> T {
    items.shuffle(rng);
    while items.len() > 1 {
        let k = rng.random_range(0..items.len() - 1);
        let b = items.remove(k + 1);
        let a = items.remove(k);
        items.insert(k, par(a, b));
    }
    items.pop().unwrap()
}

fn criterion_8() -> Criterion {
    let bodies = ["skip", "x := 1", "sleep(1); stop", "ch ! 2", "while x < 1 { x := x + 1 }"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..1000 {
        let hosts: Shape = (0..rng.random_range(1..=3))
            .map(|h| {
                let vms = (0..rng.random_range(1..=3))
                    .map(|i| {
                        let ops = (0..rng.random_range(1..=3))
                            .map(|_| bodies[rng.random_range(0..bodies.len())])
                            .collect();
                        (format!("i{h}_{i}"), ops)
                    })
                    .collect();
                (format!("h{h}"), vms)
            })
            .collect();
        let build = |rng: &mut ChaCha8Rng| {
            let hs = hosts
                .iter()
                .map(|(h, vms)| {
                    let vs = vms
                        .iter()
                        .map(|(i, ops)| {
                            let ps = ops.iter().map(|s| parse_process(s).unwrap()).collect();
                            Hosted::Vm(VmTerm {
                                id: i.clone(),
                                pages: Default::default(),
                                body: associate(ps, rng, &Process::par),
                            })
                        })
                        .collect();
                    Network::Host(HostTerm {
                        id: h.clone(),
                        body: Some(associate(vs, rng, &Hosted::par)),
                    })
                })
                .collect();
            associate(hs, rng, &Network::par)
        };
        let a = normalize(&build(&mut rng));
        let b = normalize(&build(&mut rng));
        ensure(a == b, format!("case {case}: canonical forms differ"))?;
    }
    let mut files = 0;
    for entry in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_none_or(|e| e != "scl") {
            continue;
        }
        let m = parse_model(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let once = normalize(&m.network);
        let twice = normalize(&Network::from_components(&once).ok_or("empty network")?);
        ensure(once == twice, format!("{} not idempotent", p.display()))?;
        files += 1;
    }
    Ok(format!("1000 reassociations agree, idempotent on {files} corpus files"))
}

fn model_system(src: &str) -> (System, Inputs) {
    let m = parse_model(src).unwrap();
    (System::from_model(&m), Inputs::declared(&m))
}

fn criterion_9() -> Criterion {
    let (sys, inp) = model_system("var x, y : L; host h { vm i pages {} { (x := 1 || y := 2); skip } }");
    let rs = enumerate_runs(&sys, &inp).map_err(|e| e.to_string())?;
    ensure(rs.len() == 2, format!("par gives {} vectors", rs.len()))?;
    let finals: Vec<_> = rs.vectors().map(|v| v[0].final_config.store.clone()).collect();
    ensure(finals.windows(2).all(|w| w[0] == w[1]), "final stores differ")?;

    let (sys, inp) = model_system(
        "var x, y : L; host h { vm i pages {} { x := 1; x := 2 } || vm j pages {} { y := 1; y := 2 } }",
    );
    let rs = enumerate_runs(&sys, &inp).map_err(|e| e.to_string())?;
    ensure(rs.interleavings() == 6, format!("{} interleavings", rs.interleavings()))?;

    let (sys, inp) = model_system("host h { vm i pages {} { sleep(3) } }");
    let total = run(&sys, &inp, SchedulerPolicy::RoundRobin)[0].total_time;
    ensure(total == 3, format!("sleep(3) took {total}"))?;

    let (sys, inp) = model_system(
        "var x : L; line p1, p2 : L = 5; line c : L owner i; channel a -> c;
         host h { vm i pages {p1, p2} { a ! 1; stop } || vm j pages {} { a ? x } }",
    );
    let rs = enumerate_runs(&sys, &inp).map_err(|e| e.to_string())?;
    for v in rs.vectors() {
        let r = &v[0];
        ensure(r.outcome == Outcome::Terminated, "stop did not terminate")?;
        ensure(
            r.final_config.cache["p1"].is_none() && r.final_config.cache["p2"].is_none(),
            "owned page not flushed",
        )?;
    }
    Ok(format!("2 vectors, 6 interleavings, 3 ticks, flush in all {} runs", rs.len()))
}

fn criterion_10() -> Criterion {
    let mut n = 0;
    let mut names: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scl"))
        .collect();
    names.sort();
    for p in names {
        let path = p.to_string_lossy();
        let (_, first) = cli(&["check", &path]);
        let (_, second) = cli(&["check", &path]);
        ensure(first == second, format!("{path}: two runs differ"))?;
        let golden = std::fs::read(p.with_extension("golden")).map_err(|e| format!("{path}: {e}"))?;
        ensure(first == golden, format!("{path}: differs from golden file"))?;
        n += 1;
    }
    Ok(format!("{n} corpus reports stable and match golden files"))
}

fn main() {
    #[allow(clippy::type_complexity)]
    let criteria: [(&str, fn() -> Criterion); 10] = [
        ("Example 1 timing leak", criterion_1),
        ("timedComm rewrite", criterion_2),
        ("Example 2 implicit flow", criterion_3),
        ("Example 4 communication outcome", criterion_4),
        ("soundness harness", criterion_5),
        ("monotonicity", criterion_6),
        ("fixpoint bound", criterion_7),
        ("structural equivalence", criterion_8),
        ("semantics micro-oracles", criterion_9),
        ("determinism and golden files", criterion_10),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {:>2}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                println!("criterion {:>2}: FAIL  {name}: {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
