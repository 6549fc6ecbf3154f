//! Command line front end: argument parsing, overrides, dispatch and exit codes.

mod report;

use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use report::{render_json, render_pretty, ConfigView, EnvView, Record, RunSummary, FORMAT, VERSION};

use crate::config::{CostModel, InputId, Mode, SchedulerPolicy};
use crate::flowcheck::{check_cache_flow_secure, soundness_harness, HarnessConfig, InputSpace, Status};
use crate::lattice::{Category, LevelTriple};
use crate::model::Model;
use crate::semantics::{enumerate_runs, run, Inputs, System};
use crate::syntax::parse_model;
use crate::typesystem::typecheck_network;

pub const EXIT_SECURE: i32 = 0;
pub const EXIT_TYPE_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_MALFORMED: i32 = 64;
pub const EXIT_UNREADABLE: i32 = 66;

#[derive(Debug, Parser)]
#[command(name = "seccloud", version, about = "Cache flow security analysis for cloud process models")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Shorthand for `--format pretty`.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Pretty,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Typecheck, then decide the cache flow policy.
    Check {
        model: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Typecheck every component and report the final environments.
    Typecheck {
        model: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Include the derivation tree.
        #[arg(long)]
        derivation: bool,
    },
    /// Execute once from the declared initial state under the configured scheduler.
    Run {
        model: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Value returned by keyGen().
        #[arg(long, allow_negative_numbers = true)]
        key: Option<i64>,
    },
    /// List every distinct run vector from the declared initial state.
    Enumerate {
        model: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, allow_negative_numbers = true)]
        key: Option<i64>,
    },
    /// Cross-check the type system against the semantic oracle on random programs.
    Soundness {
        #[arg(long, default_value_t = 500)]
        programs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 60)]
        fuel: u32,
        #[arg(long, default_value_t = 100)]
        timed_models: usize,
    },
}

/// Settings that replace the model's `config` block.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Observation triple `LEVEL,CAT,CAT`; a category is `full`, `none` or `{a,b}`.
    #[arg(long)]
    pub obs: Option<String>,
    /// `constant:N` or `valuemod:K`.
    #[arg(long)]
    pub cost: Option<CostModel>,
    /// Ticks charged for a bare receive.
    #[arg(long)]
    pub recv_cost: Option<u64>,
    #[arg(long)]
    pub fuel: Option<u32>,
    /// `x=0,1` for a variable or `line:l=0,1` for a cache line. Repeatable.
    #[arg(long = "domain")]
    pub domains: Vec<String>,
    /// Values keyGen() may return, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub keys: Option<Vec<i64>>,
    #[arg(long)]
    pub scheduler: Option<SchedulerPolicy>,
    #[arg(long)]
    pub max_runs: Option<usize>,
    #[arg(long)]
    pub permissive_tstop: bool,
    #[arg(long)]
    pub symmetric_equiv: bool,
}

/// Splits on commas outside braces.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn parse_category(s: &str, model: &Model) -> Result<Category, String> {
    match s {
        "full" => return Ok(model.atoms.clone()),
        "none" => return Ok(Category::empty()),
        _ => {}
    }
    let inner = s
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| format!("bad category `{s}` (expected full, none or {{a,b}})"))?;
    let mut atoms = Vec::new();
    for a in inner.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        if !model.atoms.contains(a) {
            return Err(format!("unknown category atom `{a}`"));
        }
        atoms.push(a.to_string());
    }
    Ok(atoms.into_iter().collect())
}

pub fn parse_obs(s: &str, model: &Model) -> Result<LevelTriple, String> {
    let parts = split_top_level(s);
    let [level, inst, host] = parts.as_slice() else {
        return Err(format!("bad observation `{s}` (expected LEVEL,CAT,CAT)"));
    };
    let level = model
        .lattice
        .label(level)
        .ok_or_else(|| format!("unknown label `{level}`"))?;
    Ok(LevelTriple::new(
        level,
        parse_category(inst, model)?,
        parse_category(host, model)?,
    ))
}

fn parse_domain(s: &str, model: &Model) -> Result<(InputId, Vec<i64>), String> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| format!("bad domain `{s}` (expected NAME=V,V or line:NAME=V,V)"))?;
    let name = name.trim();
    let id = match name.strip_prefix("line:") {
        Some(l) if model.env.line_labels.contains_key(l.trim()) => InputId::Line(l.trim().into()),
        Some(l) => return Err(format!("unknown line `{}`", l.trim())),
        None if model.env.var_labels.contains_key(name) => InputId::Var(name.into()),
        None => return Err(format!("unknown variable `{name}`")),
    };
    let vals = values
        .split(',')
        .map(|v| v.trim().parse::<i64>().map_err(|_| format!("bad domain value `{}`", v.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.is_empty() {
        return Err(format!("empty domain for {id}"));
    }
    Ok((id, vals))
}

/// Applies overrides to the model's analysis settings.
pub fn apply_overrides(model: &mut Model, o: &Overrides) -> Result<(), String> {
    if let Some(s) = &o.obs {
        model.config.obs = Some(parse_obs(s, model)?);
    }
    for d in &o.domains {
        let (id, vals) = parse_domain(d, model)?;
        model.config.domains.insert(id, vals);
    }
    let cfg = &mut model.config;
    if let Some(m) = o.mode {
        cfg.mode = m;
    }
    if let Some(c) = o.cost {
        cfg.costs.comm = c;
    }
    if let Some(r) = o.recv_cost {
        cfg.costs.recv = r;
    }
    if let Some(f) = o.fuel {
        cfg.fuel = f;
    }
    if let Some(k) = &o.keys {
        if k.is_empty() {
            return Err("empty key domain".into());
        }
        cfg.keys = k.clone();
    }
    if let Some(s) = o.scheduler {
        cfg.scheduler = s;
    }
    if let Some(n) = o.max_runs {
        cfg.max_runs = n;
    }
    cfg.permissive_tstop |= o.permissive_tstop;
    cfg.symmetric_equiv |= o.symmetric_equiv;
    Ok(())
}

fn exit_record(code: i32) -> Record {
    let reason = match code {
        EXIT_SECURE => "ok",
        EXIT_TYPE_ERROR => "type error",
        EXIT_VIOLATION => "policy violation",
        EXIT_BOUND => "bound exceeded",
        EXIT_UNREADABLE => "unreadable input",
        _ => "malformed input",
    };
    Record::Exit { code, reason }
}

fn error_record(kind: &str, message: impl Into<String>) -> Record {
    Record::Error {
        kind: kind.into(),
        line: 0,
        col: 0,
        message: message.into(),
    }
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Secure => EXIT_SECURE,
        Status::Insecure => EXIT_VIOLATION,
        Status::BoundExceeded => EXIT_BOUND,
    }
}

/// Reads, parses and configures a model, or returns the records and exit code
/// explaining why it could not be.
fn load(path: &str, o: &Overrides, records: &mut Vec<Record>) -> Result<Model, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            records.push(error_record("io", format!("{path}: {e}")));
            return Err(EXIT_UNREADABLE);
        }
    };
    let mut model = match parse_model(&text) {
        Ok(m) => m,
        Err(e) => {
            records.push(Record::Error {
                kind: e.kind.as_str().into(),
                line: e.line,
                col: e.col,
                message: e.message,
            });
            return Err(EXIT_MALFORMED);
        }
    };
    if let Err(e) = apply_overrides(&mut model, o) {
        records.push(error_record("invalid option", e));
        return Err(EXIT_MALFORMED);
    }
    let obs = model.obs().render(&model.lattice);
    records.push(Record::Config(ConfigView::new(&model.config, obs)));
    Ok(model)
}

/// Typechecks the network, pushing one record per component or per error.
fn typecheck_records(model: &Model, derivation: bool, records: &mut Vec<Record>) -> bool {
    match typecheck_network(model, model.config.permissive_tstop) {
        Ok(nt) => {
            for c in &nt.components {
                records.push(Record::Component {
                    component: c.component.label(),
                    counter: c.counter.render(&model.lattice),
                    status: "well-typed",
                    max_loop_iterations: c.typing.derivation.loop_iterations().into_iter().max().unwrap_or(0),
                    env_after: EnvView::new(&c.typing.env_after, &model.lattice),
                    derivation: derivation.then(|| c.typing.derivation.clone()),
                });
            }
            true
        }
        Err(e) => {
            records.extend(e.errors.into_iter().map(Record::TypeError));
            false
        }
    }
}

fn declared_inputs(model: &Model, key: Option<i64>) -> Inputs {
    let mut inputs = Inputs::declared(model);
    if let Some(k) = key {
        inputs.key = k;
    }
    inputs
}

fn model_name(path: &str) -> String {
    Path::new(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Runs one parsed command and returns its records and exit code.
pub fn execute(command: &Command) -> (Vec<Record>, i32) {
    let mut records = Vec::new();
    let (name, path) = match command {
        Command::Check { model, .. } => ("check", Some(model)),
        Command::Typecheck { model, .. } => ("typecheck", Some(model)),
        Command::Run { model, .. } => ("run", Some(model)),
        Command::Enumerate { model, .. } => ("enumerate", Some(model)),
        Command::Soundness { .. } => ("soundness", None),
    };
    records.push(Record::Header {
        format: FORMAT,
        version: VERSION,
        command: name.into(),
        model: path.map(|p| model_name(p)).unwrap_or_default(),
    });
    let code = dispatch(command, &mut records);
    records.push(exit_record(code));
    (records, code)
}

fn dispatch(command: &Command, records: &mut Vec<Record>) -> i32 {
    match command {
        Command::Check { model, overrides } => {
            let m = match load(model, overrides, records) {
                Ok(m) => m,
                Err(code) => return code,
            };
            if !typecheck_records(&m, false, records) {
                return EXIT_TYPE_ERROR;
            }
            let sys = System::from_model(&m);
            let obs = m.obs();
            let space = InputSpace::from_model(&m, obs.level);
            let v = check_cache_flow_secure(
                &sys,
                &m.lattice,
                &obs,
                m.config.mode,
                m.config.symmetric_equiv,
                &space,
            );
            let code = status_code(v.status);
            records.push(Record::Verdict(v));
            code
        }
        Command::Typecheck {
            model,
            overrides,
            derivation,
        } => {
            let m = match load(model, overrides, records) {
                Ok(m) => m,
                Err(code) => return code,
            };
            if typecheck_records(&m, *derivation, records) {
                EXIT_SECURE
            } else {
                EXIT_TYPE_ERROR
            }
        }
        Command::Run { model, overrides, key } => {
            let m = match load(model, overrides, records) {
                Ok(m) => m,
                Err(code) => return code,
            };
            let sys = System::from_model(&m);
            let runs = run(&sys, &declared_inputs(&m, *key), m.config.scheduler);
            for r in runs {
                for (index, s) in r.steps.iter().enumerate() {
                    records.push(Record::Step {
                        component: r.component.clone(),
                        index,
                        event: s.event.clone(),
                        dt: s.dt,
                        config: s.config.clone(),
                    });
                }
                records.push(Record::RunEnd {
                    component: r.component,
                    outcome: r.outcome,
                    total_time: r.total_time,
                    final_config: r.final_config,
                });
            }
            EXIT_SECURE
        }
        Command::Enumerate { model, overrides, key } => {
            let m = match load(model, overrides, records) {
                Ok(m) => m,
                Err(code) => return code,
            };
            let sys = System::from_model(&m);
            let inputs = declared_inputs(&m, *key);
            match enumerate_runs(&sys, &inputs) {
                Ok(set) => {
                    for (index, v) in set.vectors().enumerate() {
                        records.push(Record::Vector {
                            index,
                            runs: v.iter().map(RunSummary::new).collect(),
                        });
                    }
                    records.push(Record::RunSet {
                        inputs,
                        vectors: set.len(),
                        interleavings: set.interleavings(),
                    });
                    EXIT_SECURE
                }
                Err(e) => {
                    records.push(error_record("bound", e.to_string()));
                    EXIT_BOUND
                }
            }
        }
        Command::Soundness {
            programs,
            seed,
            depth,
            fuel,
            timed_models,
        } => {
            let report = soundness_harness(&HarnessConfig {
                programs: *programs,
                seed: *seed,
                max_depth: *depth,
                fuel: *fuel,
                timed_models: *timed_models,
            });
            let code = if report.passed() { EXIT_SECURE } else { EXIT_VIOLATION };
            records.push(Record::Soundness(report));
            code
        }
    }
}

/// Parses `args` (program name first), runs the command and writes the report.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if benign { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if benign { EXIT_SECURE } else { EXIT_MALFORMED };
        }
    };
    let (records, code) = execute(&cli.command);
    let text = if cli.pretty || cli.format == Format::Pretty {
        render_pretty(&records)
    } else {
        render_json(&records)
    };
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
    code
}

pub fn run_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
