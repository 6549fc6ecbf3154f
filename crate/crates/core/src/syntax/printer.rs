//! Canonical concrete syntax. Output of every printer here parses back to an equal
//! term.

use std::fmt::{self, Write as _};

use super::ast::*;
use crate::model::Model;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

fn write_expr(f: &mut dyn fmt::Write, e: &Expr, min_prec: u8) -> fmt::Result {
    match e {
        Expr::Var(x) | Expr::Chan(x) => f.write_str(x),
        Expr::Int(n) => write!(f, "{n}"),
        Expr::Str(s) => write!(f, "\"{s}\""),
        Expr::Call(fun, args) => {
            write!(f, "{}(", fun.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_expr(f, a, 0)?;
            }
            f.write_str(")")
        }
        Expr::Bin(op, a, b) => {
            let p = op.precedence();
            let paren = p < min_prec;
            if paren {
                f.write_str("(")?;
            }
            write_expr(f, a, p)?;
            write!(f, " {} ", op.symbol())?;
            // Operators are left-associative: a right operand of equal precedence
            // needs parentheses.
            write_expr(f, b, p + 1)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bool(f, self, false)
    }
}

fn write_bool(f: &mut dyn fmt::Write, b: &BoolExpr, atomic: bool) -> fmt::Result {
    match b {
        BoolExpr::True => f.write_str("true"),
        BoolExpr::Not(inner) if **inner == BoolExpr::True => f.write_str("false"),
        BoolExpr::Not(inner) => {
            f.write_str("!")?;
            write_bool(f, inner, true)
        }
        BoolExpr::And(a, c) => {
            if atomic {
                f.write_str("(")?;
            }
            write_bool(f, a, false)?;
            f.write_str(" && ")?;
            write_bool(f, c, true)?;
            if atomic {
                f.write_str(")")?;
            }
            Ok(())
        }
        BoolExpr::Cmp(op, x, y) => {
            if atomic {
                f.write_str("(")?;
            }
            write_expr(f, x, 0)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, y, 0)?;
            if atomic {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_process(f, self, Ctx::Top)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    ParRight,
    SeqLeft,
    SeqRight,
}

fn write_process(f: &mut dyn fmt::Write, p: &Process, ctx: Ctx) -> fmt::Result {
    match p {
        Process::Assign(x, e) => write!(f, "{x} := {e}"),
        Process::Stop => f.write_str("stop"),
        Process::Skip => f.write_str("skip"),
        Process::Sleep(n) => write!(f, "sleep({n})"),
        Process::MoveProcess(i) => write!(f, "moveP({i})"),
        Process::MoveInstance(h) => write!(f, "moveI({h})"),
        Process::Send(a, e) => write!(f, "{a} ! {e}"),
        Process::Recv(a, x) => write!(f, "{a} ? {x}"),
        Process::Seq(a, b) => {
            let paren = ctx == Ctx::SeqLeft;
            if paren {
                f.write_str("(")?;
            }
            write_process(f, a, Ctx::SeqLeft)?;
            f.write_str("; ")?;
            write_process(f, b, Ctx::SeqRight)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Process::Par(a, b) => {
            let paren = ctx != Ctx::Top;
            if paren {
                f.write_str("(")?;
            }
            write_process(f, a, Ctx::Top)?;
            f.write_str(" || ")?;
            write_process(f, b, Ctx::ParRight)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Process::Branch {
            guard,
            then_branch,
            else_branch,
        } => write!(f, "if {guard} {{ {then_branch} }} else {{ {else_branch} }}"),
        Process::Loop { guard, body } => write!(f, "while {guard} {{ {body} }}"),
        Process::TimedComm {
            deadline,
            chan,
            value,
            var,
            cont,
        } => {
            write!(f, "within {deadline} {{ {chan} ! {value} -> {chan} ? {var} }}")?;
            if **cont != Process::Skip {
                write!(f, " then {{ {cont} }}")?;
            }
            Ok(())
        }
    }
}

/// Renders timed communications in their expanded deadline-padded form
/// `sleep(T - t) -> P <| (t := dt(a!w || a?x) < T) |> stop`. Not parseable.
pub fn render_desugared(p: &Process) -> String {
    match p {
        Process::TimedComm {
            deadline,
            chan,
            value,
            var,
            cont,
        } => format!(
            "sleep({deadline} - t) -> {{ {} }} <| (t := dt({chan} ! {value} || {chan} ? {var}) < {deadline}) |> stop",
            render_desugared(cont)
        ),
        Process::Seq(a, b) => format!("{}; {}", wrap_seq_left(a), render_desugared(b)),
        Process::Par(a, b) => format!("({} || {})", render_desugared(a), render_desugared(b)),
        Process::Branch {
            guard,
            then_branch,
            else_branch,
        } => format!(
            "if {guard} {{ {} }} else {{ {} }}",
            render_desugared(then_branch),
            render_desugared(else_branch)
        ),
        Process::Loop { guard, body } => {
            format!("while {guard} {{ {} }}", render_desugared(body))
        }
        other => other.to_string(),
    }
}

fn wrap_seq_left(p: &Process) -> String {
    match p {
        Process::Seq(..) => format!("({})", render_desugared(p)),
        _ => render_desugared(p),
    }
}

/// Prints a network in model-file syntax (hosts and instances only).
pub fn pretty_print(n: &Network) -> String {
    let mut out = String::new();
    for (k, h) in n.hosts().into_iter().enumerate() {
        if k > 0 {
            out.push_str("||\n");
        }
        print_host(&mut out, h, None, &|_| None);
    }
    out
}

fn print_host(
    out: &mut String,
    h: &HostTerm,
    cat: Option<String>,
    vm_cat: &dyn Fn(&str) -> Option<String>,
) {
    let cat = cat.map(|c| format!(" category {c}")).unwrap_or_default();
    let _ = writeln!(out, "host {}{cat} {{", h.id);
    for (k, vm) in h.body.iter().flat_map(|b| b.vms()).enumerate() {
        if k > 0 {
            out.push_str("  ||\n");
        }
        print_vm(out, vm, vm_cat(&vm.id));
    }
    out.push_str("}\n");
}

fn print_vm(out: &mut String, vm: &VmTerm, cat: Option<String>) {
    let cat = cat.map(|c| format!(" category {c}")).unwrap_or_default();
    let pages: Vec<&str> = vm.pages.iter().map(String::as_str).collect();
    let _ = writeln!(
        out,
        "  vm {}{cat} pages {{{}}} {{\n    {}\n  }}",
        vm.id,
        pages.join(", "),
        vm.body
    );
}

/// Prints a complete model, including declarations and analysis settings.
pub fn print_model(m: &Model) -> String {
    let mut out = String::new();
    let lat = &m.lattice;
    let _ = write!(out, "lattice {{");
    for l in lat.labels() {
        let _ = write!(out, " {};", lat.name(l));
    }
    for (a, b) in lat.covers() {
        let _ = write!(out, " {} < {};", lat.name(a), lat.name(b));
    }
    out.push_str(" }\n");
    if !m.atoms.is_empty() {
        let atoms: Vec<&str> = m.atoms.atoms().collect();
        let _ = writeln!(out, "atoms {{ {} }}", atoms.join(", "));
    }
    for (x, l) in &m.env.var_labels {
        let init = m.var_init.get(x).copied().unwrap_or(0);
        let _ = writeln!(out, "var {x} : {} = {init};", lat.name(*l));
    }
    for (l, lab) in &m.env.line_labels {
        let _ = write!(out, "line {l} : {}", lat.name(*lab));
        if let Some(o) = m.env.line_owner.get(l) {
            let _ = write!(out, " owner {o}");
        }
        if let Some(Some(v)) = m.cache_init.get(l) {
            let _ = write!(out, " = {v}");
        }
        out.push_str(";\n");
    }
    for (c, l) in &m.channels {
        let _ = writeln!(out, "channel {c} -> {l};");
    }
    for (k, h) in m.network.hosts().into_iter().enumerate() {
        if k > 0 {
            out.push_str("||\n");
        }
        print_host(
            &mut out,
            h,
            m.env.host_cat.get(&h.id).map(|c| c.to_string()),
            &|i| m.env.inst_cat.get(i).map(|c| c.to_string()),
        );
    }
    if let Some(sig) = &m.signature {
        out.push_str("final {\n");
        for (x, l) in &sig.var_labels {
            let _ = writeln!(out, "  {x} : {};", lat.name(*l));
        }
        for (x, l) in &sig.line_labels {
            let _ = writeln!(out, "  line {x} : {};", lat.name(*l));
        }
        out.push_str("}\n");
    }
    let c = &m.config;
    out.push_str("config {\n");
    let _ = writeln!(out, "  mode {};", c.mode);
    if let Some(obs) = &c.obs {
        let _ = writeln!(
            out,
            "  obs {} {} {};",
            lat.name(obs.level),
            obs.inst_cat,
            obs.host_cat
        );
    }
    let (kind, n) = match c.costs.comm {
        crate::config::CostModel::Constant(n) => ("constant", n),
        crate::config::CostModel::ValueMod(k) => ("valuemod", k),
    };
    let _ = writeln!(out, "  cost {kind} {n};");
    let _ = writeln!(out, "  recv_cost {};", c.costs.recv);
    let _ = writeln!(out, "  fuel {};", c.fuel);
    let _ = writeln!(out, "  max_runs {};", c.max_runs);
    let _ = writeln!(out, "  scheduler {};", c.scheduler);
    for (id, vals) in &c.domains {
        let vals: Vec<String> = vals.iter().map(i64::to_string).collect();
        let _ = match id {
            crate::config::InputId::Var(x) => writeln!(out, "  domain {x} = {};", vals.join(", ")),
            crate::config::InputId::Line(l) => {
                writeln!(out, "  domain line {l} = {};", vals.join(", "))
            }
        };
    }
    let keys: Vec<String> = c.keys.iter().map(i64::to_string).collect();
    let _ = writeln!(out, "  keys {};", keys.join(", "));
    if c.permissive_tstop {
        out.push_str("  permissive_tstop;\n");
    }
    if c.symmetric_equiv {
        out.push_str("  symmetric_equiv;\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_process;
    use super::*;

    fn round_trip(src: &str) {
        let p = parse_process(src).unwrap();
        let printed = p.to_string();
        let q = parse_process(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(p, q, "{printed}");
    }

    #[test]
    fn process_round_trips() {
        round_trip("x := 1 - (2 - 3) * -4 / y; skip");
        round_trip("(skip; b := 1); c := 2");
        round_trip("(p := 1 || q := 2) || r := 3");
        round_trip("p := 1 || (q := 2 || r := 3)");
        round_trip("if !(x > 1) && true { stop } else { sleep(3) }");
        round_trip("while (x + 1) * 2 > 0 && !false { x := x - 1 }");
        round_trip("within 5 { key ! x -> key ? y } then { m := encrypt(y, \"message\") }");
        round_trip("z := read(key); moveP(i2); moveI(h2)");
        round_trip("(a ! 1; b ? x) || c := 0");
    }

    #[test]
    fn arithmetic_parenthesisation() {
        let p = parse_process("x := (1 + 2) * 3 - (4 - 5)").unwrap();
        assert_eq!(p.to_string(), "x := (1 + 2) * 3 - (4 - 5)");
        let p = parse_process("x := 1 + 2 * 3").unwrap();
        assert_eq!(p.to_string(), "x := 1 + 2 * 3");
    }

    #[test]
    fn desugared_form() {
        let p = parse_process("within 5 { key ! x -> key ? y }").unwrap();
        assert_eq!(
            render_desugared(&p),
            "sleep(5 - t) -> { skip } <| (t := dt(key ! x || key ? y) < 5) |> stop"
        );
    }
}
