use std::collections::BTreeMap;

use thiserror::Error;

use super::{Cache, Store};
use crate::hash::fnv1a32;
use crate::syntax::{ArithOp, BoolExpr, CmpOp, Expr, Intrinsic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("channel `{0}` has no cache line")]
    UnknownChannel(String),
    #[error("channel `{0}` used as a value")]
    ChannelValue(String),
}

/// Evaluation environment: store, visible cache, channel map, and the key
/// `keyGen()` yields.
pub(crate) struct EvalCtx<'a> {
    pub store: &'a Store,
    pub cache: &'a Cache,
    pub channels: &'a BTreeMap<String, String>,
    pub key: i64,
}

fn message_value(m: i64) -> u32 {
    fnv1a32(&m.to_le_bytes())
}

pub fn eval_expr(
    store: &Store,
    cache: &Cache,
    channels: &BTreeMap<String, String>,
    key: i64,
    e: &Expr,
) -> Result<i64, EvalError> {
    EvalCtx {
        store,
        cache,
        channels,
        key,
    }
    .expr(e)
}

pub fn eval_bool(
    store: &Store,
    cache: &Cache,
    channels: &BTreeMap<String, String>,
    key: i64,
    b: &BoolExpr,
) -> Result<bool, EvalError> {
    EvalCtx {
        store,
        cache,
        channels,
        key,
    }
    .boolean(b)
}

impl EvalCtx<'_> {
    pub(crate) fn expr(&self, e: &Expr) -> Result<i64, EvalError> {
        Ok(match e {
            Expr::Int(n) => *n,
            Expr::Str(s) => i64::from(fnv1a32(s.as_bytes())),
            Expr::Var(x) => *self
                .store
                .get(x)
                .ok_or_else(|| EvalError::Unbound(x.clone()))?,
            Expr::Chan(c) => return Err(EvalError::ChannelValue(c.clone())),
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                match op {
                    ArithOp::Add => a.wrapping_add(b),
                    ArithOp::Sub => a.wrapping_sub(b),
                    ArithOp::Mul => a.wrapping_mul(b),
                    ArithOp::Div => {
                        if b == 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.wrapping_div(b)
                    }
                }
            }
            Expr::Call(f, args) => match f {
                Intrinsic::KeyGen => self.key,
                Intrinsic::Encrypt => {
                    let k = self.expr(&args[0])?;
                    let m = self.expr(&args[1])?;
                    k ^ i64::from(message_value(m))
                }
                Intrinsic::Decrypt => self.expr(&args[0])? ^ self.expr(&args[1])?,
                Intrinsic::Read => {
                    let chan = match &args[0] {
                        Expr::Chan(c) | Expr::Var(c) => c,
                        other => return Err(EvalError::ChannelValue(other.to_string())),
                    };
                    let line = self
                        .channels
                        .get(chan)
                        .ok_or_else(|| EvalError::UnknownChannel(chan.clone()))?;
                    match self.cache.get(line) {
                        Some(Some(_)) => 1,
                        _ => -1,
                    }
                }
            },
        })
    }

    pub(crate) fn boolean(&self, b: &BoolExpr) -> Result<bool, EvalError> {
        Ok(match b {
            BoolExpr::True => true,
            BoolExpr::Not(b) => !self.boolean(b)?,
            BoolExpr::And(a, b) => self.boolean(a)? && self.boolean(b)?,
            BoolExpr::Cmp(op, a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                match op {
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Eq => a == b,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_process;
    use crate::syntax::Process;

    fn guard(src: &str) -> BoolExpr {
        match parse_process(&format!("if {src} {{ skip }} else {{ skip }}")).unwrap() {
            Process::Branch { guard, .. } => guard,
            _ => unreachable!(),
        }
    }

    fn value(src: &str) -> Expr {
        match parse_process(&format!("r := {src}")).unwrap() {
            Process::Assign(_, e) => e,
            _ => unreachable!(),
        }
    }

    fn store(pairs: &[(&str, i64)]) -> Store {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn arithmetic() {
        let s = store(&[("x", 3)]);
        let none = BTreeMap::new();
        let ev = |src: &str| eval_expr(&s, &Cache::new(), &none, 0, &value(src));
        assert_eq!(ev("x + 2"), Ok(5));
        assert_eq!(ev("7"), Ok(7));
        assert_eq!(ev("-7 / 2"), Ok(-3));
        assert_eq!(ev("x / (x - 3)"), Err(EvalError::DivisionByZero));
        assert_eq!(ev("y"), Err(EvalError::Unbound("y".into())));
    }

    #[test]
    fn parity_guard() {
        let none = BTreeMap::new();
        let g = guard("x - (x / 2) * 2 == 1");
        for (x, odd) in [(3, true), (4, false), (0, false), (1, true)] {
            let s = store(&[("x", x)]);
            assert_eq!(eval_bool(&s, &Cache::new(), &none, 0, &g), Ok(odd));
        }
        let s = store(&[]);
        assert_eq!(eval_bool(&s, &Cache::new(), &none, 0, &guard("false")), Ok(false));
        assert_eq!(
            eval_bool(&s, &Cache::new(), &none, 0, &guard("1 < 2 && !(2 <= 1)")),
            Ok(true)
        );
    }

    #[test]
    fn intrinsics() {
        let chans: BTreeMap<String, String> = [("key".to_string(), "lk".to_string())].into();
        let mut cache = Cache::new();
        cache.insert("lk".into(), None);
        let s = store(&[("k", 6), ("m", 77)]);
        let read = Expr::Call(Intrinsic::Read, vec![Expr::Chan("key".into())]);
        assert_eq!(eval_expr(&s, &cache, &chans, 0, &read), Ok(-1));
        cache.insert("lk".into(), Some(0));
        assert_eq!(eval_expr(&s, &cache, &chans, 0, &read), Ok(1));
        assert_eq!(eval_expr(&s, &cache, &chans, 9, &value("keyGen()")), Ok(9));
        let c = eval_expr(&s, &cache, &chans, 0, &value("encrypt(k, m)")).unwrap();
        assert_eq!(c, 6 ^ i64::from(fnv1a32(&77i64.to_le_bytes())));
        let s2 = store(&[("k", 6), ("c", c)]);
        assert_eq!(
            eval_expr(&s2, &cache, &chans, 0, &value("decrypt(k, c)")),
            Ok(i64::from(fnv1a32(&77i64.to_le_bytes())))
        );
        assert_eq!(
            eval_expr(&s, &cache, &chans, 0, &value("\"message\"")),
            Ok(i64::from(fnv1a32(b"message")))
        );
    }
}
