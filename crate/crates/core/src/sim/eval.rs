//! Expression evaluation over finite models.
//!
//! Type sets such as `NAT`, `POW(S)` or `A --> B` are never materialised:
//! they are only usable on the right of a membership test.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::parser::pretty_expr;

use super::value::Value;
use super::{ChannelKey, Counters};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot evaluate `{expr}`: {message}")]
pub struct EvalError {
    pub expr: String,
    pub message: String,
}

impl EvalError {
    fn new(e: &Expr, message: impl Into<String>) -> Self {
        EvalError {
            expr: pretty_expr(e),
            message: message.into(),
        }
    }
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Read-only view of everything an expression may refer to.
pub struct Env<'a> {
    /// Constants, carrier sets, class sets and process names.
    pub globals: &'a BTreeMap<Ident, Value>,
    /// Machine variables: each a map from process to value.
    pub vars: &'a BTreeMap<Ident, Value>,
    pub channels: &'a BTreeMap<ChannelKey, Counters>,
    /// Names of enumerated elements and states, for context expressions
    /// that were never enum-resolved.
    pub atoms: &'a BTreeMap<Ident, Value>,
    /// Event parameters and binders, innermost last.
    pub locals: Vec<(Ident, Value)>,
}

impl<'a> Env<'a> {
    pub fn with_local(&mut self, name: &Ident, v: Value) {
        self.locals.push((name.clone(), v));
    }

    fn lookup(&self, name: &Ident) -> Option<Value> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Some(v.clone());
        }
        self.vars
            .get(name)
            .or_else(|| self.globals.get(name))
            .or_else(|| self.atoms.get(name))
            .cloned()
    }

    pub fn eval_bool(&mut self, e: &Expr) -> EvalResult<bool> {
        self.eval(e)?
            .as_bool()
            .ok_or_else(|| EvalError::new(e, "expected a predicate"))
    }

    fn eval_int(&mut self, e: &Expr) -> EvalResult<i64> {
        self.eval(e)?
            .as_int()
            .ok_or_else(|| EvalError::new(e, "expected an integer"))
    }

    /// Evaluates `e` to a finite set of elements.
    pub fn eval_set(&mut self, e: &Expr) -> EvalResult<BTreeSet<Value>> {
        let v = self.eval(e)?;
        v.elements()
            .ok_or_else(|| EvalError::new(e, format!("expected a set, found {v}")))
    }

    fn eval_map(&mut self, e: &Expr) -> EvalResult<BTreeMap<Value, Value>> {
        let v = self.eval(e)?;
        v.as_map()
            .ok_or_else(|| EvalError::new(e, format!("expected a function, found {v}")))
    }

    pub fn eval(&mut self, e: &Expr) -> EvalResult<Value> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(v) => self
                .lookup(v)
                .ok_or_else(|| EvalError::new(e, "unbound identifier")),
            Expr::EnumElem { set, elem } if set == "States" => Ok(Value::StateName(elem.clone())),
            Expr::EnumElem { set, elem } => Ok(Value::Enum(set.clone(), elem.clone())),
            Expr::Apply(f, arg) => {
                let a = self.eval(arg)?;
                let m = self.eval_map(f)?;
                m.get(&a)
                    .cloned()
                    .ok_or_else(|| EvalError::new(e, format!("{a} is outside the domain")))
            }
            Expr::Maplet(a, b) => Ok(Value::pair(self.eval(a)?, self.eval(b)?)),
            Expr::Not(a) => Ok(Value::Bool(!self.eval_bool(a)?)),
            Expr::Binary(op, l, r) => self.binary(e, *op, l, r),
            Expr::SetExt(items) => {
                let vals = items
                    .iter()
                    .map(|x| self.eval(x))
                    .collect::<EvalResult<Vec<_>>>()?;
                Ok(Value::set(vals))
            }
            Expr::SetComprehension {
                binder,
                domain,
                filter,
                body,
            } => {
                let dom = self.eval_set(domain)?;
                let mut out = Vec::new();
                for x in dom {
                    self.with_local(binder, x);
                    let keep = match filter {
                        Some(f) => self.eval_bool(f),
                        None => Ok(true),
                    };
                    let item = match keep {
                        Ok(true) => self.eval(body).map(Some),
                        Ok(false) => Ok(None),
                        Err(err) => Err(err),
                    };
                    self.locals.pop();
                    if let Some(v) = item? {
                        out.push(v);
                    }
                }
                Ok(Value::set(out))
            }
            Expr::Quantifier {
                kind,
                binders,
                body,
            } => Ok(Value::Bool(self.quantify(*kind, binders, body)?)),
            Expr::Interval(lo, hi) => {
                let (lo, hi) = (self.eval_int(lo)?, self.eval_int(hi)?);
                Ok(Value::set((lo..=hi).map(Value::Int)))
            }
            Expr::Card(a) => Ok(Value::Int(self.eval_set(a)?.len() as i64)),
            Expr::ChannelCall {
                kind,
                src,
                dst,
                msg,
            } => {
                let key = ChannelKey {
                    src: self.eval(src)?,
                    dst: self.eval(dst)?,
                    msg: self.eval(msg)?,
                };
                let c = self.channels.get(&key).copied().unwrap_or_default();
                match kind {
                    ChannelKind::Sent => Ok(Value::Int(c.sent)),
                    ChannelKind::Received => Ok(Value::Int(c.received)),
                    ChannelKind::InChannel => Ok(Value::Int(c.in_channel)),
                    other => Err(EvalError::new(
                        e,
                        format!("`{}` is an action, not a value", other.name()),
                    )),
                }
            }
            Expr::FuncOverride(a, b) => {
                let mut m = self.eval_map(a)?;
                m.extend(self.eval_map(b)?);
                Ok(Value::map(m))
            }
            Expr::Partition { set, blocks } => {
                let whole = self.eval_set(set)?;
                let mut seen = BTreeSet::new();
                for b in blocks {
                    for x in self.eval_set(b)? {
                        if !seen.insert(x) {
                            return Ok(Value::Bool(false));
                        }
                    }
                }
                Ok(Value::Bool(seen == whole))
            }
            Expr::PowerSet(_) | Expr::Builtin(_) => Err(EvalError::new(
                e,
                "infinite or type-level set used as a value",
            )),
        }
    }

    fn quantify(
        &mut self,
        kind: QuantKind,
        binders: &[(Ident, Expr)],
        body: &Expr,
    ) -> EvalResult<bool> {
        let Some(((name, dom), rest)) = binders.split_first() else {
            return self.eval_bool(body);
        };
        let dom = self.eval_set(dom)?;
        for x in dom {
            self.with_local(name, x);
            let r = self.quantify(kind, rest, body);
            self.locals.pop();
            match (kind, r?) {
                (QuantKind::Forall, false) => return Ok(false),
                (QuantKind::Exists, true) => return Ok(true),
                _ => {}
            }
        }
        Ok(kind == QuantKind::Forall)
    }

    fn binary(&mut self, e: &Expr, op: BinOp, l: &Expr, r: &Expr) -> EvalResult<Value> {
        use BinOp::*;
        let int_op = |f: fn(i64, i64) -> Option<i64>, a: i64, b: i64| {
            f(a, b)
                .map(Value::Int)
                .ok_or_else(|| EvalError::new(e, "arithmetic overflow or division by zero"))
        };
        match op {
            And => Ok(Value::Bool(self.eval_bool(l)? && self.eval_bool(r)?)),
            Or => Ok(Value::Bool(self.eval_bool(l)? || self.eval_bool(r)?)),
            Implies => Ok(Value::Bool(!self.eval_bool(l)? || self.eval_bool(r)?)),
            In | NotIn => {
                let v = self.eval(l)?;
                Ok(Value::Bool(self.member(&v, r)? == (op == In)))
            }
            Eq => Ok(Value::Bool(self.eval(l)? == self.eval(r)?)),
            Neq => Ok(Value::Bool(self.eval(l)? != self.eval(r)?)),
            Add => int_op(i64::checked_add, self.eval_int(l)?, self.eval_int(r)?),
            Sub => int_op(i64::checked_sub, self.eval_int(l)?, self.eval_int(r)?),
            Mul => int_op(i64::checked_mul, self.eval_int(l)?, self.eval_int(r)?),
            Div => int_op(i64::checked_div, self.eval_int(l)?, self.eval_int(r)?),
            Lt => Ok(Value::Bool(self.eval_int(l)? < self.eval_int(r)?)),
            Le => Ok(Value::Bool(self.eval_int(l)? <= self.eval_int(r)?)),
            Gt => Ok(Value::Bool(self.eval_int(l)? > self.eval_int(r)?)),
            Ge => Ok(Value::Bool(self.eval_int(l)? >= self.eval_int(r)?)),
            Subset => {
                let a = self.eval_set(l)?;
                let mut ok = true;
                for x in &a {
                    if !self.member(x, r)? {
                        ok = false;
                        break;
                    }
                }
                Ok(Value::Bool(ok))
            }
            Union => {
                let mut a = self.eval_set(l)?;
                a.extend(self.eval_set(r)?);
                Ok(Value::set(a))
            }
            Inter => {
                let a = self.eval_set(l)?;
                let b = self.eval_set(r)?;
                Ok(Value::set(a.intersection(&b).cloned()))
            }
            Diff => {
                let a = self.eval_set(l)?;
                let b = self.eval_set(r)?;
                Ok(Value::set(a.difference(&b).cloned()))
            }
            Product => {
                let a = self.eval_set(l)?;
                let b = self.eval_set(r)?;
                Ok(Value::set(a.iter().flat_map(|x| {
                    b.iter().map(move |y| Value::pair(x.clone(), y.clone()))
                })))
            }
            TotalFn | PartialFn => Err(EvalError::new(e, "function spaces cannot be enumerated")),
        }
    }

    /// `v in set_expr`, where `set_expr` may denote an infinite or type-level set.
    pub fn member(&mut self, v: &Value, set: &Expr) -> EvalResult<bool> {
        match set {
            Expr::Builtin(b) => Ok(match (b, v) {
                (BuiltinSet::Nat, Value::Int(n)) => *n >= 0,
                (BuiltinSet::Nat1, Value::Int(n)) => *n >= 1,
                (BuiltinSet::Int, Value::Int(_)) => true,
                (BuiltinSet::Bool, Value::Bool(_)) => true,
                _ => false,
            }),
            Expr::Var(name) if name == "Messages" && self.lookup(name).is_none() => Ok(true),
            Expr::PowerSet(inner) => match v.elements() {
                Some(items) => {
                    for x in &items {
                        if !self.member(x, inner)? {
                            return Ok(false);
                        }
                    }
                    Ok(true)
                }
                None => Ok(false),
            },
            Expr::Binary(BinOp::Product, a, b) => match v {
                Value::Tuple(p) if p.len() == 2 => {
                    Ok(self.member(&p[0], a)? && self.member(&p[1], b)?)
                }
                _ => Ok(false),
            },
            Expr::Binary(op @ (BinOp::TotalFn | BinOp::PartialFn), a, b) => {
                let Some(m) = v.as_map() else {
                    return Ok(false);
                };
                for (k, x) in &m {
                    if !self.member(k, a)? || !self.member(x, b)? {
                        return Ok(false);
                    }
                }
                if *op == BinOp::TotalFn {
                    let dom = self.eval_set(a)?;
                    return Ok(m.len() == dom.len());
                }
                Ok(true)
            }
            Expr::Interval(lo, hi) => match v {
                Value::Int(n) => Ok(self.eval_int(lo)? <= *n && *n <= self.eval_int(hi)?),
                _ => Ok(false),
            },
            Expr::Binary(BinOp::Union, a, b) => Ok(self.member(v, a)? || self.member(v, b)?),
            Expr::Binary(BinOp::Inter, a, b) => Ok(self.member(v, a)? && self.member(v, b)?),
            Expr::Binary(BinOp::Diff, a, b) => Ok(self.member(v, a)? && !self.member(v, b)?),
            _ => {
                let s = self.eval(set)?;
                match (&s, v) {
                    (Value::FinSet(items), _) => Ok(items.contains(v)),
                    (Value::FinMap(m), Value::Tuple(p)) if p.len() == 2 => {
                        Ok(m.get(&p[0]) == Some(&p[1]))
                    }
                    (Value::FinMap(_), _) => Ok(false),
                    _ => Err(EvalError::new(set, format!("expected a set, found {s}"))),
                }
            }
        }
    }
}

/// Whether a typing domain denotes a set that cannot be enumerated.
pub fn is_infinite_domain(e: &Expr) -> bool {
    match e {
        Expr::Builtin(_) | Expr::PowerSet(_) => true,
        Expr::Var(v) => v == "Messages",
        Expr::Binary(BinOp::TotalFn | BinOp::PartialFn, ..) => true,
        Expr::Binary(BinOp::Product | BinOp::Union, a, b) => {
            is_infinite_domain(a) || is_infinite_domain(b)
        }
        Expr::Binary(BinOp::Inter, a, b) => is_infinite_domain(a) && is_infinite_domain(b),
        Expr::Binary(BinOp::Diff, a, _) => is_infinite_domain(a),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;

    fn run(src: &str, globals: &[(&str, Value)]) -> EvalResult<Value> {
        let globals: BTreeMap<Ident, Value> = globals
            .iter()
            .map(|(n, v)| (Ident::from(*n), v.clone()))
            .collect();
        let vars = BTreeMap::new();
        let channels = BTreeMap::new();
        let atoms = BTreeMap::new();
        let mut env = Env {
            globals: &globals,
            vars: &vars,
            channels: &channels,
            atoms: &atoms,
            locals: Vec::new(),
        };
        env.eval(&parse_expr(src).unwrap())
    }

    fn ints(xs: &[i64]) -> Value {
        Value::set(xs.iter().map(|x| Value::Int(*x)))
    }

    #[test]
    fn arithmetic_and_sets() {
        assert_eq!(run("1 + 2 * 3", &[]), Ok(Value::Int(7)));
        assert_eq!(run("7 / 2", &[]), Ok(Value::Int(3)));
        assert!(run("1 / 0", &[]).is_err());
        assert_eq!(run("card(1 .. 4)", &[]), Ok(Value::Int(4)));
        assert_eq!(run("{1, 2} \\/ {3}", &[]), Ok(ints(&[1, 2, 3])));
        assert_eq!(run("(1 .. 5) \\ {2, 4}", &[]), Ok(ints(&[1, 3, 5])));
        assert_eq!(run("{x . x in 1 .. 3 | x * x}", &[]), Ok(ints(&[1, 4, 9])));
    }

    #[test]
    fn quantifiers_short_circuit_over_domains() {
        let s = ("S", ints(&[1, 2, 3]));
        assert_eq!(
            run("!x . x in S => x > 0", std::slice::from_ref(&s)),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            run("#x . x in S & x > 2", std::slice::from_ref(&s)),
            Ok(Value::Bool(true))
        );
        assert_eq!(run("#x . x in S & x > 3", &[s]), Ok(Value::Bool(false)));
    }

    #[test]
    fn membership_in_type_sets() {
        let q = (
            "Q",
            Value::set([Value::Proc("a".into()), Value::Proc("b".into())]),
        );
        let f = Value::map([
            (Value::Proc("a".into()), Value::Int(1)),
            (Value::Proc("b".into()), Value::Int(0)),
        ]);
        let g = ("g", f);
        assert_eq!(
            run("g in Q --> NAT", &[q.clone(), g.clone()]),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            run("g in Q --> NAT1", &[q.clone(), g.clone()]),
            Ok(Value::Bool(false))
        );
        assert_eq!(
            run("{} in Q --> NAT", std::slice::from_ref(&q)),
            Ok(Value::Bool(false))
        );
        assert_eq!(
            run("{} in Q +-> NAT", std::slice::from_ref(&q)),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            run("Q in POW(Q)", std::slice::from_ref(&q)),
            Ok(Value::Bool(true))
        );
        assert_eq!(
            run(
                "g(a) |-> 3 in NAT ** NAT",
                &[q, g, ("a", Value::Proc("a".into()))]
            ),
            Ok(Value::Bool(true))
        );
        assert!(run("NAT", &[]).is_err());
    }

    #[test]
    fn override_and_application() {
        let f = ("f", Value::map([(Value::Int(1), Value::Int(2))]));
        let got = run("{1 |-> 2} <+ {1 |-> 3, 2 |-> 4}", &[]);
        assert_eq!(
            got,
            Ok(Value::map([
                (Value::Int(1), Value::Int(3)),
                (Value::Int(2), Value::Int(4))
            ]))
        );
        assert_eq!(run("f(1)", std::slice::from_ref(&f)), Ok(Value::Int(2)));
        assert!(run("f(5)", &[f]).is_err());
    }

    #[test]
    fn infinite_domains() {
        let e = |s: &str| parse_expr(s).unwrap();
        assert!(is_infinite_domain(&e("NAT")));
        assert!(is_infinite_domain(&e("Messages")));
        assert!(is_infinite_domain(&e("POW(S)")));
        assert!(!is_infinite_domain(&e("network(proc)")));
        assert!(!is_infinite_domain(&e("1 .. 3")));
    }
}
