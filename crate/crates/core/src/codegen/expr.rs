//! Expression translation to DistAlgo/Python text.

use std::collections::BTreeSet;

use crate::ast::*;
use crate::parser::pretty_expr;

use super::CodegenError;

/// Options for one translation. `bound_vars` are rendered `_x` inside
/// `sent`/`received` queries; `localize_for` turns `f(proc)` into `self.f`.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub bound_vars: BTreeSet<Ident>,
    pub localize_for: Option<Localize>,
    /// Class names rendered as `<Class>Set` (main function only).
    pub class_sets: BTreeSet<Ident>,
    pub indent: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            bound_vars: BTreeSet::new(),
            localize_for: None,
            class_sets: BTreeSet::new(),
            indent: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Localize {
    pub class: Ident,
    pub proc: Ident,
    /// LC(class) functions and LV(class): rendered `self.f` when applied to `proc`.
    pub functions: BTreeSet<Ident>,
    /// Scalar local constants: rendered `self.c`.
    pub scalars: BTreeSet<Ident>,
    /// Variables read through a pre-event copy (`old_x`).
    pub stale: BTreeSet<Ident>,
}

impl GenConfig {
    pub fn with_bound(&self, names: impl IntoIterator<Item = Ident>) -> GenConfig {
        let mut c = self.clone();
        c.bound_vars.extend(names);
        c
    }
}

const PY_OR: u8 = 1;
const PY_AND: u8 = 2;
const PY_NOT: u8 = 3;
const PY_CMP: u8 = 4;
const PY_BITOR: u8 = 5;
const PY_BITAND: u8 = 7;
const PY_ADD: u8 = 9;
const PY_MUL: u8 = 10;
const PY_NEG: u8 = 11;
const PY_ATOM: u8 = 13;

struct Out {
    text: String,
    prec: u8,
}

impl Out {
    fn atom(text: String) -> Out {
        Out {
            text,
            prec: PY_ATOM,
        }
    }

    fn at_least(self, min: u8) -> String {
        if self.prec < min {
            format!("({})", self.text)
        } else {
            self.text
        }
    }
}

fn unsupported(e: &Expr, why: &str) -> CodegenError {
    CodegenError::Unsupported {
        construct: pretty_expr(e),
        reason: why.to_string(),
    }
}

/// 𝒯: translation with plain variables.
pub fn translate_expr(e: &Expr, cfg: &GenConfig) -> Result<String, CodegenError> {
    Ok(Translator { cfg, query: false }.go(e)?.text)
}

/// 𝒯ᵇ: like [`translate_expr`], with bound variables rendered `_x`.
pub fn translate_expr_bound(e: &Expr, cfg: &GenConfig) -> Result<String, CodegenError> {
    Ok(Translator { cfg, query: true }.go(e)?.text)
}

/// Message expressions flatten their maplet spine into a tuple, prefix first.
pub fn translate_message(e: &Expr, cfg: &GenConfig, bound: bool) -> Result<String, CodegenError> {
    let t = Translator { cfg, query: bound };
    let mut parts = Vec::new();
    flatten_maplets(e, &mut parts);
    let items = parts
        .iter()
        .map(|p| t.go(p).map(|o| o.text))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if items.len() == 1 {
        format!("({}, )", items[0])
    } else {
        format!("({})", items.join(", "))
    })
}

fn flatten_maplets<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Maplet(l, r) => {
            flatten_maplets(l, out);
            out.push(r);
        }
        other => out.push(other),
    }
}

/// Translates a `sent`/`received` history guard, or `None` if `e` is not one.
pub fn translate_history(e: &Expr, cfg: &GenConfig) -> Result<Option<String>, CodegenError> {
    let (negated, kind, src, dst, msg) = match e {
        Expr::Binary(op @ (BinOp::Gt | BinOp::Eq), l, r) if **r == Expr::Int(0) => match &**l {
            Expr::ChannelCall {
                kind: kind @ (ChannelKind::Sent | ChannelKind::Received),
                src,
                dst,
                msg,
            } => (*op == BinOp::Eq, *kind, src, dst, msg),
            _ => return Ok(None),
        },
        _ => return Ok(None),
    };
    let t = Translator { cfg, query: true };
    let m = translate_message(msg, cfg, true)?;
    let query = match kind {
        ChannelKind::Sent => format!("some(sent({m}, to={}))", t.go(dst)?.text),
        _ => format!("some(received({m}, from_={}))", t.go(src)?.text),
    };
    Ok(Some(if negated {
        format!("not({query})")
    } else {
        query
    }))
}

struct Translator<'a> {
    cfg: &'a GenConfig,
    query: bool,
}

impl Translator<'_> {
    fn with(
        &self,
        cfg: &GenConfig,
        f: impl FnOnce(&Translator) -> Result<Out, CodegenError>,
    ) -> Result<Out, CodegenError> {
        f(&Translator {
            cfg,
            query: self.query,
        })
    }

    fn var(&self, x: &Ident) -> String {
        if self.cfg.bound_vars.contains(x) {
            return if self.query {
                format!("_{x}")
            } else {
                x.to_string()
            };
        }
        if let Some(l) = &self.cfg.localize_for {
            if &l.proc == x {
                return "self".to_string();
            }
            if l.scalars.contains(x) {
                return format!("self.{x}");
            }
        }
        if self.cfg.class_sets.contains(x) {
            return format!("{x}Set");
        }
        x.to_string()
    }

    fn go(&self, e: &Expr) -> Result<Out, CodegenError> {
        if let Some(s) = translate_history(e, self.cfg)? {
            let prec = if s.starts_with("not(") {
                PY_NOT
            } else {
                PY_ATOM
            };
            return Ok(Out { text: s, prec });
        }
        Ok(match e {
            Expr::Int(v) if *v < 0 => Out {
                text: v.to_string(),
                prec: PY_NEG,
            },
            Expr::Int(v) => Out::atom(v.to_string()),
            Expr::Bool(b) => Out::atom(if *b { "True" } else { "False" }.to_string()),
            Expr::Var(x) => Out::atom(self.var(x)),
            Expr::EnumElem { set, elem } if set == "States" => Out::atom(format!("\"{elem}\"")),
            Expr::EnumElem { set, elem } => Out::atom(format!("{set}.{elem}")),
            Expr::Apply(f, a) => {
                if let (Some(name), Some(l)) = (f.as_var(), &self.cfg.localize_for) {
                    let own = a.as_var() == Some(&l.proc) && !self.cfg.bound_vars.contains(&l.proc);
                    if own && l.functions.contains(name) && !self.cfg.bound_vars.contains(name) {
                        return Ok(Out::atom(if l.stale.contains(name) {
                            format!("old_{name}")
                        } else {
                            format!("self.{name}")
                        }));
                    }
                }
                let f = self.go(f)?.at_least(PY_ATOM);
                Out::atom(format!("{f}[{}]", self.go(a)?.text))
            }
            Expr::Maplet(l, r) => {
                Out::atom(format!("({}, {})", self.go(l)?.text, self.go(r)?.text))
            }
            Expr::Not(x) => Out {
                text: format!("not({})", self.go(x)?.text),
                prec: PY_NOT,
            },
            Expr::Binary(op, l, r) => self.binary(e, *op, l, r)?,
            Expr::SetExt(items) if items.is_empty() => Out::atom("set()".to_string()),
            Expr::SetExt(items) if items.iter().all(|i| matches!(i, Expr::Maplet(..))) => {
                let pairs = items
                    .iter()
                    .map(|i| match i {
                        Expr::Maplet(k, v) => {
                            Ok(format!("{}:{}", self.go(k)?.text, self.go(v)?.text))
                        }
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Out::atom(format!("{{{}}}", pairs.join(", ")))
            }
            Expr::SetExt(items) => {
                let xs = items
                    .iter()
                    .map(|i| self.go(i).map(|o| o.text))
                    .collect::<Result<Vec<_>, _>>()?;
                Out::atom(format!("{{{}}}", xs.join(", ")))
            }
            Expr::SetComprehension {
                binder,
                domain,
                filter,
                body,
            } => {
                let dom = self.go(domain)?.at_least(PY_BITOR);
                let inner = self.cfg.with_bound([binder.clone()]);
                self.with(&inner, |t| {
                    let filt = filter.as_ref().map(|f| t.go(f)).transpose()?;
                    match &**body {
                        Expr::Maplet(k, v) if k.as_var() == Some(binder) => {
                            let cond = filt.map(|f| format!(" if {}", f.text)).unwrap_or_default();
                            Ok(Out::atom(format!(
                                "{{{binder}:{} for {binder} in {dom}{cond}}}",
                                t.go(v)?.text
                            )))
                        }
                        _ => {
                            let cond = filt.map(|f| format!(", {}", f.text)).unwrap_or_default();
                            Ok(Out::atom(format!(
                                "setof({}, {binder} in {dom}{cond})",
                                t.go(body)?.text
                            )))
                        }
                    }
                })?
            }
            Expr::Quantifier {
                kind,
                binders,
                body,
            } => {
                let (head, has) = self.quantifier_parts(*kind, binders, body)?;
                match has {
                    Some(h) => Out::atom(format!("{head}, has={h})")),
                    None => Out::atom(format!("{head})")),
                }
            }
            Expr::Interval(lo, hi) => {
                let hi = Expr::binary(BinOp::Add, (**hi).clone(), Expr::Int(1));
                Out::atom(format!(
                    "set(range({}, {}))",
                    self.go(lo)?.text,
                    self.go(&hi)?.text
                ))
            }
            Expr::Card(x) => Out::atom(format!("len({})", self.go(x)?.text)),
            Expr::FuncOverride(base, upd) => Out::atom(format!(
                "{{**{}, **{}}}",
                self.go(base)?.at_least(PY_ATOM),
                self.go(upd)?.at_least(PY_ATOM)
            )),
            Expr::ChannelCall { .. } => {
                return Err(unsupported(
                    e,
                    "channel calls are only translated in history guards and channel actions",
                ))
            }
            Expr::PowerSet(_) | Expr::Partition { .. } | Expr::Builtin(_) => {
                return Err(unsupported(
                    e,
                    "infinite or type-level sets have no program counterpart",
                ))
            }
        })
    }

    /// `some(x in D, ...` head and the translated body (None when the body is TRUE).
    fn quantifier_parts(
        &self,
        kind: QuantKind,
        binders: &[(Ident, Expr)],
        body: &Expr,
    ) -> Result<(String, Option<String>), CodegenError> {
        let name = match kind {
            QuantKind::Forall => "each",
            QuantKind::Exists => "some",
        };
        let mut cfg = self.cfg.clone();
        let mut parts = Vec::new();
        for (n, d) in binders {
            let dom = self.with(&cfg, |t| t.go(d))?.at_least(PY_BITOR);
            parts.push(format!("{n} in {dom}"));
            cfg.bound_vars.insert(n.clone());
        }
        let has = if kind == QuantKind::Exists && *body == Expr::Bool(true) {
            None
        } else {
            Some(self.with(&cfg, |t| t.go(body))?.text)
        };
        Ok((format!("{name}({}", parts.join(", ")), has))
    }

    fn binary(&self, e: &Expr, op: BinOp, l: &Expr, r: &Expr) -> Result<Out, CodegenError> {
        let (sym, prec, assoc_left) = match op {
            BinOp::Or => ("or", PY_OR, true),
            BinOp::And => ("and", PY_AND, true),
            BinOp::Eq => ("==", PY_CMP, false),
            BinOp::Neq => ("!=", PY_CMP, false),
            BinOp::Lt => ("<", PY_CMP, false),
            BinOp::Le => ("<=", PY_CMP, false),
            BinOp::Gt => (">", PY_CMP, false),
            BinOp::Ge => (">=", PY_CMP, false),
            BinOp::In => ("in", PY_CMP, false),
            BinOp::NotIn => ("not in", PY_CMP, false),
            BinOp::Subset => ("<=", PY_CMP, false),
            BinOp::Union => ("|", PY_BITOR, true),
            BinOp::Inter => ("&", PY_BITAND, true),
            BinOp::Diff => ("-", PY_ADD, true),
            BinOp::Add => ("+", PY_ADD, true),
            BinOp::Sub => ("-", PY_ADD, true),
            BinOp::Mul => ("*", PY_MUL, true),
            BinOp::Div => ("//", PY_MUL, true),
            BinOp::Implies => {
                let a = self.go(l)?.text;
                let b = self.go(r)?.at_least(PY_OR + 1);
                return Ok(Out::atom(format!("(not({a}) or {b})")));
            }
            BinOp::Product | BinOp::TotalFn | BinOp::PartialFn => {
                return Err(unsupported(
                    e,
                    "relation and function spaces are type-level only",
                ))
            }
        };
        let (lmin, rmin) = if assoc_left {
            (prec, prec + 1)
        } else {
            (prec + 1, prec + 1)
        };
        let a = self.go(l)?.at_least(lmin);
        let b = self.go(r)?.at_least(rmin);
        Ok(Out {
            text: format!("{a} {sym} {b}"),
            prec,
        })
    }
}

/// Splits a top-level quantifier into its `each(x in D,` head and `has=` body.
pub fn split_quantifier(
    e: &Expr,
    cfg: &GenConfig,
) -> Result<Option<(String, Option<String>)>, CodegenError> {
    match e {
        Expr::Quantifier {
            kind,
            binders,
            body,
        } => Translator { cfg, query: false }
            .quantifier_parts(*kind, binders, body)
            .map(Some),
        _ => Ok(None),
    }
}

/// Pairs of a literal `{k |-> v, ...}`.
pub fn maplet_updates(e: &Expr) -> Option<Vec<(&Expr, &Expr)>> {
    match e {
        Expr::SetExt(items) if !items.is_empty() => items
            .iter()
            .map(|x| match x {
                Expr::Maplet(k, v) => Some((&**k, &**v)),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}
