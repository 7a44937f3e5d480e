//! Abstract syntax shared by the parser, analyzer, code generator and simulator.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;

use crate::diag::SourceSpan;

/// An identifier matching `[A-Za-z][A-Za-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    /// Builds an identifier, returning `None` when `name` is not a valid token.
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        Self::is_valid(&name).then_some(Ident(name))
    }

    pub fn is_valid(name: &str) -> bool {
        let mut chars = name.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Ident {
    /// Panics on an invalid identifier; meant for literals in code and tests.
    fn from(s: &str) -> Self {
        Ident::new(s).unwrap_or_else(|| panic!("invalid identifier {s:?}"))
    }
}

impl Borrow<str> for Ident {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Ident {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Ident {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Subset,
    Union,
    Inter,
    Diff,
    And,
    Or,
    Implies,
    /// Cartesian product `S ** T`.
    Product,
    /// Total function space `S --> T`.
    TotalFn,
    /// Partial function space `S +-> T`.
    PartialFn,
}

impl BinOp {
    /// ASCII spelling used by the concrete syntax.
    pub fn ascii(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Neq => "/=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::In => "in",
            BinOp::NotIn => "/:",
            BinOp::Subset => "<:",
            BinOp::Union => "\\/",
            BinOp::Inter => "/\\",
            BinOp::Diff => "\\",
            BinOp::And => "&",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
            BinOp::Product => "**",
            BinOp::TotalFn => "-->",
            BinOp::PartialFn => "+->",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq
                | BinOp::Neq
                | BinOp::Lt
                | BinOp::Le
                | BinOp::Gt
                | BinOp::Ge
                | BinOp::In
                | BinOp::NotIn
                | BinOp::Subset
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
}

/// The six channel functions of the communication layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKind {
    Send,
    Receive,
    Lose,
    Sent,
    Received,
    InChannel,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Send => "send",
            ChannelKind::Receive => "receive",
            ChannelKind::Lose => "lose",
            ChannelKind::Sent => "sent",
            ChannelKind::Received => "received",
            ChannelKind::InChannel => "inChannel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "send" => ChannelKind::Send,
            "receive" => ChannelKind::Receive,
            "lose" => ChannelKind::Lose,
            "sent" => ChannelKind::Sent,
            "received" => ChannelKind::Received,
            "inChannel" => ChannelKind::InChannel,
            _ => return None,
        })
    }

    /// `sent`, `received` and `inChannel` are queries; the rest transform a channel.
    pub fn is_query(self) -> bool {
        matches!(
            self,
            ChannelKind::Sent | ChannelKind::Received | ChannelKind::InChannel
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinSet {
    Nat,
    Nat1,
    Int,
    Bool,
}

impl BuiltinSet {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinSet::Nat => "NAT",
            BuiltinSet::Nat1 => "NAT1",
            BuiltinSet::Int => "INT",
            BuiltinSet::Bool => "BOOL",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "NAT" => BuiltinSet::Nat,
            "NAT1" => BuiltinSet::Nat1,
            "INT" => BuiltinSet::Int,
            "BOOL" => BuiltinSet::Bool,
            _ => return None,
        })
    }
}

/// Expression tree for axioms, invariants, guards and action right-hand sides.
///
/// The identifier `channels` never occurs as a `Var`: every use of the channel
/// variable is folded into a [`Expr::ChannelCall`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(Ident),
    /// Element of an enumerated set. Produced by the analyzer, never by the parser.
    EnumElem {
        set: Ident,
        elem: Ident,
    },
    Apply(Box<Expr>, Box<Expr>),
    Maplet(Box<Expr>, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    SetExt(Vec<Expr>),
    SetComprehension {
        binder: Ident,
        domain: Box<Expr>,
        filter: Option<Box<Expr>>,
        body: Box<Expr>,
    },
    Quantifier {
        kind: QuantKind,
        binders: Vec<(Ident, Expr)>,
        body: Box<Expr>,
    },
    Interval(Box<Expr>, Box<Expr>),
    Card(Box<Expr>),
    ChannelCall {
        kind: ChannelKind,
        src: Box<Expr>,
        dst: Box<Expr>,
        msg: Box<Expr>,
    },
    FuncOverride(Box<Expr>, Box<Expr>),
    PowerSet(Box<Expr>),
    Partition {
        set: Box<Expr>,
        blocks: Vec<Expr>,
    },
    Builtin(BuiltinSet),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Ident::from(name))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn apply(f: Expr, a: Expr) -> Expr {
        Expr::Apply(Box::new(f), Box::new(a))
    }

    pub fn maplet(l: Expr, r: Expr) -> Expr {
        Expr::Maplet(Box::new(l), Box::new(r))
    }

    pub fn as_var(&self) -> Option<&Ident> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    /// `x in S` when `x` is a plain variable.
    pub fn as_membership(&self) -> Option<(&Ident, &Expr)> {
        match self {
            Expr::Binary(BinOp::In, l, r) => l.as_var().map(|v| (v, &**r)),
            _ => None,
        }
    }

    /// Splits a conjunction into its conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn go<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Binary(BinOp::And, l, r) => {
                    go(l, out);
                    go(r, out);
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    /// Left-nested conjunction of `parts`; `TRUE` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = Expr>) -> Expr {
        parts
            .into_iter()
            .reduce(|acc, e| Expr::binary(BinOp::And, acc, e))
            .unwrap_or(Expr::Bool(true))
    }

    /// Identifiers occurring free in the expression.
    pub fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::EnumElem { .. } | Expr::Builtin(_) => {}
            Expr::Var(v) => {
                if !bound.contains(&v) {
                    out.insert(v.clone());
                }
            }
            Expr::Apply(a, b)
            | Expr::Maplet(a, b)
            | Expr::Binary(_, a, b)
            | Expr::Interval(a, b)
            | Expr::FuncOverride(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Not(a) | Expr::Card(a) | Expr::PowerSet(a) => a.collect_free(bound, out),
            Expr::SetExt(items) => items.iter().for_each(|e| e.collect_free(bound, out)),
            Expr::Partition { set, blocks } => {
                set.collect_free(bound, out);
                blocks.iter().for_each(|e| e.collect_free(bound, out));
            }
            Expr::SetComprehension {
                binder,
                domain,
                filter,
                body,
            } => {
                domain.collect_free(bound, out);
                bound.push(binder);
                if let Some(f) = filter {
                    f.collect_free(bound, out);
                }
                body.collect_free(bound, out);
                bound.pop();
            }
            Expr::Quantifier { binders, body, .. } => {
                // Each domain sees the binders introduced before it.
                let depth = bound.len();
                for (name, dom) in binders {
                    dom.collect_free(bound, out);
                    bound.push(name);
                }
                body.collect_free(bound, out);
                bound.truncate(depth);
            }
            Expr::ChannelCall { src, dst, msg, .. } => {
                src.collect_free(bound, out);
                dst.collect_free(bound, out);
                msg.collect_free(bound, out);
            }
        }
    }

    /// Direct sub-expressions, left to right.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_)
            | Expr::Bool(_)
            | Expr::Var(_)
            | Expr::EnumElem { .. }
            | Expr::Builtin(_) => {
                vec![]
            }
            Expr::Apply(a, b)
            | Expr::Maplet(a, b)
            | Expr::Binary(_, a, b)
            | Expr::Interval(a, b)
            | Expr::FuncOverride(a, b) => vec![a, b],
            Expr::Not(a) | Expr::Card(a) | Expr::PowerSet(a) => vec![a],
            Expr::SetExt(items) => items.iter().collect(),
            Expr::Partition { set, blocks } => std::iter::once(&**set).chain(blocks).collect(),
            Expr::SetComprehension {
                domain,
                filter,
                body,
                ..
            } => {
                let mut v: Vec<&Expr> = vec![domain];
                v.extend(filter.as_deref());
                v.push(body);
                v
            }
            Expr::Quantifier { binders, body, .. } => binders
                .iter()
                .map(|(_, d)| d)
                .chain(std::iter::once(&**body))
                .collect(),
            Expr::ChannelCall { src, dst, msg, .. } => vec![src, dst, msg],
        }
    }

    /// Pre-order visit of every sub-expression.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_)
            | Expr::Bool(_)
            | Expr::Var(_)
            | Expr::EnumElem { .. }
            | Expr::Builtin(_) => {}
            Expr::Apply(a, b)
            | Expr::Maplet(a, b)
            | Expr::Binary(_, a, b)
            | Expr::Interval(a, b)
            | Expr::FuncOverride(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Not(a) | Expr::Card(a) | Expr::PowerSet(a) => a.walk(f),
            Expr::SetExt(items) => items.iter().for_each(|e| e.walk(f)),
            Expr::Partition { set, blocks } => {
                set.walk(f);
                blocks.iter().for_each(|e| e.walk(f));
            }
            Expr::SetComprehension {
                domain,
                filter,
                body,
                ..
            } => {
                domain.walk(f);
                if let Some(x) = filter {
                    x.walk(f);
                }
                body.walk(f);
            }
            Expr::Quantifier { binders, body, .. } => {
                binders.iter().for_each(|(_, d)| d.walk(f));
                body.walk(f);
            }
            Expr::ChannelCall { src, dst, msg, .. } => {
                src.walk(f);
                dst.walk(f);
                msg.walk(f);
            }
        }
    }
}

/// A declaration item carrying its `@label:` and source location.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled<T> {
    pub label: Ident,
    pub value: T,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axiom {
    pub label: Ident,
    pub predicate: Expr,
    /// Process-class names harvested from trailing `@Name` markers, in source order.
    pub annotations: Vec<Ident>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextModel {
    pub name: Ident,
    pub extends: Vec<Ident>,
    pub sets: Vec<Ident>,
    pub constants: Vec<Ident>,
    pub axioms: Vec<Axiom>,
}

impl ContextModel {
    pub fn axiom(&self, label: &str) -> Option<&Axiom> {
        self.axioms.iter().find(|a| a.label == label)
    }

    pub fn declares(&self, name: &str) -> bool {
        self.sets.iter().chain(&self.constants).any(|n| n == name)
    }
}

/// Whether a channel assignment sends or receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelOp {
    Send,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// `var(index) := rhs`.
    LocalAssign { var: Ident, index: Expr, rhs: Expr },
    /// `channels := send(channels |-> (src |-> dst) |-> msg)` or the `receive` form.
    ChannelAssign {
        op: ChannelOp,
        src: Expr,
        dst: Expr,
        msg: Expr,
    },
    /// Whole-variable assignment `var := rhs`; only legal in the initialisation.
    Assign { var: Ident, rhs: Expr },
}

impl Action {
    pub fn target(&self) -> Option<&Ident> {
        match self {
            Action::LocalAssign { var, .. } | Action::Assign { var, .. } => Some(var),
            Action::ChannelAssign { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventDecl {
    pub name: Ident,
    pub params: Vec<Ident>,
    pub guards: Vec<Labeled<Expr>>,
    pub actions: Vec<Labeled<Action>>,
    pub span: SourceSpan,
}

/// Internal, send or receive event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum EventKind {
    Internal,
    Send,
    Receive,
}

/// Raised when an event carries both a send and a receive action.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event `{0}` both sends and receives")]
pub struct AmbiguousKind(pub Ident);

impl EventDecl {
    /// Domain of the first guard of the form `param in S`.
    pub fn typing_guard(&self, param: &str) -> Option<&Labeled<Expr>> {
        self.guards
            .iter()
            .find(|g| g.value.as_membership().is_some_and(|(v, _)| v == param))
    }

    pub fn channel_actions(&self) -> impl Iterator<Item = &Labeled<Action>> {
        self.actions
            .iter()
            .filter(|a| matches!(a.value, Action::ChannelAssign { .. }))
    }
}

/// Classifies an event by its channel actions.
pub fn classify_event(e: &EventDecl) -> Result<EventKind, AmbiguousKind> {
    let mut sends = false;
    let mut receives = false;
    for a in &e.actions {
        if let Action::ChannelAssign { op, .. } = a.value {
            match op {
                ChannelOp::Send => sends = true,
                ChannelOp::Receive => receives = true,
            }
        }
    }
    match (sends, receives) {
        (true, true) => Err(AmbiguousKind(e.name.clone())),
        (true, false) => Ok(EventKind::Send),
        (false, true) => Ok(EventKind::Receive),
        (false, false) => Ok(EventKind::Internal),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineModel {
    pub name: Ident,
    pub sees: Ident,
    pub variables: Vec<Ident>,
    pub invariants: Vec<Labeled<Expr>>,
    pub initialisation: Vec<Labeled<Action>>,
    pub events: Vec<EventDecl>,
}

impl MachineModel {
    /// The `<var>_typing` invariant of a variable.
    pub fn typing_invariant(&self, var: &str) -> Option<&Labeled<Expr>> {
        let label = format!("{var}_typing");
        self.invariants.iter().find(|i| i.label == label.as_str())
    }

    pub fn event(&self, name: &str) -> Option<&EventDecl> {
        self.events.iter().find(|e| e.name == name)
    }
}
