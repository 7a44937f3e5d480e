//! Well-formedness and locality checks for Local Event-B models.
//!
//! [`analyze`] is all-or-nothing: it either returns an [`AnalyzedProgram`] in
//! which every event is local to exactly one process class, or the full list
//! of diagnostics.

mod event;
mod locality;

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::diag::{codes, Diagnostic, SourceSpan};

pub use event::check_event;

/// Names the communication layer requires in every context.
pub const BUILTIN_CONSTANTS: &[&str] = &[
    "Channels",
    "emptyChannel",
    "send",
    "receive",
    "lose",
    "sent",
    "received",
    "inChannel",
];
pub const BUILTIN_SETS: &[&str] = &["Nodes", "States", "Messages"];
pub const DONE: &str = "done";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKind {
    /// `cst in PCl --> T` or `cst in Nodes --> T`; passed to setup as `cst[proc]`.
    Function,
    /// Non-function constant annotated `@PCl`.
    Scalar,
    /// Enumerated set whose partition axiom is annotated `@PCl`.
    EnumSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalConstant {
    pub name: Ident,
    pub kind: LocalKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitEntry {
    pub var: Ident,
    pub binder: Ident,
    pub expr: Expr,
}

/// Where a receive event takes its message from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveInfo {
    /// The sender expression of the `receive` action.
    pub source: Expr,
    /// The message expression of the `receive` action.
    pub msg: Expr,
    /// Pattern for the sender: the match guard's right-hand side, or `source` itself.
    pub source_pattern: Expr,
    /// Pattern for the message: the match guard's right-hand side, or `msg` itself.
    pub msg_pattern: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventInfo {
    pub decl: EventDecl,
    pub kind: EventKind,
    pub class: Ident,
    pub proc_param: Ident,
    pub state: Ident,
    /// Non-process parameters with their typing domain, in declaration order.
    pub typed_params: Vec<(Ident, Expr)>,
    pub general_guards: Vec<Expr>,
    pub history_guards: Vec<Expr>,
    pub match_guards: Vec<(Ident, Expr)>,
    pub receive: Option<ReceiveInfo>,
}

impl EventInfo {
    pub fn name(&self) -> &Ident {
        &self.decl.name
    }

    /// General and history guards in declaration order.
    pub fn condition_guards(&self) -> Vec<&Expr> {
        self.decl
            .guards
            .iter()
            .map(|g| &g.value)
            .filter(|g| self.general_guards.contains(g) || self.history_guards.contains(g))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessClassInfo {
    pub name: Ident,
    /// Members from a `PCl: partition(PCl, {p1}, ...)` axiom; empty when not enumerated.
    pub explicit_members: Vec<Ident>,
    pub local_constants: Vec<LocalConstant>,
    pub local_variables: Vec<Ident>,
    /// StatesSet: states used in pc guards of this class, in `States` order, plus `done`.
    pub states: Vec<Ident>,
    pub events_by_state: Vec<(Ident, Vec<EventInfo>)>,
    pub init: Vec<InitEntry>,
}

impl ProcessClassInfo {
    pub fn is_enumerated(&self) -> bool {
        !self.explicit_members.is_empty()
    }

    pub fn events_in(&self, state: &str) -> &[EventInfo] {
        self.events_by_state
            .iter()
            .find(|(s, _)| s == state)
            .map_or(&[], |(_, evs)| evs.as_slice())
    }

    pub fn events(&self) -> impl Iterator<Item = &EventInfo> {
        self.events_by_state.iter().flat_map(|(_, e)| e)
    }

    pub fn is_local_constant(&self, name: &str) -> bool {
        self.local_constants.iter().any(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEntry {
    pub class: Ident,
    pub binder: Ident,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub entries: Vec<TopologyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumSet {
    pub set: Ident,
    pub elems: Vec<Ident>,
    pub annotations: Vec<Ident>,
}

/// Value of a constant given by a `cst_value` axiom.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDef {
    /// Union of per-class comprehensions `{proc . proc in PCl | proc |-> expr}`.
    PerClass(Vec<TopologyEntry>),
    Scalar(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedProgram {
    pub context: ContextModel,
    /// The machine with enumerated-set elements resolved to [`Expr::EnumElem`].
    pub machine: MachineModel,
    pub classes: Vec<ProcessClassInfo>,
    pub topology: TopologySpec,
    pub enums: Vec<EnumSet>,
    /// Members of the `States` partition, in axiom order.
    pub states: Vec<Ident>,
    /// Constants with a `_value` axiom (other than `network`), in declaration order.
    pub values: Vec<(Ident, ValueDef)>,
    /// Constants with a `_typing` axiom and no `_value` axiom.
    pub unbound_constants: Vec<Ident>,
}

impl AnalyzedProgram {
    pub fn class(&self, name: &str) -> Option<&ProcessClassInfo> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_of_member(&self, member: &str) -> Option<&ProcessClassInfo> {
        self.classes
            .iter()
            .find(|c| c.explicit_members.iter().any(|m| m == member))
    }

    /// Class sizes that must be configured: every non-enumerated class.
    pub fn unsized_classes(&self) -> Vec<&Ident> {
        self.classes
            .iter()
            .filter(|c| !c.is_enumerated())
            .map(|c| &c.name)
            .collect()
    }

    /// Configuration holes: `N<Class>` for unsized classes, then unbound constants.
    pub fn holes(&self) -> Vec<String> {
        self.unsized_classes()
            .into_iter()
            .map(|c| format!("N{c}"))
            .chain(self.unbound_constants.iter().map(|c| c.to_string()))
            .collect()
    }

    pub fn enum_of(&self, elem: &str) -> Option<&EnumSet> {
        self.enums
            .iter()
            .find(|e| e.elems.iter().any(|x| x == elem))
    }

    pub fn all_events(&self) -> impl Iterator<Item = &EventInfo> {
        self.classes.iter().flat_map(|c| c.events())
    }
}

fn err(code: &'static str, span: &SourceSpan, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(code, span.clone(), msg)
}

fn ctx_span(ctx: &ContextModel) -> SourceSpan {
    ctx.axioms
        .first()
        .map(|a| a.span.clone())
        .unwrap_or_default()
}

/// Singleton blocks `{a}` of a partition, or `None` if any block is not one.
fn singleton_blocks(blocks: &[Expr]) -> Option<Vec<Ident>> {
    blocks
        .iter()
        .map(|b| match b {
            Expr::SetExt(items) if items.len() == 1 => items[0].as_var().cloned(),
            _ => None,
        })
        .collect()
}

fn partition_of<'a>(axiom: &'a Axiom, set: &str) -> Option<&'a [Expr]> {
    match &axiom.predicate {
        Expr::Partition { set: s, blocks } if s.as_var().is_some_and(|v| v == set) => Some(blocks),
        _ => None,
    }
}

/// Class names in partition order, and the explicit members of enumerated classes.
pub type ClassTable = (Vec<Ident>, BTreeMap<Ident, Vec<Ident>>);

/// Process classes from the `Nodes` partition, with explicit members where enumerated.
pub fn extract_classes(ctx: &ContextModel) -> Result<ClassTable, Vec<Diagnostic>> {
    let Some(nodes) = ctx.axiom("Nodes") else {
        return Err(vec![err(
            codes::E_NO_NODES_AXIOM,
            &ctx_span(ctx),
            "context has no `Nodes: partition(Nodes, ...)` axiom",
        )]);
    };
    let Some(blocks) = partition_of(nodes, "Nodes") else {
        return Err(vec![err(
            codes::E_MALFORMED_PARTITION,
            &nodes.span,
            "axiom `Nodes` must have the form `partition(Nodes, PCl1, ..., PCln)`",
        )]);
    };
    let mut diags = Vec::new();
    let mut classes = Vec::new();
    for b in blocks {
        match b.as_var() {
            Some(c) if ctx.constants.contains(c) => {
                if classes.contains(c) {
                    diags.push(err(
                        codes::E_MALFORMED_PARTITION,
                        &nodes.span,
                        format!("process class `{c}` appears twice in the Nodes partition"),
                    ));
                } else {
                    classes.push(c.clone());
                }
            }
            Some(c) => diags.push(err(
                codes::E_MALFORMED_PARTITION,
                &nodes.span,
                format!("partition block `{c}` is not a declared constant"),
            )),
            None => diags.push(err(
                codes::E_MALFORMED_PARTITION,
                &nodes.span,
                "blocks of the Nodes partition must be process-class constants",
            )),
        }
    }
    if classes.is_empty() && diags.is_empty() {
        diags.push(err(
            codes::E_MALFORMED_PARTITION,
            &nodes.span,
            "the Nodes partition declares no process class",
        ));
    }
    let mut members = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for c in &classes {
        let Some(ax) = ctx.axiom(c.as_str()) else {
            members.insert(c.clone(), vec![]);
            continue;
        };
        let list = partition_of(ax, c.as_str()).and_then(singleton_blocks);
        match list {
            Some(list) => {
                for m in &list {
                    if !ctx.constants.contains(m) {
                        diags.push(err(
                            codes::E_UNDECLARED,
                            &ax.span,
                            format!("process `{m}` is not a declared constant"),
                        ));
                    }
                    if !seen.insert(m.clone()) {
                        diags.push(err(
                            codes::E_MALFORMED_PARTITION,
                            &ax.span,
                            format!("process `{m}` is enumerated twice"),
                        ));
                    }
                }
                members.insert(c.clone(), list);
            }
            None => diags.push(err(
                codes::E_MALFORMED_PARTITION,
                &ax.span,
                format!("axiom `{c}` must have the form `partition({c}, {{p1}}, ..., {{pm}})`"),
            )),
        }
    }
    if diags.is_empty() {
        Ok((classes, members))
    } else {
        Err(diags)
    }
}

/// Domain of a function type `D --> T` / `D +-> T`.
fn function_domain(ty: &Expr) -> Option<&Ident> {
    match ty {
        Expr::Binary(BinOp::TotalFn | BinOp::PartialFn, d, _) => d.as_var(),
        _ => None,
    }
}

/// `cst in D --> T` typing axiom/invariant for `name`.
fn typing_of<'a>(pred: &'a Expr, name: &str) -> Option<&'a Expr> {
    match pred.as_membership() {
        Some((v, ty)) if v == name => Some(ty),
        _ => None,
    }
}

fn enum_sets(ctx: &ContextModel) -> Vec<EnumSet> {
    let mut out = Vec::new();
    for ax in &ctx.axioms {
        if let Expr::Partition { set, blocks } = &ax.predicate {
            let Some(s) = set.as_var() else { continue };
            if s == "Nodes" || s == "States" || !ctx.sets.contains(s) {
                continue;
            }
            if let Some(elems) = singleton_blocks(blocks) {
                out.push(EnumSet {
                    set: s.clone(),
                    elems,
                    annotations: ax.annotations.clone(),
                });
            }
        }
    }
    out
}

/// LC(class): function constants over `Nodes` or `class` (network first, then
/// declaration order), then constants annotated `@class`, then annotated enum sets.
pub fn compute_local_constants(ctx: &ContextModel, class: &str) -> Vec<LocalConstant> {
    let mut out: Vec<LocalConstant> = Vec::new();
    let mut ordered: Vec<&Ident> = ctx.constants.iter().filter(|c| *c == "network").collect();
    ordered.extend(ctx.constants.iter().filter(|c| *c != "network"));
    for c in ordered {
        let Some(typing) = ctx.axiom(&format!("{c}_typing")) else {
            continue;
        };
        let ty = typing_of(&typing.predicate, c.as_str());
        let is_fn = ty.and_then(function_domain);
        let annotated = typing.annotations.iter().any(|a| a == class);
        match is_fn {
            Some(d) if d == "Nodes" || d == class => out.push(LocalConstant {
                name: c.clone(),
                kind: LocalKind::Function,
            }),
            Some(_) if annotated => out.push(LocalConstant {
                name: c.clone(),
                kind: LocalKind::Function,
            }),
            None if annotated => out.push(LocalConstant {
                name: c.clone(),
                kind: LocalKind::Scalar,
            }),
            _ => {}
        }
    }
    for e in enum_sets(ctx) {
        if e.annotations.iter().any(|a| a == class) {
            out.push(LocalConstant {
                name: e.set,
                kind: LocalKind::EnumSet,
            });
        }
    }
    out
}

/// LV(class): variables typed `class --> T` or `Nodes --> T` (total or partial).
pub fn compute_local_variables(
    mch: &MachineModel,
    class: &str,
) -> Result<Vec<Ident>, Vec<Diagnostic>> {
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for v in &mch.variables {
        let Some(inv) = mch.typing_invariant(v.as_str()) else {
            diags.push(err(
                codes::E_UNTYPED_VARIABLE,
                &SourceSpan::default(),
                format!("variable `{v}` has no `{v}_typing` invariant"),
            ));
            continue;
        };
        if v == "channels" {
            continue;
        }
        if let Some(d) = typing_of(&inv.value, v.as_str()).and_then(function_domain) {
            if d == "Nodes" || d == class {
                out.push(v.clone());
            }
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

/// Splits `{b . b in C1 | b |-> e1} \/ ...` into per-class entries.
fn per_class_union(e: &Expr) -> Option<Vec<TopologyEntry>> {
    match e {
        Expr::Binary(BinOp::Union, l, r) => {
            let mut a = per_class_union(l)?;
            a.extend(per_class_union(r)?);
            Some(a)
        }
        Expr::SetComprehension {
            binder,
            domain,
            filter: None,
            body,
        } => match &**body {
            Expr::Maplet(k, v) if k.as_var() == Some(binder) => Some(vec![TopologyEntry {
                class: domain.as_var()?.clone(),
                binder: binder.clone(),
                expr: (**v).clone(),
            }]),
            _ => None,
        },
        _ => None,
    }
}

/// Everything check_event needs to know about the program.
#[derive(Debug, Clone)]
pub struct Scope {
    pub classes: Vec<Ident>,
    pub sets: Vec<Ident>,
    pub states: Vec<Ident>,
    pub enums: Vec<EnumSet>,
    pub local_constants: BTreeMap<Ident, Vec<LocalConstant>>,
    pub local_variables: BTreeMap<Ident, Vec<Ident>>,
}

impl Scope {
    pub fn is_class(&self, name: &str) -> bool {
        self.classes.iter().any(|c| c == name)
    }

    fn lc(&self, class: &str) -> &[LocalConstant] {
        self.local_constants.get(class).map_or(&[], Vec::as_slice)
    }

    fn lv(&self, class: &str) -> &[Ident] {
        self.local_variables.get(class).map_or(&[], Vec::as_slice)
    }

    /// Whether `name` is applied per process (`name(proc)`) in class `class`.
    pub fn is_local_function(&self, class: &str, name: &str) -> bool {
        self.lv(class).iter().any(|v| v == name)
            || self
                .lc(class)
                .iter()
                .any(|c| c.name == name && c.kind == LocalKind::Function)
    }

    pub fn is_local_scalar(&self, class: &str, name: &str) -> bool {
        self.lc(class)
            .iter()
            .any(|c| c.name == name && c.kind == LocalKind::Scalar)
    }

    pub fn enum_is_local(&self, class: &str, set: &str) -> bool {
        set == "States"
            || self
                .lc(class)
                .iter()
                .any(|c| c.name == set && c.kind == LocalKind::EnumSet)
    }
}

/// Rewrites enum-element and state identifiers to [`Expr::EnumElem`], respecting binders.
fn resolve_enums(e: &Expr, table: &BTreeMap<Ident, Ident>, bound: &mut Vec<Ident>) -> Expr {
    let go = |x: &Expr, bound: &mut Vec<Ident>| resolve_enums(x, table, bound);
    match e {
        Expr::Var(v) if !bound.contains(v) => match table.get(v) {
            Some(set) => Expr::EnumElem {
                set: set.clone(),
                elem: v.clone(),
            },
            None => e.clone(),
        },
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::EnumElem { .. } | Expr::Builtin(_) => {
            e.clone()
        }
        Expr::Apply(a, b) => Expr::apply(go(a, bound), go(b, bound)),
        Expr::Maplet(a, b) => Expr::maplet(go(a, bound), go(b, bound)),
        Expr::Binary(op, a, b) => Expr::binary(*op, go(a, bound), go(b, bound)),
        Expr::Interval(a, b) => Expr::Interval(Box::new(go(a, bound)), Box::new(go(b, bound))),
        Expr::FuncOverride(a, b) => {
            Expr::FuncOverride(Box::new(go(a, bound)), Box::new(go(b, bound)))
        }
        Expr::Not(a) => Expr::Not(Box::new(go(a, bound))),
        Expr::Card(a) => Expr::Card(Box::new(go(a, bound))),
        Expr::PowerSet(a) => Expr::PowerSet(Box::new(go(a, bound))),
        Expr::SetExt(items) => Expr::SetExt(items.iter().map(|x| go(x, bound)).collect()),
        Expr::Partition { set, blocks } => Expr::Partition {
            set: Box::new(go(set, bound)),
            blocks: blocks.iter().map(|x| go(x, bound)).collect(),
        },
        Expr::SetComprehension {
            binder,
            domain,
            filter,
            body,
        } => {
            let domain = go(domain, bound);
            bound.push(binder.clone());
            let filter = filter.as_ref().map(|f| Box::new(go(f, bound)));
            let body = go(body, bound);
            bound.pop();
            Expr::SetComprehension {
                binder: binder.clone(),
                domain: Box::new(domain),
                filter,
                body: Box::new(body),
            }
        }
        Expr::Quantifier {
            kind,
            binders,
            body,
        } => {
            let depth = bound.len();
            let mut nb = Vec::new();
            for (n, d) in binders {
                nb.push((n.clone(), go(d, bound)));
                bound.push(n.clone());
            }
            let body = go(body, bound);
            bound.truncate(depth);
            Expr::Quantifier {
                kind: *kind,
                binders: nb,
                body: Box::new(body),
            }
        }
        Expr::ChannelCall {
            kind,
            src,
            dst,
            msg,
        } => Expr::ChannelCall {
            kind: *kind,
            src: Box::new(go(src, bound)),
            dst: Box::new(go(dst, bound)),
            msg: Box::new(go(msg, bound)),
        },
    }
}

fn resolve_action(a: &Action, table: &BTreeMap<Ident, Ident>, bound: &[Ident]) -> Action {
    let r = |e: &Expr| resolve_enums(e, table, &mut bound.to_vec());
    match a {
        Action::LocalAssign { var, index, rhs } => Action::LocalAssign {
            var: var.clone(),
            index: r(index),
            rhs: r(rhs),
        },
        Action::Assign { var, rhs } => Action::Assign {
            var: var.clone(),
            rhs: r(rhs),
        },
        Action::ChannelAssign { op, src, dst, msg } => Action::ChannelAssign {
            op: *op,
            src: r(src),
            dst: r(dst),
            msg: r(msg),
        },
    }
}

fn resolve_machine(mch: &MachineModel, table: &BTreeMap<Ident, Ident>) -> MachineModel {
    let mut out = mch.clone();
    for inv in &mut out.invariants {
        inv.value = resolve_enums(&inv.value, table, &mut vec![]);
    }
    for a in &mut out.initialisation {
        a.value = resolve_action(&a.value, table, &[]);
    }
    for e in &mut out.events {
        // Parameters shadow enum names.
        let params = e.params.clone();
        for g in &mut e.guards {
            g.value = resolve_enums(&g.value, table, &mut params.clone());
        }
        for a in &mut e.actions {
            a.value = resolve_action(&a.value, table, &params);
        }
    }
    out
}

fn context_checks(
    ctx: &ContextModel,
    classes: &[Ident],
    diags: &mut Vec<Diagnostic>,
) -> Vec<Ident> {
    let span = ctx_span(ctx);
    for s in BUILTIN_SETS {
        if !ctx.sets.iter().any(|x| x == s) {
            diags.push(err(
                codes::E_MISSING_BUILTIN,
                &span,
                format!("carrier set `{s}` must be declared"),
            ));
        }
    }
    for c in BUILTIN_CONSTANTS {
        if !ctx.constants.iter().any(|x| x == c) {
            diags.push(err(
                codes::E_MISSING_BUILTIN,
                &span,
                format!("communication constant `{c}` must be declared"),
            ));
        }
    }
    for a in &ctx.axioms {
        for ann in &a.annotations {
            if !classes.contains(ann) {
                diags.push(err(
                    codes::E_UNKNOWN_ANNOTATION,
                    &a.span,
                    format!("annotation `@{ann}` does not name a process class"),
                ));
            }
        }
    }
    let mut states = Vec::new();
    match ctx.axiom("States") {
        None => diags.push(err(
            codes::E_NO_STATES_AXIOM,
            &span,
            "context has no `States: partition(States, {st1}, ...)` axiom",
        )),
        Some(ax) => match partition_of(ax, "States").and_then(singleton_blocks) {
            None => diags.push(err(
                codes::E_MALFORMED_PARTITION,
                &ax.span,
                "axiom `States` must partition States into singletons",
            )),
            Some(list) => {
                let mut seen = BTreeSet::new();
                for s in &list {
                    if !seen.insert(s) {
                        diags.push(err(
                            codes::E_MALFORMED_PARTITION,
                            &ax.span,
                            format!("state `{s}` listed twice"),
                        ));
                    }
                    if !ctx.constants.contains(s) {
                        diags.push(err(
                            codes::E_UNDECLARED,
                            &ax.span,
                            format!("state `{s}` is not a declared constant"),
                        ));
                    }
                }
                if !list.iter().any(|s| s == DONE) {
                    diags.push(err(
                        codes::E_NO_DONE_STATE,
                        &ax.span,
                        "the States partition must contain `done`",
                    ));
                }
                states = list;
            }
        },
    }
    let mut seen_elems = BTreeSet::new();
    for ax in &ctx.axioms {
        if let Expr::Partition { set, blocks } = &ax.predicate {
            if let (Some(s), Some(elems)) = (set.as_var(), singleton_blocks(blocks)) {
                if s == "Nodes" || classes.contains(s) {
                    continue;
                }
                for e in elems {
                    if !seen_elems.insert(e.clone()) {
                        diags.push(err(
                            codes::E_MALFORMED_PARTITION,
                            &ax.span,
                            format!("element `{e}` belongs to more than one partition block"),
                        ));
                    }
                    if !ctx.constants.contains(&e) {
                        diags.push(err(
                            codes::E_UNDECLARED,
                            &ax.span,
                            format!("`{e}` is not a declared constant"),
                        ));
                    }
                }
            }
        }
    }
    states
}

fn topology(ctx: &ContextModel, classes: &[Ident], diags: &mut Vec<Diagnostic>) -> TopologySpec {
    let span = ctx_span(ctx);
    let (Some(typing), Some(value)) = (ctx.axiom("network_typing"), ctx.axiom("network_value"))
    else {
        diags.push(err(
            codes::E_NO_TOPOLOGY,
            &span,
            "context must define `network_typing` and `network_value` axioms",
        ));
        return TopologySpec { entries: vec![] };
    };
    let typed_ok = matches!(
        typing_of(&typing.predicate, "network"),
        Some(Expr::Binary(BinOp::TotalFn, d, c))
            if d.as_var().is_some_and(|d| d == "Nodes")
                && matches!(&**c, Expr::PowerSet(n) if n.as_var().is_some_and(|n| n == "Nodes"))
    );
    if !typed_ok {
        diags.push(err(
            codes::E_BAD_TOPOLOGY,
            &typing.span,
            "`network_typing` must read `network in Nodes --> POW(Nodes)`",
        ));
    }
    let entries = match &value.predicate {
        Expr::Binary(BinOp::Eq, l, r) if l.as_var().is_some_and(|v| v == "network") => {
            per_class_union(r)
        }
        _ => None,
    };
    let Some(entries) = entries else {
        diags.push(err(
            codes::E_BAD_TOPOLOGY,
            &value.span,
            "`network_value` must be a union of `{proc . proc in PCl | proc |-> expr}` terms",
        ));
        return TopologySpec { entries: vec![] };
    };
    for c in classes {
        let n = entries.iter().filter(|e| &e.class == c).count();
        if n != 1 {
            diags.push(err(
                codes::E_BAD_TOPOLOGY,
                &value.span,
                format!("`network_value` must cover class `{c}` exactly once (found {n})"),
            ));
        }
    }
    for e in &entries {
        if !classes.contains(&e.class) {
            diags.push(err(
                codes::E_BAD_TOPOLOGY,
                &value.span,
                format!("`{}` in `network_value` is not a process class", e.class),
            ));
        }
    }
    TopologySpec { entries }
}

fn value_defs(
    ctx: &ContextModel,
    classes: &[Ident],
    diags: &mut Vec<Diagnostic>,
) -> (Vec<(Ident, ValueDef)>, Vec<Ident>) {
    let mut values = Vec::new();
    let mut unbound = Vec::new();
    for c in &ctx.constants {
        if c == "network" {
            continue;
        }
        let value = ctx.axiom(&format!("{c}_value"));
        match value {
            Some(ax) => {
                let rhs = match &ax.predicate {
                    Expr::Binary(BinOp::Eq, l, r) if l.as_var() == Some(c) => Some(&**r),
                    _ => None,
                };
                let Some(rhs) = rhs else {
                    diags.push(err(
                        codes::E_BAD_VALUE_AXIOM,
                        &ax.span,
                        format!("`{c}_value` must have the form `{c} = expr`"),
                    ));
                    continue;
                };
                match per_class_union(rhs) {
                    Some(entries) if entries.iter().all(|e| classes.contains(&e.class)) => {
                        values.push((c.clone(), ValueDef::PerClass(entries)))
                    }
                    _ => values.push((c.clone(), ValueDef::Scalar(rhs.clone()))),
                }
            }
            None => {
                if ctx.axiom(&format!("{c}_typing")).is_some() {
                    unbound.push(c.clone());
                }
            }
        }
    }
    (values, unbound)
}

fn check_initialisation(
    mch: &MachineModel,
    scope: &Scope,
    diags: &mut Vec<Diagnostic>,
) -> BTreeMap<Ident, Vec<InitEntry>> {
    let mut per_class: BTreeMap<Ident, Vec<InitEntry>> = BTreeMap::new();
    let mut assigned = BTreeSet::new();
    for a in &mch.initialisation {
        match &a.value {
            Action::Assign { var, rhs } => {
                if !mch.variables.contains(var) {
                    diags.push(err(
                        codes::E_UNDECLARED,
                        &a.span,
                        format!("initialisation assigns undeclared variable `{var}`"),
                    ));
                    continue;
                }
                assigned.insert(var.clone());
                if var == "channels" {
                    if rhs.as_var().is_none_or(|v| v != "emptyChannel") {
                        diags.push(err(
                            codes::E_BAD_INITIALISATION,
                            &a.span,
                            "channels must be initialised to `emptyChannel`",
                        ));
                    }
                    continue;
                }
                let Some(entries) = per_class_union(rhs) else {
                    diags.push(err(
                        codes::E_BAD_INITIALISATION,
                        &a.span,
                        format!(
                            "`{var}` must be initialised by `{{proc . proc in PCl | proc |-> expr}}` terms"
                        ),
                    ));
                    continue;
                };
                let mut seen = BTreeSet::new();
                for e in entries {
                    if !scope.is_class(e.class.as_str()) {
                        diags.push(err(
                            codes::E_BAD_INITIALISATION,
                            &a.span,
                            format!("`{}` is not a process class", e.class),
                        ));
                        continue;
                    }
                    if !seen.insert(e.class.clone()) {
                        diags.push(err(
                            codes::E_BAD_INITIALISATION,
                            &a.span,
                            format!("`{var}` is initialised twice for class `{}`", e.class),
                        ));
                        continue;
                    }
                    if !scope.lv(e.class.as_str()).contains(var) {
                        diags.push(err(
                            codes::E_BAD_INITIALISATION,
                            &a.span,
                            format!("`{var}` is not local to class `{}`", e.class),
                        ));
                        continue;
                    }
                    let mut local = locality::LocalityCheck::new(scope, &e.class, &e.binder);
                    local.allow_variables = false;
                    local.check(&e.expr, &a.span, diags);
                    per_class
                        .entry(e.class.clone())
                        .or_default()
                        .push(InitEntry {
                            var: var.clone(),
                            binder: e.binder,
                            expr: e.expr,
                        });
                }
                for c in &scope.classes {
                    if scope.lv(c.as_str()).contains(var) && !seen.contains(c) {
                        diags.push(err(
                            codes::E_BAD_INITIALISATION,
                            &a.span,
                            format!("`{var}` is not initialised for class `{c}`"),
                        ));
                    }
                }
            }
            _ => diags.push(err(
                codes::E_BAD_INITIALISATION,
                &a.span,
                "initialisation actions must assign whole variables",
            )),
        }
    }
    for v in &mch.variables {
        if !assigned.contains(v) {
            diags.push(err(
                codes::E_UNINITIALISED,
                &SourceSpan::default(),
                format!("variable `{v}` is not initialised"),
            ));
        }
    }
    // Keep LV order in each class.
    for (class, entries) in per_class.iter_mut() {
        let lv = scope.lv(class.as_str());
        entries.sort_by_key(|e| lv.iter().position(|v| *v == e.var));
    }
    per_class
}

/// Runs every check and assembles the analyzed program.
pub fn analyze(ctx: &ContextModel, mch: &MachineModel) -> Result<AnalyzedProgram, Vec<Diagnostic>> {
    let (classes, members) = extract_classes(ctx)?;
    let mut diags = Vec::new();
    let states = context_checks(ctx, &classes, &mut diags);
    let topology = topology(ctx, &classes, &mut diags);
    let (values, unbound_constants) = value_defs(ctx, &classes, &mut diags);
    let enums = enum_sets(ctx);

    for v in ["pc", "channels"] {
        if !mch.variables.iter().any(|x| x == v) {
            diags.push(err(
                codes::E_MISSING_VARIABLE,
                &SourceSpan::default(),
                format!("machine must declare variable `{v}`"),
            ));
        }
    }

    let mut local_constants = BTreeMap::new();
    let mut local_variables = BTreeMap::new();
    for c in &classes {
        local_constants.insert(c.clone(), compute_local_constants(ctx, c.as_str()));
        match compute_local_variables(mch, c.as_str()) {
            Ok(lv) => {
                if mch.variables.iter().any(|x| x == "pc") && !lv.iter().any(|x| x == "pc") {
                    diags.push(err(
                        codes::E_UNTYPED_VARIABLE,
                        &mch.typing_invariant("pc")
                            .map(|i| i.span.clone())
                            .unwrap_or_default(),
                        "`pc` must be typed `pc in Nodes --> States`",
                    ));
                }
                local_variables.insert(c.clone(), lv);
            }
            Err(ds) => {
                for d in ds {
                    if !diags.contains(&d) {
                        diags.push(d);
                    }
                }
            }
        }
    }

    let mut table = BTreeMap::new();
    for e in &enums {
        for el in &e.elems {
            table.insert(el.clone(), e.set.clone());
        }
    }
    for s in &states {
        table.insert(s.clone(), Ident::from("States"));
    }
    let machine = resolve_machine(mch, &table);

    let scope = Scope {
        classes: classes.clone(),
        sets: ctx.sets.clone(),
        states: states.clone(),
        enums: enums.clone(),
        local_constants,
        local_variables,
    };

    let init = check_initialisation(&machine, &scope, &mut diags);

    let mut infos: Vec<EventInfo> = Vec::new();
    for e in &machine.events {
        match check_event(e, &scope) {
            Ok(info) => infos.push(info),
            Err(ds) => diags.extend(ds),
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }

    let class_infos = classes
        .iter()
        .map(|c| {
            let evs: Vec<&EventInfo> = infos.iter().filter(|i| &i.class == c).collect();
            let class_states: Vec<Ident> = states
                .iter()
                .filter(|s| *s == DONE || evs.iter().any(|e| &e.state == *s))
                .cloned()
                .collect();
            let events_by_state = class_states
                .iter()
                .filter(|s| evs.iter().any(|e| &e.state == *s))
                .map(|s| {
                    (
                        s.clone(),
                        evs.iter()
                            .filter(|e| &e.state == s)
                            .map(|e| (*e).clone())
                            .collect(),
                    )
                })
                .collect();
            ProcessClassInfo {
                name: c.clone(),
                explicit_members: members.get(c).cloned().unwrap_or_default(),
                local_constants: scope.lc(c.as_str()).to_vec(),
                local_variables: scope.lv(c.as_str()).to_vec(),
                states: class_states,
                events_by_state,
                init: init.get(c).cloned().unwrap_or_default(),
            }
        })
        .collect();

    Ok(AnalyzedProgram {
        context: ctx.clone(),
        machine,
        classes: class_infos,
        topology,
        enums,
        states,
        values,
        unbound_constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_context, parse_machine};
    use std::path::Path;

    const CTX: &str = include_str!("../../fixtures/request_answer.lbc");
    const MCH: &str = include_str!("../../fixtures/request_answer.lbm");

    fn program() -> AnalyzedProgram {
        let ctx = parse_context(CTX, Path::new("request_answer.lbc")).unwrap();
        let mch = parse_machine(MCH, Path::new("request_answer.lbm")).unwrap();
        analyze(&ctx, &mch).unwrap_or_else(|d| panic!("{d:#?}"))
    }

    fn names(v: &[LocalConstant]) -> Vec<&str> {
        v.iter().map(|c| c.name.as_str()).collect()
    }

    fn analyze_with(mch_edit: impl Fn(&str) -> String) -> Vec<Diagnostic> {
        let ctx = parse_context(CTX, Path::new("c.lbc")).unwrap();
        let mch = parse_machine(&mch_edit(MCH), Path::new("m.lbm")).unwrap();
        analyze(&ctx, &mch).unwrap_err()
    }

    #[test]
    fn fixture_classes_and_states() {
        let p = program();
        let names: Vec<&str> = p.classes.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["P", "Q"]);
        let pc = p.class("P").unwrap();
        assert_eq!(pc.explicit_members, [Ident::from("p")]);
        assert_eq!(pc.states, [Ident::from("sr"), "wa".into(), "done".into()]);
        let q = p.class("Q").unwrap();
        assert!(q.explicit_members.is_empty());
        assert_eq!(q.states, [Ident::from("wr"), "done".into()]);
        assert_eq!(p.unbound_constants, [Ident::from("availableResources")]);
        assert_eq!(p.holes(), ["NQ", "availableResources"]);
    }

    #[test]
    fn fixture_local_symbols() {
        let p = program();
        let pc = p.class("P").unwrap();
        let q = p.class("Q").unwrap();
        assert_eq!(names(&pc.local_constants), ["network", "MessagePrefixes"]);
        assert_eq!(
            names(&q.local_constants),
            ["network", "availableResources", "MessagePrefixes"]
        );
        assert_eq!(pc.local_variables, [Ident::from("pc"), "result".into()]);
        assert_eq!(q.local_variables, [Ident::from("pc")]);
    }

    #[test]
    fn fixture_event_classification() {
        let p = program();
        let pc = p.class("P").unwrap();
        let sr: Vec<_> = pc
            .events_in("sr")
            .iter()
            .map(|e| (e.name().as_str(), e.kind))
            .collect();
        assert_eq!(
            sr,
            [
                ("sendRequest", EventKind::Send),
                ("stopSending", EventKind::Internal)
            ]
        );
        let wa = pc.events_in("wa");
        assert_eq!(wa[0].name(), "receiveAnswer");
        assert_eq!(wa[0].kind, EventKind::Receive);
        assert_eq!(wa[0].match_guards.len(), 1);
        let recv = wa[0].receive.as_ref().unwrap();
        assert_eq!(recv.source_pattern, Expr::var("source"));
        assert!(matches!(recv.msg_pattern, Expr::Maplet(..)));
        let send = &pc.events_in("sr")[0];
        assert_eq!(send.history_guards.len(), 1);
        assert!(send.general_guards.is_empty());
    }

    #[test]
    fn enum_elements_resolved() {
        let p = program();
        let ev = p.machine.event("sendRequest").unwrap();
        let mut found = false;
        for g in &ev.guards {
            g.value.walk(&mut |e| {
                if let Expr::EnumElem { set, elem } = e {
                    if set == "MessagePrefixes" && elem == "request" {
                        found = true;
                    }
                }
            });
        }
        assert!(found);
    }

    #[test]
    fn negative_codes() {
        let cases: Vec<(&str, &str, &str)> = vec![
            (
                "@grd3: card(result(proc)) = card(network(proc))",
                "@grd3: card(result(proc)) = card(network(p))",
                codes::E_NONLOCAL_REF,
            ),
            (
                "@grd3: pc(proc) = sr\n    @grd4: sent",
                "@grd3: TRUE = TRUE\n    @grd4: sent",
                codes::E_NO_PC_GUARD,
            ),
            (
                "@grd2: q in network(proc)\n    @grd3: pc(proc) = sr",
                "@grd2: pc(proc) = sr\n    @grd3: q /= proc",
                codes::E_PARAM_UNTYPED,
            ),
            (
                "@act2: result(proc) := result(proc) <+ {source |-> r}",
                "@act2: result(source) := {}",
                codes::E_FOREIGN_ASSIGN,
            ),
            (
                "@grd5: msg = request\n",
                "@grd5: msg = request\n    @grd6: availableResources(proc) > 0\n",
                codes::E_RECV_GENERAL_GUARD,
            ),
        ];
        for (from, to, code) in cases {
            assert!(MCH.contains(from), "{from}");
            let diags = analyze_with(|m| m.replacen(from, to, 1));
            assert!(
                diags.iter().any(|d| d.code == code),
                "{code} not in {diags:#?}"
            );
        }
    }

    #[test]
    fn history_forms() {
        let diags = analyze_with(|m| {
            m.replacen(
                "sent(channels |-> (proc |-> q) |-> request) = 0",
                "sent(channels |-> (proc |-> q) |-> request) = 2",
                1,
            )
        });
        assert!(diags.iter().any(|d| d.code == codes::E_UNSUPPORTED_HISTORY));
        let diags = analyze_with(|m| {
            m.replacen(
                "sent(channels |-> (proc |-> q) |-> request) = 0",
                "sent(channels |-> (q |-> proc) |-> request) = 0",
                1,
            )
        });
        assert!(diags.iter().any(|d| d.code == codes::E_CHANNEL_ORIENTATION));
    }

    #[test]
    fn two_channel_actions_are_rejected() {
        let diags = analyze_with(|m| {
            m.replacen(
                "    @act1: channels := send(channels |-> (proc |-> q) |-> request)\n",
                "    @act1: channels := send(channels |-> (proc |-> q) |-> request)\n    @act2: channels := receive(channels |-> (q |-> proc) |-> request)\n",
                1,
            )
        });
        assert!(diags.iter().any(|d| d.code == codes::E_AMBIGUOUS_KIND));
    }

    #[test]
    fn missing_topology_and_done() {
        let ctx = parse_context(
            &CTX.replace("  @network_value: network = {proc . proc in P | proc |-> Q} \\/ {q . q in Q | q |-> {p}}\n", ""),
            Path::new("c.lbc"),
        )
        .unwrap();
        let mch = parse_machine(MCH, Path::new("m.lbm")).unwrap();
        let diags = analyze(&ctx, &mch).unwrap_err();
        assert!(
            diags.iter().any(|d| d.code == codes::E_NO_TOPOLOGY),
            "{diags:#?}"
        );

        let ctx =
            parse_context(&CTX.replace("{wr}, {done})", "{wr})"), Path::new("c.lbc")).unwrap();
        let diags = analyze(&ctx, &mch).unwrap_err();
        assert!(diags.iter().any(|d| d.code == codes::E_NO_DONE_STATE));
    }

    #[test]
    fn extract_classes_shapes() {
        let base = "CONTEXT C SETS Nodes CONSTANTS A B AXIOMS @Nodes: partition(Nodes, A) END";
        let ctx = parse_context(base, Path::new("c")).unwrap();
        assert_eq!(extract_classes(&ctx).unwrap().0, [Ident::from("A")]);
        let dup = base.replace("partition(Nodes, A)", "partition(Nodes, A, A)");
        let ctx = parse_context(&dup, Path::new("c")).unwrap();
        assert_eq!(
            extract_classes(&ctx).unwrap_err()[0].code,
            codes::E_MALFORMED_PARTITION
        );
        let none = base.replace("@Nodes: partition(Nodes, A)", "@x: A = B");
        let ctx = parse_context(&none, Path::new("c")).unwrap();
        assert_eq!(
            extract_classes(&ctx).unwrap_err()[0].code,
            codes::E_NO_NODES_AXIOM
        );
    }

    #[test]
    fn local_constants_empty_without_functions() {
        let ctx = parse_context(
            "CONTEXT C SETS Nodes CONSTANTS A k AXIOMS @Nodes: partition(Nodes, A) @k_typing: k in NAT END",
            Path::new("c"),
        )
        .unwrap();
        assert!(compute_local_constants(&ctx, "A").is_empty());
    }
}
