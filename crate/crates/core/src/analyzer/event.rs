use std::collections::BTreeSet;

use crate::ast::*;
use crate::diag::{codes, Diagnostic, SourceSpan};

use super::locality::LocalityCheck;
use super::{EventInfo, ReceiveInfo, Scope};

/// `sent(...) > 0`, `sent(...) = 0` and the `received` forms.
pub(crate) fn history_call(g: &Expr) -> Option<(ChannelKind, &Expr, &Expr, &Expr)> {
    match g {
        Expr::Binary(BinOp::Gt | BinOp::Eq, l, r) if **r == Expr::Int(0) => match &**l {
            Expr::ChannelCall {
                kind: kind @ (ChannelKind::Sent | ChannelKind::Received),
                src,
                dst,
                msg,
            } => Some((*kind, src, dst, msg)),
            _ => None,
        },
        _ => None,
    }
}

/// `pc(x) = rhs`.
fn pc_guard(g: &Expr) -> Option<(&Expr, &Expr)> {
    match g {
        Expr::Binary(BinOp::Eq, l, r) => match &**l {
            Expr::Apply(f, arg) if f.as_var().is_some_and(|v| v == "pc") => Some((arg, r)),
            _ => None,
        },
        _ => None,
    }
}

fn contains_history(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| {
        if matches!(x, Expr::ChannelCall { .. }) {
            found = true;
        }
    });
    found
}

/// Checks every channel query inside a guard: only the `> 0` / `= 0` history
/// forms are accepted, oriented from the executing process.
fn check_channel_queries(e: &Expr, proc: &Ident, span: &SourceSpan, diags: &mut Vec<Diagnostic>) {
    if let Some((kind, src, dst, msg)) = history_call(e) {
        let own = match kind {
            ChannelKind::Sent => src,
            _ => dst,
        };
        if own.as_var() != Some(proc) {
            let side = if kind == ChannelKind::Sent {
                "source"
            } else {
                "destination"
            };
            diags.push(Diagnostic::error(
                codes::E_CHANNEL_ORIENTATION,
                span.clone(),
                format!("`{}` query must use `{proc}` as its {side}", kind.name()),
            ));
        }
        for part in [src, dst, msg] {
            check_channel_queries(part, proc, span, diags);
        }
        return;
    }
    if let Expr::ChannelCall { kind, .. } = e {
        let msg = if kind.is_query() {
            format!(
                "only `{}(...) > 0` and `{}(...) = 0` history guards are supported",
                kind.name(),
                kind.name()
            )
        } else {
            format!(
                "`{}` may only appear in a `channels :=` action",
                kind.name()
            )
        };
        diags.push(Diagnostic::error(
            codes::E_UNSUPPORTED_HISTORY,
            span.clone(),
            msg,
        ));
    }
    for c in e.children() {
        check_channel_queries(c, proc, span, diags);
    }
}

fn process_param(e: &EventDecl, scope: &Scope) -> Result<(Ident, Ident), Diagnostic> {
    let candidates: Vec<(Ident, Ident)> = e
        .params
        .iter()
        .filter_map(|p| {
            let g = e.typing_guard(p.as_str())?;
            let (_, dom) = g.value.as_membership()?;
            let c = dom.as_var().filter(|c| scope.is_class(c.as_str()))?;
            Some((p.clone(), c.clone()))
        })
        .collect();
    if let Some(found) = candidates.iter().find(|(p, _)| p == "proc") {
        return Ok(found.clone());
    }
    match candidates.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Diagnostic::error(
            codes::E_NO_PROC_PARAM,
            e.span.clone(),
            format!(
                "event `{}` needs a process parameter typed `proc in PCl` for a process class PCl",
                e.name
            ),
        )),
        _ => Err(Diagnostic::error(
            codes::E_NO_PROC_PARAM,
            e.span.clone(),
            format!(
                "event `{}` has several class-typed parameters; name the executing one `proc`",
                e.name
            ),
        )),
    }
}

/// Checks one event against the locality and shape rules and classifies it.
pub fn check_event(e: &EventDecl, scope: &Scope) -> Result<EventInfo, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let kind = match classify_event(e) {
        Ok(k) => k,
        Err(_) => {
            diags.push(Diagnostic::error(
                codes::E_AMBIGUOUS_KIND,
                e.span.clone(),
                format!("event `{}` has both a send and a receive action", e.name),
            ));
            EventKind::Internal
        }
    };
    let (proc, class) = match process_param(e, scope) {
        Ok(x) => x,
        Err(d) => {
            diags.push(d);
            return Err(diags);
        }
    };
    let local = LocalityCheck::new(scope, &class, &proc).with_params(&e.params);

    let mut typing_labels = BTreeSet::new();
    let mut typed_params = Vec::new();
    for p in &e.params {
        match e.typing_guard(p.as_str()) {
            Some(g) => {
                typing_labels.insert(g.label.clone());
                if p != &proc {
                    let (_, dom) = g.value.as_membership().expect("typing guard shape");
                    typed_params.push((p.clone(), dom.clone()));
                }
            }
            None => diags.push(Diagnostic::error(
                codes::E_PARAM_UNTYPED,
                e.span.clone(),
                format!(
                    "parameter `{p}` of event `{}` has no typing guard `{p} in S`",
                    e.name
                ),
            )),
        }
    }

    // Receive action parts that are bare parameters can be constrained by match guards.
    let receive_action = e.actions.iter().find_map(|a| match &a.value {
        Action::ChannelAssign {
            op: ChannelOp::Receive,
            src,
            msg,
            ..
        } => Some((src.clone(), msg.clone())),
        _ => None,
    });
    let mut matchable: Vec<Ident> = Vec::new();
    if let Some((src, msg)) = &receive_action {
        for part in [src, msg] {
            if let Some(v) = part
                .as_var()
                .filter(|v| e.params.contains(v) && **v != proc)
            {
                matchable.push(v.clone());
            }
        }
    }

    let mut state: Option<Ident> = None;
    let mut general_guards = Vec::new();
    let mut history_guards = Vec::new();
    let mut match_guards: Vec<(Ident, Expr)> = Vec::new();
    for g in &e.guards {
        let span = &g.span;
        if typing_labels.contains(&g.label) {
            let mut typing = LocalityCheck::new(scope, &class, &proc).with_params(&e.params);
            typing.allow_sets = true;
            let (_, dom) = g.value.as_membership().expect("typing guard shape");
            typing.check(dom, span, &mut diags);
            continue;
        }
        if let Some((_, rhs)) = pc_guard(&g.value).filter(|(a, _)| a.as_var() == Some(&proc)) {
            let st = match rhs {
                Expr::EnumElem { set, elem } if set == "States" => Some(elem.clone()),
                other => {
                    diags.push(Diagnostic::error(
                        codes::E_UNKNOWN_STATE,
                        span.clone(),
                        format!(
                            "`{}` is not a member of the States partition",
                            crate::parser::pretty_expr(other)
                        ),
                    ));
                    None
                }
            };
            if state.is_some() {
                diags.push(Diagnostic::error(
                    codes::E_MULTI_PC_GUARD,
                    span.clone(),
                    format!(
                        "event `{}` has more than one `pc({proc}) = st` guard",
                        e.name
                    ),
                ));
            } else if let Some(st) = st {
                state = Some(st);
            } else {
                state = Some(Ident::from(super::DONE));
            }
            continue;
        }
        if let Some((x, pat)) = match &g.value {
            Expr::Binary(BinOp::Eq, l, r) => l.as_var().map(|x| (x, &**r)),
            _ => None,
        } {
            if kind == EventKind::Receive
                && matchable.contains(x)
                && !match_guards.iter().any(|(m, _)| m == x)
            {
                local.check(pat, span, &mut diags);
                match_guards.push((x.clone(), pat.clone()));
                continue;
            }
        }
        check_channel_queries(&g.value, &proc, span, &mut diags);
        local.check(&g.value, span, &mut diags);
        if kind == EventKind::Receive {
            diags.push(Diagnostic::error(
                codes::E_RECV_GENERAL_GUARD,
                span.clone(),
                format!(
                    "receive event `{}` may only carry typing, pc and message-matching guards",
                    e.name
                ),
            ));
        }
        if contains_history(&g.value) {
            history_guards.push(g.value.clone());
        } else {
            general_guards.push(g.value.clone());
        }
    }
    if state.is_none() {
        diags.push(Diagnostic::error(
            codes::E_NO_PC_GUARD,
            e.span.clone(),
            format!("event `{}` has no guard `pc({proc}) = st`", e.name),
        ));
    }

    let mut assigned = BTreeSet::new();
    let mut sends = 0;
    let mut receives = 0;
    for a in &e.actions {
        let span = &a.span;
        match &a.value {
            Action::LocalAssign { var, index, rhs } => {
                if index.as_var() != Some(&proc) {
                    diags.push(Diagnostic::error(
                        codes::E_FOREIGN_ASSIGN,
                        span.clone(),
                        format!(
                            "`{var}({})` assigns another process's value; only `{var}({proc})` is allowed",
                            crate::parser::pretty_expr(index)
                        ),
                    ));
                }
                if !scope.lv(class.as_str()).contains(var) {
                    diags.push(Diagnostic::error(
                        codes::E_NONLOCAL_REF,
                        span.clone(),
                        format!("`{var}` is not a local variable of class `{class}`"),
                    ));
                }
                if !assigned.insert(var.clone()) {
                    diags.push(Diagnostic::error(
                        codes::E_DUPLICATE_ASSIGN,
                        span.clone(),
                        format!("`{var}` is assigned twice in event `{}`", e.name),
                    ));
                }
                if var == "pc" && !matches!(rhs, Expr::EnumElem { set, .. } if set == "States") {
                    diags.push(Diagnostic::error(
                        codes::E_UNKNOWN_STATE,
                        span.clone(),
                        format!(
                            "`pc({proc})` must be assigned a member of States, not `{}`",
                            crate::parser::pretty_expr(rhs)
                        ),
                    ));
                } else {
                    check_channel_queries(rhs, &proc, span, &mut diags);
                    local.check(rhs, span, &mut diags);
                }
            }
            Action::Assign { var, .. } => diags.push(Diagnostic::error(
                codes::E_BAD_ACTION,
                span.clone(),
                format!("`{var} := ...` is not of the form `{var}({proc}) := expr`"),
            )),
            Action::ChannelAssign { op, src, dst, msg } => {
                let (count, own, side) = match op {
                    ChannelOp::Send => (&mut sends, src, "source"),
                    ChannelOp::Receive => (&mut receives, dst, "destination"),
                };
                *count += 1;
                if *count == 2 {
                    diags.push(Diagnostic::error(
                        codes::E_MULTI_CHANNEL_ACTION,
                        span.clone(),
                        format!("event `{}` has more than one channel action", e.name),
                    ));
                }
                if own.as_var() != Some(&proc) {
                    diags.push(Diagnostic::error(
                        codes::E_CHANNEL_ORIENTATION,
                        span.clone(),
                        format!("channel action must use `{proc}` as its {side}"),
                    ));
                }
                for part in [src, dst, msg] {
                    check_channel_queries(part, &proc, span, &mut diags);
                    local.check(part, span, &mut diags);
                }
            }
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    let receive = receive_action.map(|(source, msg)| {
        let pattern = |e: &Expr| {
            e.as_var()
                .and_then(|v| match_guards.iter().find(|(m, _)| m == v))
                .map_or_else(|| e.clone(), |(_, p)| p.clone())
        };
        ReceiveInfo {
            source_pattern: pattern(&source),
            msg_pattern: pattern(&msg),
            source,
            msg,
        }
    });
    Ok(EventInfo {
        decl: e.clone(),
        kind,
        class,
        proc_param: proc,
        state: state.expect("pc guard present"),
        typed_params,
        general_guards,
        history_guards,
        match_guards,
        receive,
    })
}
