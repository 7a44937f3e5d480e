use std::collections::BTreeSet;

use localeb::analyzer::LocalKind;
use localeb::ast::{Action, Expr, Ident};
use localeb::AnalyzedProgram;

mod common;

const NEGATIVE: &[(&str, &str)] = &[
    ("nonlocal_guard.lbm", "E_NONLOCAL_REF"),
    ("missing_pc_guard.lbm", "E_NO_PC_GUARD"),
    ("untyped_param.lbm", "E_PARAM_UNTYPED"),
    ("foreign_assign.lbm", "E_FOREIGN_ASSIGN"),
    ("receive_general_guard.lbm", "E_RECV_GENERAL_GUARD"),
];

#[test]
fn each_negative_variant_has_exactly_its_code() {
    for (file, code) in NEGATIVE {
        let diags = common::program_from(&common::read(&format!("negative/{file}"))).unwrap_err();
        let codes: BTreeSet<&str> = diags.iter().map(|d| d.code).collect();
        assert_eq!(codes, BTreeSet::from([*code]), "{file}");
        assert!(diags.iter().all(|d| d.span.line > 1), "{file}: {diags:?}");
    }
}

#[test]
fn fixture_is_clean() {
    let prog = common::program();
    assert_eq!(prog.classes.len(), 2);
    assert_eq!(prog.holes(), ["NQ", "availableResources"]);
}

/// Symbols an event of `class` may mention, computed from the program tables.
fn readable(prog: &AnalyzedProgram, class: &str) -> (BTreeSet<Ident>, BTreeSet<Ident>) {
    let info = prog.class(class).unwrap();
    let functions: BTreeSet<Ident> = info
        .local_constants
        .iter()
        .filter(|c| c.kind == LocalKind::Function)
        .map(|c| c.name.clone())
        .chain(info.local_variables.iter().cloned())
        .collect();
    let mut free: BTreeSet<Ident> = info
        .local_constants
        .iter()
        .filter(|c| c.kind != LocalKind::Function)
        .map(|c| c.name.clone())
        .collect();
    free.extend(prog.classes.iter().map(|c| c.name.clone()));
    free.extend(["Nodes", "States", "Messages"].map(Ident::from));
    (functions, free)
}

/// Independent locality predicate: every per-process function is applied to
/// the executing process, and every other free name is a parameter, a
/// binder or a class-level symbol.
fn local_expr(
    e: &Expr,
    proc: &Ident,
    bound: &[Ident],
    functions: &BTreeSet<Ident>,
    free: &BTreeSet<Ident>,
) -> bool {
    match e {
        Expr::Apply(f, arg) => match f.as_var() {
            Some(name) if functions.contains(name) => arg.as_var() == Some(proc),
            _ => {
                local_expr(f, proc, bound, functions, free)
                    && local_expr(arg, proc, bound, functions, free)
            }
        },
        Expr::Var(v) => bound.contains(v) || free.contains(v),
        Expr::SetComprehension {
            binder,
            domain,
            filter,
            body,
        } => {
            let mut inner = bound.to_vec();
            inner.push(binder.clone());
            local_expr(domain, proc, bound, functions, free)
                && filter
                    .as_ref()
                    .is_none_or(|f| local_expr(f, proc, &inner, functions, free))
                && local_expr(body, proc, &inner, functions, free)
        }
        Expr::Quantifier { binders, body, .. } => {
            let mut inner = bound.to_vec();
            for (n, d) in binders {
                if !local_expr(d, proc, &inner, functions, free) {
                    return false;
                }
                inner.push(n.clone());
            }
            local_expr(body, proc, &inner, functions, free)
        }
        other => other
            .children()
            .into_iter()
            .all(|c| local_expr(c, proc, bound, functions, free)),
    }
}

#[test]
fn accepted_events_satisfy_an_independent_locality_check() {
    let prog = common::program();
    let mut checked = 0;
    for class in &prog.classes {
        let (functions, free) = readable(&prog, class.name.as_str());
        for info in class.events() {
            let proc = &info.proc_param;
            let params = &info.decl.params;
            for g in &info.decl.guards {
                assert!(
                    local_expr(&g.value, proc, params, &functions, &free),
                    "{}: guard {} is not local",
                    info.name(),
                    g.label
                );
            }
            for a in &info.decl.actions {
                match &a.value {
                    Action::LocalAssign { var, index, rhs } => {
                        assert!(class.local_variables.contains(var));
                        assert_eq!(index.as_var(), Some(proc));
                        assert!(local_expr(rhs, proc, params, &functions, &free));
                    }
                    Action::ChannelAssign { src, dst, msg, .. } => {
                        for part in [src, dst, msg] {
                            assert!(local_expr(part, proc, params, &functions, &free));
                        }
                    }
                    Action::Assign { .. } => panic!("whole-variable assignment in an event"),
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, prog.machine.events.len());
}

#[test]
fn the_independent_check_rejects_the_nonlocal_variant() {
    let prog = common::program();
    let (functions, free) = readable(&prog, "P");
    let proc = Ident::from("proc");
    let grd3 = |file: &str| {
        let mch =
            localeb::parse_machine(&common::read(file), std::path::Path::new("m.lbm")).unwrap();
        let terminate = mch.event("terminate").unwrap().clone();
        let g = terminate
            .guards
            .iter()
            .find(|g| g.label == "grd3")
            .unwrap()
            .value
            .clone();
        local_expr(&g, &proc, &terminate.params, &functions, &free)
    };
    assert!(grd3("request_answer.lbm"));
    assert!(!grd3("negative/nonlocal_guard.lbm"));
}

#[test]
fn states_sets_and_kinds() {
    let prog = common::program();
    let p = prog.class("P").unwrap();
    let q = prog.class("Q").unwrap();
    assert_eq!(p.states, ["sr", "wa", "done"].map(Ident::from));
    assert_eq!(q.states, ["wr", "done"].map(Ident::from));
    assert_eq!(p.explicit_members, [Ident::from("p")]);
    assert!(!q.is_enumerated());
    let lc: Vec<&str> = q.local_constants.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(lc, ["network", "availableResources", "MessagePrefixes"]);
    assert_eq!(p.local_variables, ["pc", "result"].map(Ident::from));
    assert_eq!(q.local_variables, [Ident::from("pc")]);
}

#[test]
fn unknown_state_and_multiple_pc_guards() {
    let base = common::read("request_answer.lbm");
    let diags = common::program_from(&base.replacen(
        "@act1: pc(proc) := wa",
        "@act1: pc(proc) := nowhere",
        1,
    ))
    .unwrap_err();
    assert!(
        diags.iter().any(|d| d.code == "E_UNKNOWN_STATE"),
        "{diags:?}"
    );
    let diags = common::program_from(&base.replacen(
        "    @grd2: pc(proc) = sr\n",
        "    @grd2: pc(proc) = sr\n    @grd9: pc(proc) = wa\n",
        1,
    ))
    .unwrap_err();
    assert!(
        diags.iter().any(|d| d.code == "E_MULTI_PC_GUARD"),
        "{diags:?}"
    );
}
