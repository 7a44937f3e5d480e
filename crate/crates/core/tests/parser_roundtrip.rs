use std::path::Path;

use localeb::ast::{BinOp, BuiltinSet, ChannelKind, Expr, Ident, QuantKind};
use localeb::parser::{pretty_context, pretty_expr, pretty_machine};
use localeb::{parse_context, parse_expr, parse_machine};
use proptest::prelude::*;

mod common;

fn var() -> impl Strategy<Value = Expr> {
    prop::sample::select(vec!["a", "b", "x", "y", "S", "T", "f", "g", "proc"]).prop_map(Expr::var)
}

fn binder() -> impl Strategy<Value = Ident> {
    prop::sample::select(vec!["i", "j", "k"]).prop_map(Ident::from)
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        4 => var(),
        2 => (0i64..1000).prop_map(Expr::Int),
        1 => any::<bool>().prop_map(Expr::Bool),
        1 => prop::sample::select(vec![BuiltinSet::Nat, BuiltinSet::Nat1, BuiltinSet::Int, BuiltinSet::Bool])
            .prop_map(Expr::Builtin),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    use BinOp::*;
    prop::sample::select(vec![
        Add, Sub, Mul, Div, Eq, Neq, Lt, Le, Gt, Ge, In, NotIn, Subset, Union, Inter, Diff, And,
        Or, Implies, Product, TotalFn, PartialFn,
    ])
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 4, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (var(), inner.clone()).prop_map(|(f, a)| Expr::apply(f, a)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::maplet(l, r)),
            inner.clone().prop_map(|x| Expr::Not(Box::new(x))),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Expr::SetExt),
            inner.clone().prop_map(move |x| Expr::Card(b(x))),
            inner.clone().prop_map(|x| Expr::PowerSet(Box::new(x))),
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| Expr::Interval(Box::new(l), Box::new(r))),
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| Expr::FuncOverride(Box::new(l), Box::new(r))),
            (
                binder(),
                inner.clone(),
                prop::option::of(inner.clone()),
                inner.clone()
            )
                .prop_map(|(binder, domain, filter, body)| Expr::SetComprehension {
                    binder,
                    domain: Box::new(domain),
                    filter: filter.map(Box::new),
                    body: Box::new(body),
                }),
            (any::<bool>(), binder(), inner.clone(), inner.clone()).prop_map(
                |(all, n, d, body)| {
                    Expr::Quantifier {
                        kind: if all {
                            QuantKind::Forall
                        } else {
                            QuantKind::Exists
                        },
                        binders: vec![(n, d)],
                        body: Box::new(body),
                    }
                }
            ),
            (
                prop::sample::select(vec![
                    ChannelKind::Sent,
                    ChannelKind::Received,
                    ChannelKind::InChannel
                ]),
                var(),
                var(),
                inner.clone()
            )
                .prop_map(|(kind, s, d, m)| Expr::ChannelCall {
                    kind,
                    src: Box::new(s),
                    dst: Box::new(d),
                    msg: Box::new(m),
                }),
            (inner.clone(), prop::collection::vec(inner, 1..3)).prop_map(|(s, blocks)| {
                Expr::Partition {
                    set: Box::new(s),
                    blocks,
                }
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn printed_expressions_reparse_identically(e in expr()) {
        let text = pretty_expr(&e);
        let back = parse_expr(&text).map_err(|d| TestCaseError::fail(format!("{text}: {d:?}")))?;
        prop_assert_eq!(&back, &e, "printed as {}", text);
    }

    #[test]
    fn printing_is_a_fixpoint(e in expr()) {
        let once = pretty_expr(&e);
        let twice = pretty_expr(&parse_expr(&once).unwrap());
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn fixture_files_roundtrip() {
    let ctx = parse_context(&common::read("request_answer.lbc"), Path::new("c.lbc")).unwrap();
    let again = parse_context(&pretty_context(&ctx), Path::new("c.lbc")).unwrap();
    assert_eq!(ctx.axioms.len(), again.axioms.len());
    for (a, b) in ctx.axioms.iter().zip(&again.axioms) {
        assert_eq!(a.label, b.label);
        assert_eq!(a.predicate, b.predicate);
        assert_eq!(a.annotations, b.annotations);
    }
    assert_eq!((&ctx.sets, &ctx.constants), (&again.sets, &again.constants));

    let mch = parse_machine(&common::read("request_answer.lbm"), Path::new("m.lbm")).unwrap();
    let again = parse_machine(&pretty_machine(&mch), Path::new("m.lbm")).unwrap();
    assert_eq!(mch.variables, again.variables);
    assert_eq!(mch.events.len(), again.events.len());
    for (a, b) in mch.events.iter().zip(&again.events) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.params, b.params);
        let ga: Vec<_> = a.guards.iter().map(|g| (&g.label, &g.value)).collect();
        let gb: Vec<_> = b.guards.iter().map(|g| (&g.label, &g.value)).collect();
        assert_eq!(ga, gb);
        let aa: Vec<_> = a.actions.iter().map(|x| (&x.label, &x.value)).collect();
        let ab: Vec<_> = b.actions.iter().map(|x| (&x.label, &x.value)).collect();
        assert_eq!(aa, ab);
    }
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_machine(
        "MACHINE M SEES C VARIABLES x INVARIANTS @i: x in NAT EVENTS\n  event e any where",
        Path::new("bad.lbm"),
    )
    .unwrap_err();
    assert_eq!(err[0].code, "E_SYNTAX");
    assert_eq!(err[0].span.line, 2);
    assert!(parse_expr("a +").is_err());
    assert!(parse_expr("{a, }").is_err());
}
