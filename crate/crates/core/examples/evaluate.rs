//! Evaluates a few set-theoretic expressions over a finite model.
//!
//! ```text
//! cargo run --example evaluate
//! ```

use std::collections::BTreeMap;

use localeb::ast::Ident;
use localeb::parse_expr;
use localeb::sim::{Env, Value};

fn main() {
    let procs = |names: &[&str]| Value::set(names.iter().map(|n| Value::Proc(Ident::from(*n))));
    let globals: BTreeMap<Ident, Value> = [
        (Ident::from("P"), procs(&["p"])),
        (Ident::from("Q"), procs(&["q1", "q2", "q3"])),
    ]
    .into_iter()
    .chain(["p", "q1", "q2", "q3"].map(|n| (Ident::from(n), Value::Proc(Ident::from(n)))))
    .collect();
    let empty = BTreeMap::new();
    let channels = BTreeMap::new();
    let mut env = Env {
        globals: &globals,
        vars: &empty,
        channels: &channels,
        atoms: &empty,
        locals: Vec::new(),
    };
    for src in [
        "{proc . proc in P | proc |-> Q} \\/ {q . q in Q | q |-> {p}}",
        "card(Q) * 2 + 1",
        "{x . x in 1 .. 10 & x * x < 30 | x * x}",
        "!q . q in Q => q /= p",
        "{q1 |-> 5} <+ {q1 |-> 7}",
    ] {
        match parse_expr(src) {
            Ok(e) => match env.eval(&e) {
                Ok(v) => println!("{src}\n  = {v}"),
                Err(err) => println!("{src}\n  ! {err}"),
            },
            Err(d) => println!("{src}\n  ! {}", d[0].message),
        }
    }
}
