//! Parses the fixture context and machine and pretty-prints them back.
//!
//! ```text
//! cargo run --example parse
//! ```

use std::path::Path;

use localeb::parser::{pretty_context, pretty_machine};
use localeb::{parse_context, parse_machine};

fn main() {
    let ctx = parse_context(
        include_str!("../fixtures/request_answer.lbc"),
        Path::new("request_answer.lbc"),
    )
    .expect("context parses");
    let mch = parse_machine(
        include_str!("../fixtures/request_answer.lbm"),
        Path::new("request_answer.lbm"),
    )
    .expect("machine parses");
    println!(
        "context {}: {} sets, {} constants, {} axioms",
        ctx.name,
        ctx.sets.len(),
        ctx.constants.len(),
        ctx.axioms.len()
    );
    println!(
        "machine {}: {} variables, {} events",
        mch.name,
        mch.variables.len(),
        mch.events.len()
    );
    println!();
    print!("{}", pretty_context(&ctx));
    println!();
    print!("{}", pretty_machine(&mch));
}
