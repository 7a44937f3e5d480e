//! Enumerates every interleaving of the fixture for one answering process.
//!
//! ```text
//! cargo run --example exhaustive -- [answerers]
//! ```

use std::path::Path;

use localeb::sim::{explore, Simulator};
use localeb::{analyze, parse_context, parse_machine, SimConfig};

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("a count"));
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
    let prog = analyze(&ctx, &mch).expect("model is local");
    let mut text = format!("size.Q = {n}\n");
    for i in 1..=n {
        text.push_str(&format!("availableResources.q{i} = {}\n", 10 * i));
    }
    let sim =
        Simulator::new(&prog, &SimConfig::parse(&text).unwrap()).expect("config covers every hole");
    let report = explore(&sim, 200_000).expect("exploration succeeds");
    println!("states:      {}", report.states);
    println!("transitions: {}", report.transitions);
    println!("max depth:   {}", report.max_depth);
    println!("complete:    {}", report.complete);
    println!("violations:  {:?}", report.violations);
    println!("terminal states: {}", report.terminal.len());
    for t in &report.terminal {
        println!(
            "  result(p) = {}",
            t.get("result", "p").expect("p has a result")
        );
    }
}
