//! Simulates the fixture with three answering processes and prints the run.
//!
//! ```text
//! cargo run --example simulate -- [seed]
//! ```

use std::path::Path;

use localeb::sim::{RunOptions, Simulator};
use localeb::{analyze, parse_context, parse_machine, SimConfig};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .map_or(1, |s| s.parse().expect("seed is a number"));
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
    let cfg = SimConfig::parse(include_str!("../fixtures/request_answer_nq3.cfg"))
        .expect("config parses");
    let sim = Simulator::new(&prog, &cfg).expect("config covers every hole");
    let result = sim
        .run(&RunOptions {
            seed,
            ..RunOptions::from(&cfg)
        })
        .expect("run completes");
    for ev in &result.trace {
        let binding: Vec<String> = ev.binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let delta = ev
            .channel_delta
            .as_ref()
            .map(|(kind, key)| {
                format!(
                    "  [{} {} -> {}: {}]",
                    kind.name(),
                    key.src,
                    key.dst,
                    key.msg
                )
            })
            .unwrap_or_default();
        println!(
            "{:>3} {:<15} {:<3} {}{delta}",
            ev.step,
            ev.event.to_string(),
            ev.proc.to_string(),
            binding.join(" ")
        );
    }
    println!();
    print!("{}", result.summary());
}
