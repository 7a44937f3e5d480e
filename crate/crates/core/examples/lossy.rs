//! Runs the fixture over lossy channels for a range of seeds and tallies outcomes.
//!
//! ```text
//! cargo run --example lossy -- [loss probability]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use localeb::sim::{RunOptions, Simulator};
use localeb::{analyze, parse_context, parse_machine, SimConfig};

fn main() {
    let p: f64 = std::env::args()
        .nth(1)
        .map_or(0.5, |s| s.parse().expect("a probability"));
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
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    let mut lost = 0;
    for seed in 0..100 {
        let opts = RunOptions {
            seed,
            max_steps: 1000,
            lossy: true,
            loss_prob: p,
        };
        let r = sim.run(&opts).expect("run completes");
        *tally.entry(r.outcome.name()).or_default() += 1;
        let t = r.final_state.totals();
        lost += t.sent - t.in_channel - t.received;
    }
    println!("loss probability {p}, 100 runs");
    for (outcome, n) in tally {
        println!("  {outcome:<20} {n}");
    }
    println!("  messages lost        {lost}");
}
