//! Runs the locality analysis and prints what it found for each process class.
//!
//! ```text
//! cargo run --example check
//! ```

use std::path::Path;

use localeb::{analyze, parse_context, parse_machine};

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
    let prog = analyze(&ctx, &mch).expect("model is local");
    for class in &prog.classes {
        let lc: Vec<String> = class
            .local_constants
            .iter()
            .map(|c| c.name.to_string())
            .collect();
        let lv: Vec<String> = class
            .local_variables
            .iter()
            .map(|v| v.to_string())
            .collect();
        let states: Vec<String> = class.states.iter().map(|s| s.to_string()).collect();
        println!("class {}", class.name);
        println!("  members:          {:?}", class.explicit_members);
        println!("  local constants:  {}", lc.join(", "));
        println!("  local variables:  {}", lv.join(", "));
        println!("  states:           {}", states.join(", "));
        for (state, events) in &class.events_by_state {
            for e in events {
                println!("  {state:>4}: {:<16} {:?}", e.name().to_string(), e.kind);
            }
        }
    }
    println!("holes: {}", prog.holes().join(", "));
}
