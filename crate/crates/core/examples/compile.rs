//! Compiles the request/answer fixture and prints every generated file.
//!
//! ```text
//! cargo run --example compile
//! ```

use std::path::Path;

use localeb::{analyze, generate, parse_context, parse_machine};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let ctx_path = dir.join("request_answer.lbc");
    let mch_path = dir.join("request_answer.lbm");
    let ctx = parse_context(&std::fs::read_to_string(&ctx_path).unwrap(), &ctx_path)
        .expect("context parses");
    let mch = parse_machine(&std::fs::read_to_string(&mch_path).unwrap(), &mch_path)
        .expect("machine parses");
    let prog = analyze(&ctx, &mch).expect("model is local");
    let generated = generate(&prog).expect("translation succeeds");
    for (name, text) in generated.files() {
        println!("==> {name} <==");
        println!("{text}");
    }
}
