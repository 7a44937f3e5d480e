//! Analyzes each ill-formed machine under `fixtures/negative` and prints its diagnostics.
//!
//! ```text
//! cargo run --example diagnostics
//! ```

use std::path::Path;

use localeb::diag::to_text;
use localeb::{analyze, parse_context, parse_machine};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let ctx_path = dir.join("request_answer.lbc");
    let ctx = parse_context(&std::fs::read_to_string(&ctx_path).unwrap(), &ctx_path)
        .expect("context parses");
    let mut entries: Vec<_> = std::fs::read_dir(dir.join("negative"))
        .expect("negative fixtures exist")
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for path in entries {
        let mch =
            parse_machine(&std::fs::read_to_string(&path).unwrap(), &path).expect("machine parses");
        match analyze(&ctx, &mch) {
            Ok(_) => println!("{}: accepted", path.display()),
            Err(diags) => print!("{}", to_text(&diags, false)),
        }
    }
}
