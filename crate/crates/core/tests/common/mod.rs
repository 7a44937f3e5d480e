#![allow(dead_code)]

use std::path::{Path, PathBuf};

use localeb::sim::Simulator;
use localeb::{analyze, parse_context, parse_machine, AnalyzedProgram, SimConfig};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn program_from(machine_text: &str) -> Result<AnalyzedProgram, Vec<localeb::Diagnostic>> {
    let ctx = parse_context(&read("request_answer.lbc"), &fixture("request_answer.lbc"))
        .expect("context parses");
    let mch = parse_machine(machine_text, Path::new("machine.lbm")).expect("machine parses");
    analyze(&ctx, &mch)
}

pub fn program() -> AnalyzedProgram {
    program_from(&read("request_answer.lbm")).expect("fixture is well formed")
}

/// Resources configured for answerer `qi` in the generated configurations.
pub fn resource(i: usize) -> i64 {
    (3 * i + 2) as i64
}

pub fn config_text(nq: usize) -> String {
    let mut text = format!("size.Q = {nq}\n");
    if nq == 0 {
        text.push_str("availableResources = {}\n");
    }
    for i in 1..=nq {
        text.push_str(&format!("availableResources.q{i} = {}\n", resource(i)));
    }
    text
}

pub fn simulator(nq: usize) -> Simulator {
    let cfg = SimConfig::parse(&config_text(nq)).expect("config parses");
    Simulator::new(&program(), &cfg).expect("config covers every hole")
}

/// Splits program text into tokens: identifiers, numbers, string literals
/// and single punctuation characters. Whitespace and line breaks are dropped.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                i += 1;
            }
            i += 1;
            out.push(chars[start..i.min(chars.len())].iter().collect());
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
    out
}

/// Extracts the method `def <name>(` from generated text, up to the next
/// line indented at or below its own level.
pub fn method(text: &str, header: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim_start().starts_with(header))?;
    let indent = lines[start].len() - lines[start].trim_start().len();
    let mut end = start + 1;
    while end < lines.len() {
        let l = lines[end];
        let ind = l.len() - l.trim_start().len();
        if !l.trim().is_empty() && ind <= indent {
            break;
        }
        end += 1;
    }
    Some(lines[start..end].join("\n"))
}
