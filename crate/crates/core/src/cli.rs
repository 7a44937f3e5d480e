//! The `lb` command line.
//!
//! Exit codes: 0 success, 1 diagnostics or missing configuration, 2 I/O or
//! parse failure, 3 output write failure, 4 simulation step limit, 5
//! invariant violation.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analyzer::{analyze, AnalyzedProgram};
use crate::codegen::generate;
use crate::config::SimConfig;
use crate::diag::{self, Diagnostic};
use crate::parser::{parse_context, parse_machine};
use crate::sim::{Outcome, RunOptions, SimError, Simulator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_WRITE: i32 = 3;
pub const EXIT_STEP_LIMIT: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "lb",
    version,
    about = "Local Event-B toolkit: check, compile and simulate models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and analyze a model, reporting diagnostics and configuration holes.
    Check(CheckArgs),
    /// Generate DistAlgo program text.
    Compile(CompileArgs),
    /// Run the model under multiset-channel semantics.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Context file (.lbc).
    pub context: PathBuf,
    /// Machine file (.lbm).
    pub machine: PathBuf,
    /// Print diagnostics as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Write one combined `program.da` instead of one file per module.
    #[arg(long)]
    pub single_file: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Configuration file with class sizes and constant values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scheduler seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step budget, overriding the configuration.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Write the JSON trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Enable message loss with the given probability.
    #[arg(long, value_name = "P", value_parser = parse_probability)]
    pub lossy: Option<f64>,
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is outside [0, 1]"))
    }
}

/// Whether diagnostics on stderr should use ANSI colors, from `LB_COLOR`.
pub fn use_color() -> bool {
    match std::env::var("LB_COLOR").as_deref() {
        Ok("always") => true,
        Ok("never") => false,
        _ => std::io::stderr().is_terminal(),
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    color: bool,
    json: bool,
}

impl Io<'_> {
    fn diagnostics(&mut self, diags: &[Diagnostic]) {
        if self.json {
            let _ = writeln!(self.out, "{}", diag::to_json(diags));
        } else {
            let _ = write!(self.err, "{}", diag::to_text(diags, self.color));
        }
    }

    fn error(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "lb: {msg}");
    }
}

/// Parses and analyzes a model; on failure returns the exit code.
fn load_model(io: &mut Io<'_>, model: &ModelArgs) -> Result<AnalyzedProgram, i32> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let (ctx_text, mch_text) = match (read(&model.context), read(&model.machine)) {
        (Ok(c), Ok(m)) => (c, m),
        (Err(e), _) | (_, Err(e)) => {
            io.error(e);
            return Err(EXIT_INPUT);
        }
    };
    let ctx = parse_context(&ctx_text, &model.context);
    let mch = parse_machine(&mch_text, &model.machine);
    let (ctx, mch) = match (ctx, mch) {
        (Ok(c), Ok(m)) => (c, m),
        (c, m) => {
            let mut diags = c.err().unwrap_or_default();
            diags.extend(m.err().unwrap_or_default());
            io.diagnostics(&diags);
            return Err(EXIT_INPUT);
        }
    };
    analyze(&ctx, &mch).map_err(|diags| {
        io.diagnostics(&diags);
        EXIT_DIAGNOSTICS
    })
}

fn holes_text(prog: &AnalyzedProgram) -> String {
    let holes = prog.holes();
    if holes.is_empty() {
        "no configuration holes\n".to_string()
    } else {
        format!("configuration holes: {}\n", holes.join(", "))
    }
}

fn cmd_check(io: &mut Io<'_>, args: &CheckArgs) -> i32 {
    let prog = match load_model(io, &args.model) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if io.json {
        let _ = writeln!(io.out, "{}", diag::to_json(&[]));
    } else {
        let _ = writeln!(
            io.out,
            "ok: {} process classes, {} events",
            prog.classes.len(),
            prog.machine.events.len()
        );
        let _ = write!(io.out, "{}", holes_text(&prog));
    }
    EXIT_OK
}

fn cmd_compile(io: &mut Io<'_>, args: &CompileArgs) -> i32 {
    let prog = match load_model(io, &args.model) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let generated = match generate(&prog) {
        Ok(g) => g,
        Err(e) => {
            io.error(e);
            return EXIT_DIAGNOSTICS;
        }
    };
    let files = if args.single_file {
        vec![(
            "program.da".to_string(),
            generated.single_file().to_string(),
        )]
    } else {
        generated.files()
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        io.error(format!("{}: {e}", args.out.display()));
        return EXIT_WRITE;
    }
    for (name, text) in &files {
        let path = args.out.join(name);
        if let Err(e) = std::fs::write(&path, text) {
            io.error(format!("{}: {e}", path.display()));
            return EXIT_WRITE;
        }
    }
    let _ = writeln!(
        io.out,
        "wrote {} files to {}",
        files.len(),
        args.out.display()
    );
    if !generated.holes.is_empty() {
        let _ = writeln!(io.out, "fill in before running the generated program:");
        for h in &generated.holes {
            let _ = writeln!(io.out, "  {}: {}", h.name, h.description);
        }
    }
    EXIT_OK
}

fn cmd_simulate(io: &mut Io<'_>, args: &SimulateArgs) -> i32 {
    let prog = match load_model(io, &args.model) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut cfg = match &args.config {
        Some(path) => match SimConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                io.error(format!("{}: {e}", path.display()));
                return EXIT_INPUT;
            }
        },
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.max_steps {
        cfg.max_steps = m;
    }
    if let Some(p) = args.lossy {
        cfg.lossy = true;
        cfg.loss_prob = p;
    }
    for w in &cfg.warnings {
        let _ = writeln!(io.err, "lb: warning: {w}");
    }
    let sim = match Simulator::new(&prog, &cfg) {
        Ok(s) => s,
        Err(e) => {
            io.error(format!("error[{}]: {e}", e.code()));
            return EXIT_DIAGNOSTICS;
        }
    };
    for w in &sim.warnings {
        let _ = writeln!(io.err, "lb: warning: {w}");
    }
    let result = match sim.run(&RunOptions::from(&cfg)) {
        Ok(r) => r,
        Err(e @ SimError::NegativeCounter(_)) => {
            io.error(format!("error[{}]: {e}", e.code()));
            return EXIT_INVARIANT;
        }
        Err(e) => {
            io.error(format!("error[{}]: {e}", e.code()));
            return EXIT_DIAGNOSTICS;
        }
    };
    if let Some(path) = &args.trace {
        if let Err(e) = std::fs::write(path, result.trace_file()) {
            io.error(format!("{}: {e}", path.display()));
            return EXIT_WRITE;
        }
    }
    if io.json {
        let mut summary = result.to_json();
        if let Some(obj) = summary.as_object_mut() {
            obj.remove("trace");
        }
        let _ = writeln!(
            io.out,
            "{}",
            serde_json::to_string_pretty(&summary).expect("JSON serializes")
        );
    } else {
        let _ = write!(io.out, "{}", result.summary());
    }
    match result.outcome {
        Outcome::Terminated => EXIT_OK,
        Outcome::StepLimit { .. } => EXIT_STEP_LIMIT,
        Outcome::InvariantViolation { .. } => EXIT_INVARIANT,
    }
}

/// Runs `lb` with the given arguments (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let json = match &cli.command {
        Command::Check(a) => a.model.json,
        Command::Compile(a) => a.model.json,
        Command::Simulate(a) => a.model.json,
    };
    let mut io = Io {
        out,
        err,
        color: use_color(),
        json,
    };
    match &cli.command {
        Command::Check(a) => cmd_check(&mut io, a),
        Command::Compile(a) => cmd_compile(&mut io, a),
        Command::Simulate(a) => cmd_simulate(&mut io, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn probability_bounds() {
        assert_eq!(parse_probability("0.5"), Ok(0.5));
        assert!(parse_probability("1.5").is_err());
        assert!(parse_probability("x").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["lb", "frobnicate"], &mut out, &mut err), EXIT_INPUT);
        assert!(!err.is_empty());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["lb", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("simulate"));
    }
}
