//! Toolkit for Local Event-B models: parse `.lbc`/`.lbm` files, check the
//! locality rules, generate DistAlgo-style program text and simulate models
//! under multiset-channel semantics.

pub mod analyzer;
pub mod ast;
pub mod cli;
pub mod codegen;
pub mod config;
pub mod diag;
pub mod parser;
pub mod sim;

pub use analyzer::{analyze, AnalyzedProgram};
pub use ast::{ContextModel, Expr, Ident, MachineModel};
pub use codegen::{generate, GeneratedProgram};
pub use config::SimConfig;
pub use diag::{Diagnostic, SourceSpan};
pub use parser::{parse_context, parse_expr, parse_machine};
