//! DistAlgo-style program generation from an analyzed model.
//!
//! Output is a pure function of the [`AnalyzedProgram`]: no timestamps, and
//! every collection is walked in declaration order.

mod expr;

use std::collections::BTreeSet;

pub use expr::{
    split_quantifier, translate_expr, translate_expr_bound, translate_history, translate_message,
    GenConfig, Localize,
};

use crate::analyzer::{AnalyzedProgram, EventInfo, LocalKind, ProcessClassInfo, ValueDef, DONE};
use crate::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    #[error("cannot translate `{construct}`: {reason}")]
    Unsupported { construct: String, reason: String },
}

/// A value left open by the model: a class size or an unvalued constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hole {
    pub name: String,
    pub marker: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedProgram {
    pub main_source: String,
    pub class_sources: Vec<(Ident, String)>,
    pub enum_sources: Vec<(Ident, String)>,
    pub holes: Vec<Hole>,
    single: String,
}

impl GeneratedProgram {
    /// Output files in a fixed order: `main.da`, class files, enum modules, `holes.txt`.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![("main.da".to_string(), self.main_source.clone())];
        for (c, src) in &self.class_sources {
            out.push((format!("{c}.da"), src.clone()));
        }
        for (s, src) in &self.enum_sources {
            out.push((format!("enums_{s}.py"), src.clone()));
        }
        out.push(("holes.txt".to_string(), self.holes_report()));
        out
    }

    /// Everything in one source file: enums, process classes, then main.
    pub fn single_file(&self) -> &str {
        &self.single
    }

    pub fn holes_report(&self) -> String {
        let mut out = String::new();
        for h in &self.holes {
            out.push_str(&format!("{}\t{}\n", h.name, h.description));
        }
        out
    }
}

fn pad(level: usize, cfg: &GenConfig) -> String {
    " ".repeat(level * cfg.indent)
}

fn indent_block(text: &str, by: &str) -> String {
    text.lines()
        .map(|l| {
            if l.is_empty() {
                String::new()
            } else {
                format!("{by}{l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn gen_enum_module(set: &Ident, elems: &[Ident]) -> String {
    let mut out = format!("class {set}(Enum):\n");
    for e in elems {
        out.push_str(&format!("    {e} = \"{e}\"\n"));
    }
    out
}

fn holes(prog: &AnalyzedProgram) -> Vec<Hole> {
    let mut out: Vec<Hole> = prog
        .unsized_classes()
        .into_iter()
        .map(|c| Hole {
            name: format!("N{c}"),
            marker: format!("#N{c} - to be configured"),
            description: format!("number of processes in class {c}"),
        })
        .collect();
    out.extend(prog.unbound_constants.iter().map(|c| Hole {
        name: c.to_string(),
        marker: format!("#{c} - to be configured"),
        description: "constant without a _value axiom".to_string(),
    }));
    out
}

/// Setup arguments of a class: its function and scalar local constants.
fn setup_params(info: &ProcessClassInfo) -> Vec<(&Ident, LocalKind)> {
    info.local_constants
        .iter()
        .filter(|c| c.kind != LocalKind::EnumSet)
        .map(|c| (&c.name, c.kind))
        .collect()
}

pub fn gen_main(prog: &AnalyzedProgram, cfg: &GenConfig) -> Result<String, CodegenError> {
    let cfg = GenConfig {
        class_sets: prog.classes.iter().map(|c| c.name.clone()).collect(),
        ..cfg.clone()
    };
    let i1 = pad(1, &cfg);
    let i2 = pad(2, &cfg);
    let mut out = String::from("def main():\n");
    for c in &prog.classes {
        if c.is_enumerated() {
            out.push_str(&format!("{i1}N{} = {}\n", c.name, c.explicit_members.len()));
        } else {
            out.push_str(&format!("{i1}N{0} = #N{0} - to be configured\n", c.name));
        }
    }
    out.push('\n');
    for c in &prog.classes {
        out.push_str(&format!("{i1}{0}Set = new({0}, num=N{0})\n", c.name));
        if c.is_enumerated() {
            let names: Vec<&str> = c.explicit_members.iter().map(Ident::as_str).collect();
            let tuple = if names.len() == 1 {
                format!("({},)", names[0])
            } else {
                format!("({})", names.join(", "))
            };
            out.push_str(&format!("{i1}{tuple} = list({}Set)\n", c.name));
        }
    }
    out.push('\n');
    let sets: Vec<String> = prog
        .classes
        .iter()
        .map(|c| format!("{}Set", c.name))
        .collect();
    out.push_str(&format!("{i1}Nodes = set.union({})\n", sets.join(", ")));
    let per_class = |name: &str, entries: &[crate::analyzer::TopologyEntry], out: &mut String| {
        for (k, e) in entries.iter().enumerate() {
            let body = translate_expr(&e.expr, &cfg)?;
            let comp = format!(
                "{{{b}:{body} for {b} in {c}Set}}",
                b = e.binder,
                c = e.class
            );
            if k == 0 {
                out.push_str(&format!("{i1}{name} = {comp}\n"));
            } else {
                out.push_str(&format!("{i1}{name}.update({comp})\n"));
            }
        }
        Ok::<(), CodegenError>(())
    };
    per_class("network", &prog.topology.entries, &mut out)?;
    for (name, def) in &prog.values {
        match def {
            ValueDef::PerClass(entries) => per_class(name.as_str(), entries, &mut out)?,
            ValueDef::Scalar(e) => {
                out.push_str(&format!("{i1}{name} = {}\n", translate_expr(e, &cfg)?));
            }
        }
    }
    for c in &prog.unbound_constants {
        out.push_str(&format!("{i1}{c} = #{c} - to be configured\n"));
    }
    out.push('\n');
    for c in &prog.classes {
        let args: Vec<String> = setup_params(c)
            .into_iter()
            .map(|(n, kind)| match kind {
                LocalKind::Function => format!("{n}[proc]"),
                _ => n.to_string(),
            })
            .collect();
        let tuple = match args.len() {
            0 => "()".to_string(),
            1 => format!("({},)", args[0]),
            _ => format!("({})", args.join(", ")),
        };
        out.push_str(&format!("{i1}for proc in {}Set:\n", c.name));
        out.push_str(&format!("{i2}setup({{proc}}, {tuple})\n"));
    }
    out.push_str(&format!("{i1}start(Nodes)\n"));
    Ok(out)
}

fn localize(info: &ProcessClassInfo, proc: &Ident) -> Localize {
    Localize {
        class: info.name.clone(),
        proc: proc.clone(),
        functions: info
            .local_constants
            .iter()
            .filter(|c| c.kind == LocalKind::Function)
            .map(|c| c.name.clone())
            .chain(info.local_variables.iter().cloned())
            .collect(),
        scalars: info
            .local_constants
            .iter()
            .filter(|c| c.kind == LocalKind::Scalar)
            .map(|c| c.name.clone())
            .collect(),
        stale: BTreeSet::new(),
    }
}

/// Whether a variable holds a map per process, so `{}` is an empty dict.
fn map_valued(prog: &AnalyzedProgram, var: &Ident) -> bool {
    let Some(inv) = prog.machine.typing_invariant(var.as_str()) else {
        return false;
    };
    matches!(
        inv.value.as_membership(),
        Some((_, Expr::Binary(BinOp::TotalFn | BinOp::PartialFn, _, codomain)))
            if matches!(&**codomain, Expr::Binary(BinOp::TotalFn | BinOp::PartialFn, ..))
    )
}

fn rhs_text(
    prog: &AnalyzedProgram,
    var: &Ident,
    rhs: &Expr,
    cfg: &GenConfig,
) -> Result<String, CodegenError> {
    if *rhs == Expr::SetExt(vec![]) && map_valued(prog, var) {
        return Ok("{}".to_string());
    }
    translate_expr(rhs, cfg)
}

/// Local variables read through `var(proc)` in an expression.
fn reads(e: &Expr, proc: &Ident, vars: &[Ident]) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    e.walk(&mut |x| {
        if let Expr::Apply(f, a) = x {
            if let (Some(f), Some(a)) = (f.as_var(), a.as_var()) {
                if a == proc && vars.contains(f) {
                    out.insert(f.clone());
                }
            }
        }
    });
    out
}

fn action_exprs(a: &Action) -> Vec<&Expr> {
    match a {
        Action::LocalAssign { rhs, .. } | Action::Assign { rhs, .. } => vec![rhs],
        Action::ChannelAssign { src, dst, msg, .. } => vec![src, dst, msg],
    }
}

/// 𝒜: the event's actions as sequenced statements, with `old_x` copies for
/// variables read after an earlier action has overwritten them.
fn gen_actions(
    prog: &AnalyzedProgram,
    info: &ProcessClassInfo,
    ev: &EventInfo,
    cfg: &GenConfig,
) -> Result<Vec<String>, CodegenError> {
    let proc = &ev.proc_param;
    let actions: Vec<&Action> = ev.decl.actions.iter().map(|a| &a.value).collect();
    let mut written: Vec<BTreeSet<Ident>> = Vec::new();
    let mut acc = BTreeSet::new();
    let mut copies = BTreeSet::new();
    for a in &actions {
        written.push(acc.clone());
        for e in action_exprs(a) {
            for r in reads(e, proc, &info.local_variables) {
                if acc.contains(&r) {
                    copies.insert(r);
                }
            }
        }
        if let Action::LocalAssign { var, .. } = a {
            acc.insert(var.clone());
        }
    }
    let mut lines: Vec<String> = info
        .local_variables
        .iter()
        .filter(|v| copies.contains(*v))
        .map(|v| format!("old_{v} = deepcopy(self.{v})"))
        .collect();
    let params: Vec<Ident> = ev
        .decl
        .params
        .iter()
        .filter(|p| *p != proc)
        .cloned()
        .collect();
    for (a, before) in actions.iter().zip(&written) {
        let mut loc = localize(info, proc);
        loc.stale = before.intersection(&copies).cloned().collect();
        let cfg = GenConfig {
            localize_for: Some(loc),
            ..cfg.with_bound(params.iter().cloned())
        };
        match a {
            Action::LocalAssign { var, rhs, .. } => {
                let own = Expr::apply(Expr::Var(var.clone()), Expr::Var(proc.clone()));
                let updates = match rhs {
                    Expr::FuncOverride(base, upd) | Expr::Binary(BinOp::Union, base, upd)
                        if **base == own =>
                    {
                        expr::maplet_updates(upd)
                    }
                    _ => None,
                };
                match updates {
                    Some(pairs) => {
                        for (k, v) in pairs {
                            lines.push(format!(
                                "self.{var}[{}] = {}",
                                translate_expr(k, &cfg)?,
                                translate_expr(v, &cfg)?
                            ));
                        }
                    }
                    None => lines.push(format!("self.{var} = {}", rhs_text(prog, var, rhs, &cfg)?)),
                }
            }
            Action::ChannelAssign {
                op: ChannelOp::Send,
                dst,
                msg,
                ..
            } => lines.push(format!(
                "send({}, to={})",
                translate_message(msg, &cfg, false)?,
                translate_expr(dst, &cfg)?
            )),
            Action::ChannelAssign {
                op: ChannelOp::Receive,
                ..
            } => {}
            Action::Assign { rhs, .. } => {
                return Err(CodegenError::Unsupported {
                    construct: crate::parser::pretty_expr(rhs),
                    reason: "events may only assign per-process variables".to_string(),
                })
            }
        }
    }
    Ok(lines)
}

enum CondPart {
    Inline(String),
    Split { head: String, has: Option<String> },
}

/// 𝒢ⁱ as separate conjuncts; `self.pc == "st"` first.
fn condition_parts(
    info: &ProcessClassInfo,
    ev: &EventInfo,
    cfg: &GenConfig,
) -> Result<Vec<CondPart>, CodegenError> {
    let cfg = GenConfig {
        localize_for: Some(localize(info, &ev.proc_param)),
        ..cfg.clone()
    };
    let mut parts = vec![CondPart::Inline(format!("self.pc == \"{}\"", ev.state))];
    let guards: Vec<Expr> = ev.condition_guards().into_iter().cloned().collect();
    if !ev.typed_params.is_empty() {
        let mut heads = Vec::new();
        for (p, dom) in &ev.typed_params {
            heads.push(format!("{p} in {}", translate_expr(dom, &cfg)?));
        }
        let inner = cfg.with_bound(ev.typed_params.iter().map(|(p, _)| p.clone()));
        let has = if guards.is_empty() {
            None
        } else {
            Some(translate_expr(&Expr::conjunction(guards), &inner)?)
        };
        parts.push(CondPart::Split {
            head: format!("some({}", heads.join(", ")),
            has,
        });
        return Ok(parts);
    }
    for g in &guards {
        match split_quantifier(g, &cfg)? {
            Some((head, has)) => parts.push(CondPart::Split { head, has }),
            None => {
                let text = translate_expr(g, &cfg)?;
                let wrapped = if matches!(g, Expr::Binary(BinOp::Or, ..)) {
                    format!("({text})")
                } else {
                    text
                };
                parts.push(CondPart::Inline(wrapped));
            }
        }
    }
    Ok(parts)
}

fn render_condition(keyword: &str, parts: &[CondPart], cfg: &GenConfig) -> String {
    let i1 = pad(1, cfg);
    let i2 = pad(2, cfg);
    if parts.len() == 1 {
        if let CondPart::Inline(t) = &parts[0] {
            return format!("{keyword}({t}):");
        }
    }
    let mut out = String::new();
    for (k, p) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        let tail = if last { "):" } else { " and" };
        let text = match p {
            CondPart::Inline(t) => format!("{t}{tail}"),
            CondPart::Split { head, has: Some(h) } => format!("{head},\n{i2}has={h}){tail}"),
            CondPart::Split { head, has: None } => format!("{head}){tail}"),
        };
        if k == 0 {
            out.push_str(&format!("{keyword}({text}"));
        } else {
            out.push_str(&format!("\n{i1}{text}"));
        }
    }
    out
}

/// The method for control state `st`: one branch per internal or send event,
/// an `await` head when a receive event is observable in `st`.
pub fn gen_state_method(
    prog: &AnalyzedProgram,
    info: &ProcessClassInfo,
    st: &Ident,
    events: &[EventInfo],
    cfg: &GenConfig,
) -> Result<String, CodegenError> {
    let i1 = pad(1, cfg);
    let i2 = pad(2, cfg);
    let awaits = events.iter().any(|e| e.kind == EventKind::Receive);
    let mut out = format!("def {st}():\n");
    if awaits {
        out.push_str(&format!("{i1}--{st}\n"));
    }
    let mut first = true;
    for ev in events.iter().filter(|e| e.kind != EventKind::Receive) {
        let keyword = match (first, awaits) {
            (true, true) => "if await",
            (true, false) => "if",
            (false, _) => "elif",
        };
        first = false;
        let parts = condition_parts(info, ev, cfg)?;
        out.push_str(&format!("{i1}# event {}\n", ev.name()));
        out.push_str(&indent_block(&render_condition(keyword, &parts, cfg), &i1));
        out.push('\n');
        let body = gen_actions(prog, info, ev, cfg)?;
        if body.is_empty() {
            out.push_str(&format!("{i2}pass\n"));
        }
        for line in body {
            out.push_str(&format!("{i2}{line}\n"));
        }
    }
    if first {
        out.push_str(&format!("{i1}if await(False):\n{i2}pass\n"));
    }
    out.push_str(&format!("{i1}elif(self.pc != \"{st}\"):\n{i2}pass\n"));
    Ok(out)
}

/// 𝒢ʳ: a `receive` handler for one receive event.
pub fn gen_receive_method(
    prog: &AnalyzedProgram,
    info: &ProcessClassInfo,
    ev: &EventInfo,
    cfg: &GenConfig,
) -> Result<String, CodegenError> {
    let recv = ev
        .receive
        .as_ref()
        .ok_or_else(|| CodegenError::Unsupported {
            construct: ev.name().to_string(),
            reason: "not a receive event".to_string(),
        })?;
    let local = GenConfig {
        localize_for: Some(localize(info, &ev.proc_param)),
        ..cfg.clone()
    };
    let msg = translate_message(&recv.msg_pattern, &local, false)?;
    let src = translate_expr(&recv.source_pattern, &local)?;
    let head = "def receive(";
    let mut out = format!(
        "{head}msg={msg}, from_={src},\n{}at=({}, )):\n",
        " ".repeat(head.len()),
        ev.state
    );
    let i1 = pad(1, cfg);
    let body = gen_actions(prog, info, ev, cfg)?;
    if body.is_empty() {
        out.push_str(&format!("{i1}pass\n"));
    }
    for line in body {
        out.push_str(&format!("{i1}{line}\n"));
    }
    Ok(out)
}

fn class_imports(prog: &AnalyzedProgram, info: &ProcessClassInfo, body: &str) -> Vec<String> {
    let mut out = Vec::new();
    if body.contains("deepcopy(") {
        out.push("from copy import deepcopy".to_string());
    }
    for e in &prog.enums {
        if info.local_constants.iter().any(|c| c.name == e.set) {
            out.push(format!("from enums_{0} import {0}", e.set));
        }
    }
    out
}

fn class_body(
    prog: &AnalyzedProgram,
    info: &ProcessClassInfo,
    cfg: &GenConfig,
) -> Result<String, CodegenError> {
    let i1 = pad(1, cfg);
    let i2 = pad(2, cfg);
    let mut methods = Vec::new();

    let params: Vec<&str> = setup_params(info)
        .into_iter()
        .map(|(n, _)| n.as_str())
        .collect();
    let mut setup = format!("def setup({}):\n", params.join(", "));
    if info.init.is_empty() {
        setup.push_str(&format!("{i1}pass\n"));
    }
    for entry in &info.init {
        let local = GenConfig {
            localize_for: Some(localize(info, &entry.binder)),
            ..cfg.clone()
        };
        setup.push_str(&format!(
            "{i1}self.{} = {}\n",
            entry.var,
            rhs_text(prog, &entry.var, &entry.expr, &local)?
        ));
    }
    methods.push(setup);

    let with_methods: Vec<&Ident> = info
        .states
        .iter()
        .filter(|s| *s != DONE && !info.events_in(s.as_str()).is_empty())
        .collect();
    let dispatch: Vec<String> = with_methods
        .iter()
        .map(|s| format!("\"{s}\":{s}"))
        .collect();
    methods.push(format!(
        "def run():\n{i1}stateFunctions = {{{}}}\n{i1}while (self.pc != \"{DONE}\"):\n{i2}stateFunctions[self.pc]()\n",
        dispatch.join(", ")
    ));

    for st in &with_methods {
        methods.push(gen_state_method(
            prog,
            info,
            st,
            info.events_in(st.as_str()),
            cfg,
        )?);
    }
    for ev in info.events().filter(|e| e.kind == EventKind::Receive) {
        methods.push(gen_receive_method(prog, info, ev, cfg)?);
    }

    let mut out = format!("class {}(process):\n", info.name);
    let blocks: Vec<String> = methods.iter().map(|m| indent_block(m, &i1)).collect();
    out.push_str(&blocks.join("\n\n"));
    out.push('\n');
    Ok(out)
}

pub fn gen_process_class(
    prog: &AnalyzedProgram,
    class: &str,
    cfg: &GenConfig,
) -> Result<String, CodegenError> {
    let info = prog.class(class).ok_or_else(|| CodegenError::Unsupported {
        construct: class.to_string(),
        reason: "not a process class".to_string(),
    })?;
    let body = class_body(prog, info, cfg)?;
    let imports = class_imports(prog, info, &body);
    Ok(with_imports(&imports, &body))
}

fn with_imports(imports: &[String], body: &str) -> String {
    if imports.is_empty() {
        body.to_string()
    } else {
        format!("{}\n\n{body}", imports.join("\n"))
    }
}

/// Generates every output source for an analyzed program.
pub fn generate(prog: &AnalyzedProgram) -> Result<GeneratedProgram, CodegenError> {
    let cfg = GenConfig::default();
    let main_body = gen_main(prog, &cfg)?;
    let main_imports: Vec<String> = prog
        .classes
        .iter()
        .map(|c| format!("from {0} import {0}", c.name))
        .collect();
    let main_source = with_imports(&main_imports, &main_body);

    let mut class_sources = Vec::new();
    let mut bodies = Vec::new();
    let mut needs_copy = false;
    for info in &prog.classes {
        let body = class_body(prog, info, &cfg)?;
        needs_copy |= body.contains("deepcopy(");
        class_sources.push((
            info.name.clone(),
            with_imports(&class_imports(prog, info, &body), &body),
        ));
        bodies.push(body);
    }
    let enum_sources: Vec<(Ident, String)> = prog
        .enums
        .iter()
        .map(|e| {
            (
                e.set.clone(),
                format!(
                    "from enum import Enum\n\n{}",
                    gen_enum_module(&e.set, &e.elems)
                ),
            )
        })
        .collect();

    let mut header = Vec::new();
    if !prog.enums.is_empty() {
        header.push("from enum import Enum".to_string());
    }
    if needs_copy {
        header.push("from copy import deepcopy".to_string());
    }
    let mut sections: Vec<String> = prog
        .enums
        .iter()
        .map(|e| gen_enum_module(&e.set, &e.elems))
        .collect();
    sections.extend(bodies);
    sections.push(main_body);
    let single = with_imports(&header, &sections.join("\n\n"));

    Ok(GeneratedProgram {
        main_source,
        class_sources,
        enum_sources,
        holes: holes(prog),
        single,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::parser::{parse_context, parse_machine};
    use std::path::Path;

    fn program() -> AnalyzedProgram {
        let ctx = parse_context(
            include_str!("../../fixtures/request_answer.lbc"),
            Path::new("c.lbc"),
        )
        .unwrap();
        let mch = parse_machine(
            include_str!("../../fixtures/request_answer.lbm"),
            Path::new("m.lbm"),
        )
        .unwrap();
        analyze(&ctx, &mch).unwrap()
    }

    #[test]
    fn enum_module_layout() {
        assert_eq!(
            gen_enum_module(&"S".into(), &["only".into()]),
            "class S(Enum):\n    only = \"only\"\n"
        );
    }

    #[test]
    fn holes_match_markers() {
        let g = generate(&program()).unwrap();
        let names: Vec<&str> = g.holes.iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, ["NQ", "availableResources"]);
        assert_eq!(
            g.main_source.matches("- to be configured").count(),
            g.holes.len()
        );
    }

    #[test]
    fn q_setup_and_dispatch() {
        let g = generate(&program()).unwrap();
        let q = &g.class_sources[1].1;
        assert!(
            q.contains("def setup(network, availableResources):\n        self.pc = \"wr\""),
            "{q}"
        );
        assert!(q.contains("stateFunctions = {\"wr\":wr}"));
        assert!(q.contains("--wr"));
        assert!(q.contains("send((MessagePrefixes.answer, self.availableResources), to=dest)"));
        let p = &g.class_sources[0].1;
        assert!(p.contains("self.result = {}"));
        assert!(p.contains("stateFunctions = {\"sr\":sr, \"wa\":wa}"));
    }

    #[test]
    fn generation_is_deterministic() {
        let prog = program();
        assert_eq!(generate(&prog).unwrap(), generate(&prog).unwrap());
    }
}
