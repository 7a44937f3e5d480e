//! Direct execution of analyzed models under multiset-channel semantics.
//!
//! Every channel key `(src, dst, msg)` carries three counters. A send moves
//! `(s, i, r)` to `(s+1, i+1, r)`, a receive to `(s, i-1, r+1)` and a loss
//! to `(s, i-1, r)`. Any message with `i > 0` may be received, in any order.

pub mod eval;
mod explore;
pub mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analyzer::{AnalyzedProgram, EventInfo, ValueDef};
use crate::ast::*;
use crate::config::{ConstValue, SimConfig};
use crate::diag::codes;

pub use eval::{Env, EvalError};
pub use explore::{explore, ExploreReport};
pub use value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Counters {
    pub sent: i64,
    pub in_channel: i64,
    pub received: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelKey {
    pub src: Value,
    pub dst: Value,
    pub msg: Value,
}

impl ChannelKey {
    fn to_json(&self) -> serde_json::Value {
        json!({"src": self.src.to_json(), "dst": self.dst.to_json(), "msg": self.msg.to_json()})
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    /// Each machine variable other than `channels`, as a map from process to value.
    pub vars: BTreeMap<Ident, Value>,
    pub channels: BTreeMap<ChannelKey, Counters>,
    pub step_count: usize,
    pub rng_seed: u64,
}

impl SimState {
    /// `var(proc)`, if defined.
    pub fn get(&self, var: &str, proc: &str) -> Option<&Value> {
        match self.vars.get(var)? {
            Value::FinMap(m) => m.get(&Value::Proc(proc.into())),
            _ => None,
        }
    }

    pub fn pc(&self, proc: &str) -> Option<&Ident> {
        match self.get("pc", proc)? {
            Value::StateName(s) => Some(s),
            _ => None,
        }
    }

    /// Sum of each counter over all keys.
    pub fn totals(&self) -> Counters {
        self.channels
            .values()
            .fold(Counters::default(), |a, c| Counters {
                sent: a.sent + c.sent,
                in_channel: a.in_channel + c.in_channel,
                received: a.received + c.received,
            })
    }

    pub fn in_transit(&self) -> Vec<&ChannelKey> {
        self.channels
            .iter()
            .filter(|(_, c)| c.in_channel > 0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vars: serde_json::Map<String, serde_json::Value> = self
            .vars
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect();
        let channels: Vec<serde_json::Value> = self
            .channels
            .iter()
            .map(|(k, c)| {
                let mut o = k.to_json();
                o["sent"] = json!(c.sent);
                o["in_channel"] = json!(c.in_channel);
                o["received"] = json!(c.received);
                o
            })
            .collect();
        json!({"vars": vars, "channels": channels})
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeltaKind {
    Send,
    Receive,
    Lose,
}

impl DeltaKind {
    pub fn name(self) -> &'static str {
        match self {
            DeltaKind::Send => "send",
            DeltaKind::Receive => "receive",
            DeltaKind::Lose => "lose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: usize,
    pub event: Ident,
    pub proc: Ident,
    /// Parameters other than the process parameter.
    pub binding: BTreeMap<Ident, Value>,
    pub channel_delta: Option<(DeltaKind, ChannelKey)>,
}

impl TraceEvent {
    pub fn to_json(&self) -> serde_json::Value {
        let binding: serde_json::Map<String, serde_json::Value> = self
            .binding
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect();
        let delta = self
            .channel_delta
            .as_ref()
            .map_or(serde_json::Value::Null, |(k, key)| {
                let mut o = key.to_json();
                o["kind"] = json!(k.name());
                o
            });
        json!({
            "step": self.step,
            "event": self.event.as_str(),
            "proc": self.proc.as_str(),
            "binding": binding,
            "channel_delta": delta,
        })
    }
}

/// One enabled instance: an event, the executing process and its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub event: Ident,
    pub proc: Ident,
    /// Non-process parameters in declaration order.
    pub binding: Vec<(Ident, Value)>,
    plan: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("configuration is missing values for: {}", holes.join(", "))]
    MissingConfig { holes: Vec<String> },
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("event `{event}`: parameter `{param}` ranges over an infinite domain")]
    InfiniteDomain { event: Ident, param: Ident },
    #[error("{context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("negative channel counter on {0}")]
    NegativeCounter(String),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::MissingConfig { .. } => codes::E_MISSING_CONFIG,
            SimError::Config(_) => codes::E_BAD_CONFIG,
            SimError::InfiniteDomain { .. } => codes::E_INFINITE_DOMAIN,
            SimError::Eval { .. } => codes::E_EVAL,
            SimError::NegativeCounter(_) => codes::E_NEGATIVE_COUNTER,
        }
    }

    fn eval(context: impl Into<String>) -> impl FnOnce(EvalError) -> SimError {
        let context = context.into();
        move |source| SimError::Eval { context, source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Terminated,
    /// `stalled` is set when no event was enabled before every process reached `done`.
    StepLimit {
        stalled: bool,
    },
    InvariantViolation {
        labels: Vec<String>,
    },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Terminated => "Terminated",
            Outcome::StepLimit { .. } => "StepLimit",
            Outcome::InvariantViolation { .. } => "InvariantViolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub max_steps: usize,
    pub lossy: bool,
    pub loss_prob: f64,
}

impl From<&SimConfig> for RunOptions {
    fn from(c: &SimConfig) -> Self {
        RunOptions {
            seed: c.seed,
            max_steps: c.max_steps,
            lossy: c.lossy,
            loss_prob: c.loss_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: usize,
    pub trace: Vec<TraceEvent>,
    pub final_state: SimState,
}

impl RunResult {
    pub fn to_json(&self) -> serde_json::Value {
        let mut outcome = json!({"kind": self.outcome.name()});
        match &self.outcome {
            Outcome::StepLimit { stalled } => outcome["stalled"] = json!(stalled),
            Outcome::InvariantViolation { labels } => outcome["violated"] = json!(labels),
            Outcome::Terminated => {}
        }
        json!({
            "outcome": outcome,
            "steps": self.steps,
            "trace": self.trace.iter().map(TraceEvent::to_json).collect::<Vec<_>>(),
            "final_state": self.final_state.to_json(),
        })
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn trace_file(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("JSON values serialize");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "outcome: {}", self.outcome.name());
        match &self.outcome {
            Outcome::StepLimit { stalled: true } => s.push_str(" (no event enabled)"),
            Outcome::InvariantViolation { labels } => {
                let _ = write!(s, " ({})", labels.join(", "));
            }
            _ => {}
        }
        s.push('\n');
        let _ = writeln!(s, "steps: {}", self.steps);
        let t = self.final_state.totals();
        let _ = writeln!(
            s,
            "channels: sent={} in_channel={} received={}",
            t.sent, t.in_channel, t.received
        );
        let ok = !matches!(self.outcome, Outcome::InvariantViolation { .. });
        let _ = writeln!(s, "invariants: {}", if ok { "ok" } else { "violated" });
        for (var, v) in &self.final_state.vars {
            if let Value::FinMap(m) = v {
                for (p, x) in m {
                    let _ = writeln!(s, "{var}({p}) = {x}");
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub name: Ident,
    pub class: Ident,
}

#[derive(Debug, Clone)]
struct EventPlan {
    info: EventInfo,
    /// Parameters whose values are enumerated over their typing domain.
    enumerated: Vec<(Ident, Expr)>,
}

/// A configured model, ready to run.
#[derive(Debug, Clone)]
pub struct Simulator {
    prog: AnalyzedProgram,
    procs: Vec<Process>,
    globals: BTreeMap<Ident, Value>,
    atoms: BTreeMap<Ident, Value>,
    plans: Vec<EventPlan>,
    invariants: Vec<Labeled<Expr>>,
    /// Remarks about configuration entries that were not used.
    pub warnings: Vec<String>,
}

fn proc_value(name: &Ident) -> Value {
    Value::Proc(name.clone())
}

/// Parameters that receive unification can bind: bare variables along the
/// maplet spine of a pattern.
fn pattern_vars(e: &Expr, out: &mut BTreeSet<Ident>) {
    match e {
        Expr::Var(v) => {
            out.insert(v.clone());
        }
        Expr::Maplet(a, b) => {
            pattern_vars(a, out);
            pattern_vars(b, out);
        }
        _ => {}
    }
}

impl Simulator {
    pub fn new(prog: &AnalyzedProgram, cfg: &SimConfig) -> Result<Simulator, SimError> {
        let mut warnings = Vec::new();
        let missing: Vec<String> = prog
            .holes()
            .into_iter()
            .filter(|h| {
                let sized = prog
                    .unsized_classes()
                    .iter()
                    .find(|c| format!("N{c}") == *h)
                    .map(|c| cfg.class_sizes.contains_key(*c));
                match sized {
                    Some(present) => !present,
                    None => !cfg.constant_values.contains_key(h.as_str()),
                }
            })
            .collect();
        if !missing.is_empty() {
            return Err(SimError::MissingConfig { holes: missing });
        }

        let mut procs = Vec::new();
        let mut globals = BTreeMap::new();
        let mut atoms = BTreeMap::new();
        for class in &prog.classes {
            let members: Vec<Ident> = if class.is_enumerated() {
                class.explicit_members.clone()
            } else {
                let n = cfg.class_sizes[&class.name];
                let prefix = class.name.as_str().to_lowercase();
                (1..=n)
                    .map(|i| Ident::new(format!("{prefix}{i}")).expect("valid synthesized name"))
                    .collect()
            };
            for m in &members {
                if globals.contains_key(m)
                    || prog.context.declares(m.as_str()) && !class.is_enumerated()
                {
                    return Err(SimError::Config(format!(
                        "synthesized process name `{m}` clashes with a declared name"
                    )));
                }
                procs.push(Process {
                    name: m.clone(),
                    class: class.name.clone(),
                });
                globals.insert(m.clone(), proc_value(m));
            }
            globals.insert(
                class.name.clone(),
                Value::set(members.iter().map(proc_value)),
            );
        }
        for (class, n) in &cfg.class_sizes {
            match prog.class(class.as_str()) {
                Some(c) if c.is_enumerated() => warnings.push(format!(
                    "size.{class} ignored: the class members are fixed by the context"
                )),
                Some(_) => {}
                None => warnings.push(format!("size.{class} = {n} ignored: no such process class")),
            }
        }
        globals.insert(
            Ident::from("Nodes"),
            Value::set(procs.iter().map(|p| proc_value(&p.name))),
        );
        let states: Vec<Value> = prog
            .states
            .iter()
            .map(|s| Value::StateName(s.clone()))
            .collect();
        for (s, v) in prog.states.iter().zip(&states) {
            atoms.insert(s.clone(), v.clone());
        }
        globals.insert(Ident::from("States"), Value::set(states));
        for en in &prog.enums {
            let elems: Vec<Value> = en
                .elems
                .iter()
                .map(|e| Value::Enum(en.set.clone(), e.clone()))
                .collect();
            for (e, v) in en.elems.iter().zip(&elems) {
                atoms.insert(e.clone(), v.clone());
            }
            globals.insert(en.set.clone(), Value::set(elems));
        }

        let mut sim = Simulator {
            prog: prog.clone(),
            procs,
            globals,
            atoms,
            plans: Vec::new(),
            invariants: Vec::new(),
            warnings,
        };

        let network = sim.per_class(&prog.topology.entries, "network_value")?;
        sim.globals.insert(Ident::from("network"), network);

        for (name, given) in &cfg.constant_values {
            if !prog.unbound_constants.contains(name) {
                sim.warnings.push(format!(
                    "`{name}` ignored: it is not a constant left open by the model"
                ));
                continue;
            }
            let v = match given {
                ConstValue::Whole(e) => sim
                    .eval_closed(e)
                    .map_err(SimError::eval(format!("configured value of `{name}`")))?,
                ConstValue::PerProcess(m) => {
                    let mut entries = Vec::new();
                    for (p, e) in m {
                        if !sim.procs.iter().any(|x| &x.name == p) {
                            return Err(SimError::Config(format!(
                                "`{name}.{p}`: no process named `{p}`"
                            )));
                        }
                        let v = sim
                            .eval_closed(e)
                            .map_err(SimError::eval(format!("configured value of `{name}.{p}`")))?;
                        entries.push((proc_value(p), v));
                    }
                    Value::map(entries)
                }
            };
            sim.globals.insert(name.clone(), v);
        }

        for (name, def) in &prog.values {
            let v = match def {
                ValueDef::PerClass(entries) => sim.per_class(entries, &format!("{name}_value"))?,
                ValueDef::Scalar(e) => sim
                    .eval_closed(e)
                    .map_err(SimError::eval(format!("axiom {name}_value")))?,
            };
            sim.globals.insert(name.clone(), v);
        }

        for name in &prog.unbound_constants {
            let label = format!("{name}_typing");
            if let Some(ax) = prog.context.axiom(&label) {
                let ok = sim
                    .eval_closed_bool(&ax.predicate)
                    .map_err(SimError::eval(format!("axiom {label}")))?;
                if !ok {
                    return Err(SimError::Config(format!(
                        "configured value of `{name}` = {} violates `{}`",
                        sim.globals[name],
                        crate::parser::pretty_expr(&ax.predicate)
                    )));
                }
            }
        }

        for class in &prog.classes {
            for info in class.events() {
                let mut bindable = BTreeSet::new();
                if let Some(r) = &info.receive {
                    pattern_vars(&r.source, &mut bindable);
                    pattern_vars(&r.msg, &mut bindable);
                    for (_, pat) in &info.match_guards {
                        pattern_vars(pat, &mut bindable);
                    }
                }
                let mut enumerated = Vec::new();
                for (p, dom) in &info.typed_params {
                    if bindable.contains(p) {
                        continue;
                    }
                    if eval::is_infinite_domain(dom) {
                        return Err(SimError::InfiniteDomain {
                            event: info.name().clone(),
                            param: p.clone(),
                        });
                    }
                    enumerated.push((p.clone(), dom.clone()));
                }
                sim.plans.push(EventPlan {
                    info: info.clone(),
                    enumerated,
                });
            }
        }
        // Events in machine declaration order.
        let order: Vec<&Ident> = prog.machine.events.iter().map(|e| &e.name).collect();
        sim.plans
            .sort_by_key(|p| order.iter().position(|n| *n == p.info.name()));

        sim.invariants = prog
            .machine
            .invariants
            .iter()
            .filter(|i| !i.value.free_vars().contains("channels"))
            .cloned()
            .collect();
        Ok(sim)
    }

    pub fn program(&self) -> &AnalyzedProgram {
        &self.prog
    }

    pub fn processes(&self) -> &[Process] {
        &self.procs
    }

    /// Value of a constant, class set or carrier set.
    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.globals.get(name)
    }

    fn env<'s>(&'s self, state: &'s SimState, locals: &[(Ident, Value)]) -> Env<'s> {
        Env {
            globals: &self.globals,
            vars: &state.vars,
            channels: &state.channels,
            atoms: &self.atoms,
            locals: locals.to_vec(),
        }
    }

    fn eval_closed(&self, e: &Expr) -> Result<Value, EvalError> {
        let empty = SimState::empty(0);
        self.env(&empty, &[]).eval(e)
    }

    fn eval_closed_bool(&self, e: &Expr) -> Result<bool, EvalError> {
        let empty = SimState::empty(0);
        self.env(&empty, &[]).eval_bool(e)
    }

    fn per_class(
        &self,
        entries: &[crate::analyzer::TopologyEntry],
        what: &str,
    ) -> Result<Value, SimError> {
        let empty = SimState::empty(0);
        let mut out = Vec::new();
        for entry in entries {
            for p in self.procs.iter().filter(|p| p.class == entry.class) {
                let v = self
                    .env(&empty, &[(entry.binder.clone(), proc_value(&p.name))])
                    .eval(&entry.expr)
                    .map_err(SimError::eval(format!("{what} at {}", p.name)))?;
                out.push((proc_value(&p.name), v));
            }
        }
        Ok(Value::map(out))
    }

    pub fn init_state(&self, seed: u64) -> Result<SimState, SimError> {
        let mut state = SimState::empty(seed);
        for var in &self.prog.machine.variables {
            if var != "channels" {
                state.vars.insert(var.clone(), Value::empty());
            }
        }
        let pre = state.clone();
        for class in &self.prog.classes {
            for entry in &class.init {
                let mut entries = state.vars[&entry.var].as_map().unwrap_or_default();
                for p in self.procs.iter().filter(|p| p.class == class.name) {
                    let v = self
                        .env(&pre, &[(entry.binder.clone(), proc_value(&p.name))])
                        .eval(&entry.expr)
                        .map_err(SimError::eval(format!(
                            "initialisation of {}({})",
                            entry.var, p.name
                        )))?;
                    entries.insert(proc_value(&p.name), v);
                }
                state.vars.insert(entry.var.clone(), Value::map(entries));
            }
        }
        Ok(state)
    }

    /// Unifies a receive pattern with a message component, binding parameters.
    fn unify(
        &self,
        state: &SimState,
        params: &[Ident],
        pat: &Expr,
        v: &Value,
        binding: &mut Vec<(Ident, Value)>,
    ) -> Result<bool, EvalError> {
        match pat {
            Expr::Var(x) if params.contains(x) => match binding.iter().find(|(n, _)| n == x) {
                Some((_, bound)) => Ok(bound == v),
                None => {
                    binding.push((x.clone(), v.clone()));
                    Ok(true)
                }
            },
            Expr::Maplet(a, b) => match v {
                Value::Tuple(items) if items.len() == 2 => Ok(self
                    .unify(state, params, a, &items[0], binding)?
                    && self.unify(state, params, b, &items[1], binding)?),
                _ => Ok(false),
            },
            _ => Ok(&self.env(state, binding).eval(pat)? == v),
        }
    }

    fn candidate_bindings(
        &self,
        state: &SimState,
        plan: &EventPlan,
        proc: &Process,
    ) -> Result<Vec<Vec<(Ident, Value)>>, EvalError> {
        let info = &plan.info;
        let base = vec![(info.proc_param.clone(), proc_value(&proc.name))];
        let mut partial = Vec::new();
        match &info.receive {
            Some(r) => {
                let params = &info.decl.params;
                let me = proc_value(&proc.name);
                for key in state.in_transit() {
                    if key.dst != me {
                        continue;
                    }
                    let mut b = base.clone();
                    if !self.unify(state, params, &r.source, &key.src, &mut b)?
                        || !self.unify(state, params, &r.msg, &key.msg, &mut b)?
                    {
                        continue;
                    }
                    let mut ok = true;
                    for (x, pat) in &info.match_guards {
                        let Some(v) = b.iter().find(|(n, _)| n == x).map(|(_, v)| v.clone()) else {
                            continue;
                        };
                        if !self.unify(state, params, pat, &v, &mut b)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        partial.push(b);
                    }
                }
            }
            None => partial.push(base),
        }
        let mut out = Vec::new();
        for b in partial {
            self.extend(state, &plan.enumerated, b, &mut out)?;
        }
        Ok(out)
    }

    fn extend(
        &self,
        state: &SimState,
        rest: &[(Ident, Expr)],
        binding: Vec<(Ident, Value)>,
        out: &mut Vec<Vec<(Ident, Value)>>,
    ) -> Result<(), EvalError> {
        let Some(((p, dom), rest)) = rest.split_first() else {
            out.push(binding);
            return Ok(());
        };
        if binding.iter().any(|(n, _)| n == p) {
            return self.extend(state, rest, binding, out);
        }
        let values = self.env(state, &binding).eval_set(dom)?;
        for v in values {
            let mut b = binding.clone();
            b.push((p.clone(), v));
            self.extend(state, rest, b, out)?;
        }
        Ok(())
    }

    /// Every enabled (event, process, binding), ordered by process, then
    /// event declaration order, then binding.
    pub fn enabled_events(&self, state: &SimState) -> Result<Vec<Choice>, SimError> {
        let mut out = Vec::new();
        for proc in &self.procs {
            let Some(pc) = state.pc(proc.name.as_str()) else {
                continue;
            };
            for (idx, plan) in self.plans.iter().enumerate() {
                let info = &plan.info;
                if info.class != proc.class || &info.state != pc {
                    continue;
                }
                let ctx = || format!("event {} at {}", info.name(), proc.name);
                let candidates = self
                    .candidate_bindings(state, plan, proc)
                    .map_err(SimError::eval(ctx()))?;
                for b in candidates {
                    let mut env = self.env(state, &b);
                    let mut enabled = true;
                    for g in &info.decl.guards {
                        let holds = env.eval_bool(&g.value).map_err(SimError::eval(format!(
                            "guard {} of {}",
                            g.label,
                            ctx()
                        )))?;
                        if !holds {
                            enabled = false;
                            break;
                        }
                    }
                    if enabled {
                        let binding = info
                            .decl
                            .params
                            .iter()
                            .filter(|p| **p != info.proc_param)
                            .filter_map(|p| b.iter().find(|(n, _)| n == p).cloned())
                            .collect();
                        out.push(Choice {
                            event: info.name().clone(),
                            proc: proc.name.clone(),
                            binding,
                            plan: idx,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies the actions of an enabled choice; right-hand sides read the pre-state.
    pub fn fire_event(
        &self,
        state: &SimState,
        choice: &Choice,
    ) -> Result<(SimState, TraceEvent), SimError> {
        let info = &self.plans[choice.plan].info;
        let mut locals = vec![(info.proc_param.clone(), Value::Proc(choice.proc.clone()))];
        locals.extend(choice.binding.iter().cloned());
        let mut env = self.env(state, &locals);
        let mut next = state.clone();
        let mut delta = None;
        for a in &info.decl.actions {
            let ctx = || {
                format!(
                    "action {} of event {} at {}",
                    a.label,
                    info.name(),
                    choice.proc
                )
            };
            match &a.value {
                Action::LocalAssign { var, index, rhs } => {
                    let idx = env.eval(index).map_err(SimError::eval(ctx()))?;
                    let v = env.eval(rhs).map_err(SimError::eval(ctx()))?;
                    let mut m = next
                        .vars
                        .get(var)
                        .and_then(Value::as_map)
                        .unwrap_or_default();
                    m.insert(idx, v);
                    next.vars.insert(var.clone(), Value::map(m));
                }
                Action::ChannelAssign { op, src, dst, msg } => {
                    let key = ChannelKey {
                        src: env.eval(src).map_err(SimError::eval(ctx()))?,
                        dst: env.eval(dst).map_err(SimError::eval(ctx()))?,
                        msg: env.eval(msg).map_err(SimError::eval(ctx()))?,
                    };
                    let kind = match op {
                        ChannelOp::Send => DeltaKind::Send,
                        ChannelOp::Receive => DeltaKind::Receive,
                    };
                    apply_delta(&mut next, kind, &key)?;
                    delta = Some((kind, key));
                }
                Action::Assign { var, .. } => {
                    return Err(SimError::Config(format!(
                        "event {} assigns `{var}` as a whole",
                        info.name()
                    )))
                }
            }
        }
        next.step_count += 1;
        let ev = TraceEvent {
            step: next.step_count,
            event: choice.event.clone(),
            proc: choice.proc.clone(),
            binding: choice.binding.iter().cloned().collect(),
            channel_delta: delta,
        };
        Ok((next, ev))
    }

    /// Drops one in-transit copy of the message under `key`.
    pub fn lose(
        &self,
        state: &SimState,
        key: &ChannelKey,
    ) -> Result<(SimState, TraceEvent), SimError> {
        let mut next = state.clone();
        apply_delta(&mut next, DeltaKind::Lose, key)?;
        next.step_count += 1;
        let proc = match &key.src {
            Value::Proc(p) => p.clone(),
            other => Ident::new(other.to_string()).unwrap_or_else(|| Ident::from("env")),
        };
        let ev = TraceEvent {
            step: next.step_count,
            event: Ident::from("lose"),
            proc,
            binding: BTreeMap::new(),
            channel_delta: Some((DeltaKind::Lose, key.clone())),
        };
        Ok((next, ev))
    }

    /// Labels of violated invariants. Besides the machine invariants this
    /// checks `pc_states` (each pc lies in the StatesSet of its class) and
    /// `channels_conservation` (`sent = in_channel + received`, or `>=` when lossy).
    pub fn check_invariants(&self, state: &SimState, lossy: bool) -> Result<Vec<String>, SimError> {
        let mut violated = Vec::new();
        let mut env = self.env(state, &[]);
        for inv in &self.invariants {
            let ok = env
                .eval_bool(&inv.value)
                .map_err(SimError::eval(format!("invariant {}", inv.label)))?;
            if !ok {
                violated.push(inv.label.to_string());
            }
        }
        let states_ok = self.procs.iter().all(|p| {
            let class = self
                .prog
                .class(p.class.as_str())
                .expect("process class exists");
            state
                .pc(p.name.as_str())
                .is_some_and(|s| class.states.contains(s))
        });
        if !states_ok {
            violated.push("pc_states".to_string());
        }
        let conserved = state.channels.values().all(|c| {
            let nonneg = c.sent >= 0 && c.in_channel >= 0 && c.received >= 0;
            let balance = if lossy {
                c.sent >= c.in_channel + c.received
            } else {
                c.sent == c.in_channel + c.received
            };
            nonneg && balance
        });
        if !conserved {
            violated.push("channels_conservation".to_string());
        }
        Ok(violated)
    }

    pub fn all_done(&self, state: &SimState) -> bool {
        self.procs.iter().all(|p| {
            state
                .pc(p.name.as_str())
                .is_some_and(|s| s == crate::analyzer::DONE)
        })
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunResult, SimError> {
        self.run_observed(opts, &mut |_, _| {})
    }

    /// Like [`Simulator::run`], calling `observer` on the initial state and
    /// after every step.
    pub fn run_observed(
        &self,
        opts: &RunOptions,
        observer: &mut dyn FnMut(&SimState, Option<&TraceEvent>),
    ) -> Result<RunResult, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut state = self.init_state(opts.seed)?;
        let mut trace = Vec::new();
        observer(&state, None);
        let finish = |outcome, state: SimState, trace| RunResult {
            outcome,
            steps: state.step_count,
            trace,
            final_state: state,
        };
        let violated = self.check_invariants(&state, opts.lossy)?;
        if !violated.is_empty() {
            return Ok(finish(
                Outcome::InvariantViolation { labels: violated },
                state,
                trace,
            ));
        }
        loop {
            let enabled = self.enabled_events(&state)?;
            let in_transit: Vec<ChannelKey> = state.in_transit().into_iter().cloned().collect();
            let can_lose = opts.lossy && !in_transit.is_empty();
            if enabled.is_empty() && self.all_done(&state) {
                return Ok(finish(Outcome::Terminated, state, trace));
            }
            if enabled.is_empty() && !can_lose {
                return Ok(finish(Outcome::StepLimit { stalled: true }, state, trace));
            }
            if state.step_count >= opts.max_steps {
                return Ok(finish(Outcome::StepLimit { stalled: false }, state, trace));
            }
            let lose = can_lose && (enabled.is_empty() || rng.gen_bool(opts.loss_prob));
            let (next, ev) = if lose {
                let key = &in_transit[rng.gen_range(0..in_transit.len())];
                self.lose(&state, key)?
            } else {
                let choice = &enabled[rng.gen_range(0..enabled.len())];
                self.fire_event(&state, choice)?
            };
            state = next;
            observer(&state, Some(&ev));
            trace.push(ev);
            let violated = self.check_invariants(&state, opts.lossy)?;
            if !violated.is_empty() {
                return Ok(finish(
                    Outcome::InvariantViolation { labels: violated },
                    state,
                    trace,
                ));
            }
        }
    }
}

impl SimState {
    fn empty(seed: u64) -> SimState {
        SimState {
            vars: BTreeMap::new(),
            channels: BTreeMap::new(),
            step_count: 0,
            rng_seed: seed,
        }
    }
}

fn apply_delta(state: &mut SimState, kind: DeltaKind, key: &ChannelKey) -> Result<(), SimError> {
    let c = state.channels.entry(key.clone()).or_default();
    match kind {
        DeltaKind::Send => {
            c.sent += 1;
            c.in_channel += 1;
        }
        DeltaKind::Receive => {
            c.in_channel -= 1;
            c.received += 1;
        }
        DeltaKind::Lose => c.in_channel -= 1,
    }
    if c.in_channel < 0 {
        return Err(SimError::NegativeCounter(format!(
            "{} -> {}: {}",
            key.src, key.dst, key.msg
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_context, parse_machine};

    fn program() -> AnalyzedProgram {
        let ctx = parse_context(
            include_str!("../../fixtures/request_answer.lbc"),
            std::path::Path::new("c.lbc"),
        )
        .unwrap();
        let mch = parse_machine(
            include_str!("../../fixtures/request_answer.lbm"),
            std::path::Path::new("m.lbm"),
        )
        .unwrap();
        crate::analyzer::analyze(&ctx, &mch).unwrap()
    }

    fn config(resources: &[i64]) -> SimConfig {
        let mut text = format!("size.Q = {}\n", resources.len());
        if resources.is_empty() {
            text.push_str("availableResources = {}\n");
        }
        for (i, r) in resources.iter().enumerate() {
            text.push_str(&format!("availableResources.q{} = {r}\n", i + 1));
        }
        SimConfig::parse(&text).unwrap()
    }

    fn p(s: &str) -> Value {
        Value::Proc(s.into())
    }

    fn request() -> Value {
        Value::Enum("MessagePrefixes".into(), "request".into())
    }

    #[test]
    fn initial_state_for_two_answerers() {
        let sim = Simulator::new(&program(), &config(&[5, 7])).unwrap();
        let s = sim.init_state(0).unwrap();
        assert_eq!(s.pc("p").unwrap(), "sr");
        assert_eq!(s.pc("q1").unwrap(), "wr");
        assert_eq!(s.pc("q2").unwrap(), "wr");
        assert_eq!(s.get("result", "p"), Some(&Value::empty()));
        assert!(s.channels.is_empty());
        assert_eq!(
            sim.constant("network").unwrap().as_map().unwrap()[&p("p")],
            Value::set([p("q1"), p("q2")])
        );
    }

    type Named = (String, String, Vec<(Ident, Value)>);

    #[test]
    fn initially_only_requests_are_enabled() {
        let sim = Simulator::new(&program(), &config(&[5, 7])).unwrap();
        let s = sim.init_state(0).unwrap();
        let got: Vec<Named> = sim
            .enabled_events(&s)
            .unwrap()
            .into_iter()
            .map(|c| (c.event.to_string(), c.proc.to_string(), c.binding))
            .collect();
        assert_eq!(
            got,
            vec![
                (
                    "sendRequest".into(),
                    "p".into(),
                    vec![(Ident::from("q"), p("q1"))]
                ),
                (
                    "sendRequest".into(),
                    "p".into(),
                    vec![(Ident::from("q"), p("q2"))]
                ),
            ]
        );
    }

    #[test]
    fn counters_follow_send_then_receive() {
        let sim = Simulator::new(&program(), &config(&[5])).unwrap();
        let s0 = sim.init_state(0).unwrap();
        let send = sim.enabled_events(&s0).unwrap().remove(0);
        let (s1, ev) = sim.fire_event(&s0, &send).unwrap();
        let key = ChannelKey {
            src: p("p"),
            dst: p("q1"),
            msg: request(),
        };
        assert_eq!(
            s1.channels[&key],
            Counters {
                sent: 1,
                in_channel: 1,
                received: 0
            }
        );
        assert_eq!(ev.channel_delta.as_ref().unwrap().0, DeltaKind::Send);
        let names: Vec<String> = sim
            .enabled_events(&s1)
            .unwrap()
            .iter()
            .map(|c| format!("{}@{}", c.event, c.proc))
            .collect();
        assert_eq!(names, ["stopSending@p", "receiveRequest@q1"]);
        let recv = sim
            .enabled_events(&s1)
            .unwrap()
            .into_iter()
            .find(|c| c.event == "receiveRequest")
            .unwrap();
        let (s2, _) = sim.fire_event(&s1, &recv).unwrap();
        assert_eq!(
            s2.channels[&key],
            Counters {
                sent: 1,
                in_channel: 0,
                received: 1
            }
        );
        assert_eq!(s2.step_count, 2);
    }

    #[test]
    fn stop_sending_is_internal() {
        let sim = Simulator::new(&program(), &config(&[5])).unwrap();
        let s0 = sim.init_state(0).unwrap();
        let send = sim.enabled_events(&s0).unwrap().remove(0);
        let (s1, _) = sim.fire_event(&s0, &send).unwrap();
        let stop = sim.enabled_events(&s1).unwrap().remove(0);
        let (s2, ev) = sim.fire_event(&s1, &stop).unwrap();
        assert_eq!(s2.pc("p").unwrap(), "wa");
        assert_eq!(s2.channels, s1.channels);
        assert!(ev.channel_delta.is_none());
    }

    #[test]
    fn reliable_run_terminates_with_resources() {
        let sim = Simulator::new(&program(), &config(&[5, 7, 11])).unwrap();
        let opts = RunOptions {
            seed: 1,
            max_steps: 1000,
            lossy: false,
            loss_prob: 0.0,
        };
        let r = sim.run(&opts).unwrap();
        assert_eq!(r.outcome, Outcome::Terminated);
        assert_eq!(r.steps, 2 + 5 * 3);
        let expected = Value::map([
            (p("q1"), Value::Int(5)),
            (p("q2"), Value::Int(7)),
            (p("q3"), Value::Int(11)),
        ]);
        assert_eq!(r.final_state.get("result", "p"), Some(&expected));
        assert_eq!(r.final_state.totals().sent, 6);
        assert_eq!(sim.run(&opts).unwrap(), r);
    }

    #[test]
    fn missing_holes_are_reported() {
        let err = Simulator::new(&program(), &SimConfig::parse("size.Q = 2").unwrap()).unwrap_err();
        assert_eq!(
            err,
            SimError::MissingConfig {
                holes: vec!["availableResources".into()]
            }
        );
        let err = Simulator::new(&program(), &SimConfig::default()).unwrap_err();
        assert_eq!(
            err,
            SimError::MissingConfig {
                holes: vec!["NQ".into(), "availableResources".into()]
            }
        );
        let partial = SimConfig::parse("size.Q = 2\navailableResources.q1 = 1").unwrap();
        assert!(matches!(
            Simulator::new(&program(), &partial),
            Err(SimError::Config(_))
        ));
    }

    #[test]
    fn empty_class_leaves_p_alone() {
        let sim = Simulator::new(&program(), &config(&[])).unwrap();
        assert_eq!(sim.processes().len(), 1);
        let s = sim.init_state(0).unwrap();
        assert_eq!(
            sim.constant("network").unwrap().as_map().unwrap()[&p("p")],
            Value::empty()
        );
        let names: Vec<Ident> = sim
            .enabled_events(&s)
            .unwrap()
            .into_iter()
            .map(|c| c.event)
            .collect();
        assert_eq!(names, [Ident::from("stopSending")]);
    }

    #[test]
    fn certain_loss_never_delivers() {
        let sim = Simulator::new(&program(), &config(&[5, 7])).unwrap();
        let opts = RunOptions {
            seed: 3,
            max_steps: 200,
            lossy: true,
            loss_prob: 1.0,
        };
        let r = sim.run(&opts).unwrap();
        assert!(matches!(r.outcome, Outcome::StepLimit { .. }));
        assert!(matches!(
            r.final_state.pc("p").unwrap().as_str(),
            "sr" | "wa"
        ));
        assert_eq!(r.final_state.totals().received, 0);
    }

    #[test]
    fn injected_faults_are_flagged() {
        let sim = Simulator::new(&program(), &config(&[5])).unwrap();
        let mut s = sim.init_state(0).unwrap();
        assert!(sim.check_invariants(&s, false).unwrap().is_empty());
        let mut pc = s.vars["pc"].as_map().unwrap();
        pc.insert(p("p"), Value::StateName("wr".into()));
        s.vars.insert(Ident::from("pc"), Value::map(pc));
        assert_eq!(sim.check_invariants(&s, false).unwrap(), ["pc_states"]);

        let mut s = sim.init_state(0).unwrap();
        s.channels.insert(
            ChannelKey {
                src: p("p"),
                dst: p("q1"),
                msg: request(),
            },
            Counters {
                sent: 0,
                in_channel: -1,
                received: 0,
            },
        );
        assert_eq!(
            sim.check_invariants(&s, true).unwrap(),
            ["channels_conservation"]
        );
    }

    #[test]
    fn step_limit_is_respected() {
        let sim = Simulator::new(&program(), &config(&[5])).unwrap();
        let opts = RunOptions {
            seed: 0,
            max_steps: 1,
            lossy: false,
            loss_prob: 0.0,
        };
        let r = sim.run(&opts).unwrap();
        assert_eq!(r.outcome, Outcome::StepLimit { stalled: false });
        assert_eq!(r.trace.len(), 1);
    }
}
