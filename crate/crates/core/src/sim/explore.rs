use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::ast::Ident;

use super::{ChannelKey, Counters, SimError, SimState, Simulator, Value};

type StateKey = (BTreeMap<Ident, Value>, BTreeMap<ChannelKey, Counters>);

/// Result of a breadth-first search over every interleaving.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreReport {
    /// Distinct states reached, the initial state included.
    pub states: usize,
    pub transitions: usize,
    /// States with no enabled event, in discovery order.
    pub terminal: Vec<SimState>,
    /// Longest path from the initial state, in steps.
    pub max_depth: usize,
    /// Invariant labels violated somewhere in the reachable space.
    pub violations: Vec<String>,
    /// False when the search stopped at `max_states` before exhausting the space.
    pub complete: bool,
}

/// Explores all interleavings over reliable channels, visiting at most
/// `max_states` distinct states.
pub fn explore(sim: &Simulator, max_states: usize) -> Result<ExploreReport, SimError> {
    let init = sim.init_state(0)?;
    let mut seen: HashSet<StateKey> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut report = ExploreReport {
        states: 0,
        transitions: 0,
        terminal: Vec::new(),
        max_depth: 0,
        violations: Vec::new(),
        complete: true,
    };
    seen.insert((init.vars.clone(), init.channels.clone()));
    queue.push_back(init);
    while let Some(state) = queue.pop_front() {
        report.states += 1;
        report.max_depth = report.max_depth.max(state.step_count);
        for label in sim.check_invariants(&state, false)? {
            if !report.violations.contains(&label) {
                report.violations.push(label);
            }
        }
        let enabled = sim.enabled_events(&state)?;
        if enabled.is_empty() {
            report.terminal.push(state);
            continue;
        }
        for choice in &enabled {
            let (next, _) = sim.fire_event(&state, choice)?;
            report.transitions += 1;
            let key = (next.vars.clone(), next.channels.clone());
            if seen.contains(&key) {
                continue;
            }
            if seen.len() >= max_states {
                report.complete = false;
                continue;
            }
            seen.insert(key);
            queue.push_back(next);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::parser::{parse_context, parse_machine};

    #[test]
    fn single_answerer_has_one_terminal_state() {
        let ctx = parse_context(
            include_str!("../../fixtures/request_answer.lbc"),
            std::path::Path::new("c"),
        )
        .unwrap();
        let mch = parse_machine(
            include_str!("../../fixtures/request_answer.lbm"),
            std::path::Path::new("m"),
        )
        .unwrap();
        let prog = crate::analyzer::analyze(&ctx, &mch).unwrap();
        let cfg = SimConfig::parse("size.Q = 1\navailableResources.q1 = 4").unwrap();
        let sim = Simulator::new(&prog, &cfg).unwrap();
        let r = explore(&sim, 10_000).unwrap();
        assert!(r.complete);
        assert_eq!(r.terminal.len(), 1);
        assert_eq!(r.max_depth, 7);
        assert!(r.violations.is_empty());
        assert!(sim.all_done(&r.terminal[0]));
    }

    #[test]
    fn state_budget_truncates() {
        let ctx = parse_context(
            include_str!("../../fixtures/request_answer.lbc"),
            std::path::Path::new("c"),
        )
        .unwrap();
        let mch = parse_machine(
            include_str!("../../fixtures/request_answer.lbm"),
            std::path::Path::new("m"),
        )
        .unwrap();
        let prog = crate::analyzer::analyze(&ctx, &mch).unwrap();
        let cfg =
            SimConfig::parse("size.Q = 2\navailableResources.q1 = 4\navailableResources.q2 = 4")
                .unwrap();
        let sim = Simulator::new(&prog, &cfg).unwrap();
        let r = explore(&sim, 5).unwrap();
        assert!(!r.complete);
        assert!(r.states <= 5);
    }
}
