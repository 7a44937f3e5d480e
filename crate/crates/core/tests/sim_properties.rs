use std::collections::{BTreeSet, VecDeque};

use localeb::ast::Ident;
use localeb::sim::{
    explore, ChannelKey, Counters, DeltaKind, Outcome, RunOptions, SimState, Value,
};
use proptest::prelude::*;

mod common;

fn reliable(seed: u64) -> RunOptions {
    RunOptions {
        seed,
        max_steps: 10_000,
        lossy: false,
        loss_prob: 0.0,
    }
}

fn proc(name: &str) -> Value {
    Value::Proc(Ident::from(name))
}

fn is_request(msg: &Value) -> bool {
    matches!(msg, Value::Enum(_, e) if e == "request")
}

fn is_answer(msg: &Value) -> bool {
    matches!(msg, Value::Tuple(items) if matches!(&items[0], Value::Enum(_, e) if e == "answer"))
}

/// Checks the counter relation on every key, independently of the simulator's monitor.
fn balanced(s: &SimState, lossy: bool) -> Result<(), String> {
    for (k, c) in &s.channels {
        if c.sent < 0 || c.in_channel < 0 || c.received < 0 {
            return Err(format!("negative counter on {k:?}: {c:?}"));
        }
        let ok = if lossy {
            c.sent >= c.in_channel + c.received
        } else {
            c.sent == c.in_channel + c.received
        };
        if !ok {
            return Err(format!("unbalanced {k:?}: {c:?}"));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reliable_runs_terminate_with_the_configured_resources(nq in 0usize..5, seed in any::<u64>()) {
        let sim = common::simulator(nq);
        let mut problems = Vec::new();
        let r = sim
            .run_observed(&reliable(seed), &mut |s, _| {
                if let Err(e) = balanced(s, false) {
                    problems.push(e);
                }
            })
            .unwrap();
        prop_assert!(problems.is_empty(), "{:?}", problems);
        prop_assert_eq!(&r.outcome, &Outcome::Terminated);
        prop_assert_eq!(r.steps, 2 + 5 * nq);
        prop_assert!(r.steps <= 10 * (2 + 4 * nq));
        let expected = Value::map((1..=nq).map(|i| (proc(&format!("q{i}")), Value::Int(common::resource(i)))));
        prop_assert_eq!(r.final_state.get("result", "p"), Some(&expected));
        for p in sim.processes() {
            prop_assert_eq!(r.final_state.pc(p.name.as_str()).map(Ident::as_str), Some("done"));
        }
        let requests: i64 = r.final_state.channels.iter().filter(|(k, _)| is_request(&k.msg)).map(|(_, c)| c.sent).sum();
        let answers: i64 = r.final_state.channels.iter().filter(|(k, _)| is_answer(&k.msg)).map(|(_, c)| c.sent).sum();
        prop_assert_eq!((requests, answers), (nq as i64, nq as i64));
        let steps: Vec<usize> = r.trace.iter().map(|e| e.step).collect();
        prop_assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lost_messages_account_for_the_counter_gap(seed in any::<u64>(), loss in 0.0f64..1.0) {
        let sim = common::simulator(3);
        let opts = RunOptions { seed, max_steps: 400, lossy: true, loss_prob: loss };
        let mut problems = Vec::new();
        let r = sim
            .run_observed(&opts, &mut |s, _| {
                if let Err(e) = balanced(s, true) {
                    problems.push(e);
                }
            })
            .unwrap();
        prop_assert!(problems.is_empty(), "{:?}", problems);
        let violated = matches!(r.outcome, Outcome::InvariantViolation { .. });
        prop_assert!(!violated, "{:?}", r.outcome);
        let losses = r
            .trace
            .iter()
            .filter(|e| matches!(e.channel_delta, Some((DeltaKind::Lose, _))))
            .count() as i64;
        let t = r.final_state.totals();
        prop_assert_eq!(t.sent - t.in_channel - t.received, losses);
    }

    #[test]
    fn identical_seeds_give_identical_traces(nq in 1usize..4, seed in any::<u64>(), lossy in any::<bool>()) {
        let sim = common::simulator(nq);
        let opts = RunOptions { seed, max_steps: 500, lossy, loss_prob: if lossy { 0.3 } else { 0.0 } };
        prop_assert_eq!(sim.run(&opts).unwrap().trace_file(), sim.run(&opts).unwrap().trace_file());
    }
}

/// The one-answerer protocol written out by hand: the two control states,
/// P's result, and counters for the single request and answer keys.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
struct Hand {
    pc_p: &'static str,
    pc_q: &'static str,
    result: Option<i64>,
    req: (i64, i64, i64),
    ans: (i64, i64, i64),
}

fn hand_successors(s: &Hand, resource: i64) -> Vec<Hand> {
    let mut out = Vec::new();
    if s.pc_p == "sr" && s.req.0 == 0 {
        out.push(Hand {
            req: (s.req.0 + 1, s.req.1 + 1, s.req.2),
            ..s.clone()
        });
    }
    if s.pc_p == "sr" && s.req.0 > 0 {
        out.push(Hand {
            pc_p: "wa",
            ..s.clone()
        });
    }
    if s.pc_p == "wa" && s.ans.1 > 0 {
        out.push(Hand {
            ans: (s.ans.0, s.ans.1 - 1, s.ans.2 + 1),
            result: Some(resource),
            ..s.clone()
        });
    }
    if s.pc_p == "wa" && s.result.is_some() {
        out.push(Hand {
            pc_p: "done",
            ..s.clone()
        });
    }
    if s.pc_q == "wr" && s.req.1 > 0 {
        out.push(Hand {
            req: (s.req.0, s.req.1 - 1, s.req.2 + 1),
            ..s.clone()
        });
    }
    if s.pc_q == "wr" && s.req.2 > 0 && s.ans.0 == 0 {
        out.push(Hand {
            ans: (s.ans.0 + 1, s.ans.1 + 1, s.ans.2),
            ..s.clone()
        });
    }
    if s.pc_q == "wr" && s.ans.0 > 0 {
        out.push(Hand {
            pc_q: "done",
            ..s.clone()
        });
    }
    out
}

fn hand_explore(resource: i64) -> (usize, BTreeSet<Hand>) {
    let init = Hand {
        pc_p: "sr",
        pc_q: "wr",
        result: None,
        req: (0, 0, 0),
        ans: (0, 0, 0),
    };
    let mut seen = BTreeSet::from([init.clone()]);
    let mut queue = VecDeque::from([init]);
    let mut terminal = BTreeSet::new();
    while let Some(s) = queue.pop_front() {
        let next = hand_successors(&s, resource);
        if next.is_empty() {
            terminal.insert(s);
        }
        for n in next {
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    (seen.len(), terminal)
}

fn to_hand(s: &SimState) -> Hand {
    let name = |p: &str| -> &'static str {
        match s.pc(p).unwrap().as_str() {
            "sr" => "sr",
            "wa" => "wa",
            "wr" => "wr",
            "done" => "done",
            other => panic!("unexpected state {other}"),
        }
    };
    let counters = |pred: fn(&Value) -> bool| {
        let c = s
            .channels
            .iter()
            .find(|(k, _)| pred(&k.msg))
            .map_or(Counters::default(), |(_, c)| *c);
        (c.sent, c.in_channel, c.received)
    };
    let result = s
        .get("result", "p")
        .unwrap()
        .as_map()
        .unwrap()
        .get(&proc("q1"))
        .and_then(Value::as_int);
    Hand {
        pc_p: name("p"),
        pc_q: name("q1"),
        result,
        req: counters(is_request),
        ans: counters(is_answer),
    }
}

#[test]
fn exhaustive_search_agrees_with_the_hand_model() {
    let sim = common::simulator(1);
    let report = explore(&sim, 10_000).unwrap();
    let (states, terminal) = hand_explore(common::resource(1));
    assert!(report.complete);
    assert!(report.violations.is_empty());
    assert_eq!(report.states, states);
    let found: BTreeSet<Hand> = report.terminal.iter().map(to_hand).collect();
    assert_eq!(found, terminal);
    assert_eq!(terminal.len(), 1);
}

#[test]
fn random_runs_reach_the_unique_terminal_state() {
    let sim = common::simulator(1);
    let report = explore(&sim, 10_000).unwrap();
    let only = &report.terminal[0];
    for seed in 0..30 {
        let r = sim.run(&reliable(seed)).unwrap();
        assert_eq!(r.final_state.vars, only.vars);
        assert_eq!(r.final_state.channels, only.channels);
    }
}

#[test]
fn after_both_requests_p_may_stop_and_each_q_may_receive() {
    let sim = common::simulator(2);
    let mut s = sim.init_state(0).unwrap();
    for _ in 0..2 {
        let send = sim
            .enabled_events(&s)
            .unwrap()
            .into_iter()
            .find(|c| c.event == "sendRequest")
            .unwrap();
        s = sim.fire_event(&s, &send).unwrap().0;
    }
    let got: Vec<(String, String)> = sim
        .enabled_events(&s)
        .unwrap()
        .into_iter()
        .map(|c| (c.event.to_string(), c.proc.to_string()))
        .collect();
    let expected = [
        ("stopSending", "p"),
        ("receiveRequest", "q1"),
        ("receiveRequest", "q2"),
    ];
    assert_eq!(got, expected.map(|(a, b)| (a.to_string(), b.to_string())));
}

#[test]
fn terminal_state_has_no_enabled_events() {
    let sim = common::simulator(2);
    let r = sim.run(&reliable(9)).unwrap();
    assert!(sim.enabled_events(&r.final_state).unwrap().is_empty());
    let key = ChannelKey {
        src: proc("q2"),
        dst: proc("p"),
        msg: Value::pair(
            Value::Enum("MessagePrefixes".into(), "answer".into()),
            Value::Int(common::resource(2)),
        ),
    };
    assert_eq!(
        r.final_state.channels[&key],
        Counters {
            sent: 1,
            in_channel: 0,
            received: 1
        }
    );
}

#[test]
fn trace_json_shape() {
    let sim = common::simulator(1);
    let r = sim.run(&reliable(0)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.trace_file()).unwrap();
    assert_eq!(json["outcome"]["kind"], "Terminated");
    assert_eq!(json["steps"], 7);
    assert_eq!(json["trace"].as_array().unwrap().len(), 7);
    assert_eq!(json["trace"][0]["event"], "sendRequest");
    assert_eq!(json["trace"][0]["channel_delta"]["kind"], "send");
    assert_eq!(
        json["final_state"]["vars"]["result"]["p"]["q1"],
        common::resource(1)
    );
}
