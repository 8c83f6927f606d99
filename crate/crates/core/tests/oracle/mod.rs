//! Naive reference interpreter for agent arbitration, used to cross-check the
//! forest implementation on random forests and request sequences.
//!
//! State is a flat array of integer priorities (0 = no action) and a parent
//! table. Nothing is shared with the engine except the public API used to
//! drive it.

#![allow(dead_code)]

use std::collections::BTreeSet;

use docent_core::agent::{ActionCall, ActionOrigin, ActionRequest, ActionSpec, Activity, AgentDecl, ResolvedSpec};
use docent_core::{Forest, Priority, Verdict};
use proptest::prelude::*;

pub mod pointing;

pub const MAX_AGENTS: usize = 5;
pub const MAX_DEPTH: usize = 3;
pub const MAX_OPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Request { agent: usize, priority: u8, from_parent: bool },
    Complete { agent: usize },
    Stop { agent: usize },
    Resume { agent: usize },
}

#[derive(Debug, Clone)]
pub struct Case {
    pub parents: Vec<Option<usize>>,
    pub ops: Vec<Op>,
}

fn depth(parents: &[Option<usize>], mut i: usize) -> usize {
    let mut d = 1;
    while let Some(p) = parents[i] {
        d += 1;
        i = p;
    }
    d
}

fn parents_strategy() -> impl Strategy<Value = Vec<Option<usize>>> {
    (1..=MAX_AGENTS)
        .prop_flat_map(|n| proptest::collection::vec((any::<bool>(), any::<prop::sample::Index>()), n))
        .prop_map(|picks| {
            let mut parents: Vec<Option<usize>> = Vec::with_capacity(picks.len());
            for (i, (root, pick)) in picks.into_iter().enumerate() {
                let eligible: Vec<usize> = (0..i).filter(|&j| depth(&parents, j) < MAX_DEPTH).collect();
                if root || eligible.is_empty() {
                    parents.push(None);
                } else {
                    parents.push(Some(eligible[pick.index(eligible.len())]));
                }
            }
            parents
        })
}

fn op_strategy(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        8 => (0..n, 1u8..=4, prop::bool::weighted(0.2))
            .prop_map(|(agent, priority, from_parent)| Op::Request { agent, priority, from_parent }),
        3 => (0..n).prop_map(|agent| Op::Complete { agent }),
        1 => (0..n).prop_map(|agent| Op::Stop { agent }),
        1 => (0..n).prop_map(|agent| Op::Resume { agent }),
    ]
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    parents_strategy().prop_flat_map(|parents| {
        let n = parents.len();
        proptest::collection::vec(op_strategy(n), 0..=MAX_OPS).prop_map(move |ops| Case {
            parents: parents.clone(),
            ops,
        })
    })
}

/// What one operation did: verdict (requests only) and the set of
/// `(agent, priority)` pairs whose actions were cancelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Option<Verdict>,
    pub cancelled: BTreeSet<(usize, u8)>,
}

pub struct Reference {
    parents: Vec<Option<usize>>,
    current: Vec<u8>,
    stopped: Vec<bool>,
    strict: bool,
}

impl Reference {
    pub fn new(parents: &[Option<usize>], strict: bool) -> Self {
        Reference {
            parents: parents.to_vec(),
            current: vec![0; parents.len()],
            stopped: vec![false; parents.len()],
            strict,
        }
    }

    fn ancestors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut at = self.parents[i];
        while let Some(p) = at {
            out.push(p);
            at = self.parents[p];
        }
        out
    }

    fn descendants(&self, i: usize) -> Vec<usize> {
        (0..self.parents.len())
            .filter(|&j| self.ancestors(j).contains(&i))
            .collect()
    }

    fn cancel(&mut self, agents: &[usize], out: &mut BTreeSet<(usize, u8)>) {
        for &a in agents {
            if self.current[a] != 0 {
                out.insert((a, self.current[a]));
                self.current[a] = 0;
            }
        }
    }

    pub fn apply(&mut self, op: Op) -> Outcome {
        let mut cancelled = BTreeSet::new();
        let verdict = match op {
            Op::Request { agent, priority, from_parent } => Some(self.request(agent, priority, from_parent, &mut cancelled)),
            Op::Complete { agent } => {
                self.current[agent] = 0;
                None
            }
            Op::Stop { agent } => {
                if !self.stopped[agent] {
                    self.cancel(&[agent], &mut cancelled);
                    self.stopped[agent] = true;
                }
                None
            }
            Op::Resume { agent } => {
                self.stopped[agent] = false;
                None
            }
        };
        Outcome { verdict, cancelled }
    }

    fn request(&mut self, agent: usize, p_a: u8, from_parent: bool, cancelled: &mut BTreeSet<(usize, u8)>) -> Verdict {
        if self.stopped[agent] {
            return Verdict::Ignore;
        }
        if self.parents[agent].is_some() && !from_parent {
            let ancestors = self.ancestors(agent);
            let p_anc = ancestors.iter().map(|&a| self.current[a]).max().unwrap_or(0);
            if p_a > p_anc && p_anc != 0 {
                self.cancel(&ancestors, cancelled);
            } else if p_anc != 0 || self.strict {
                return Verdict::Ignore;
            }
        }
        if self.current[agent] < p_a {
            let descendants = self.descendants(agent);
            let p_des = descendants.iter().map(|&d| self.current[d]).max().unwrap_or(0);
            if p_des < p_a {
                self.cancel(&descendants, cancelled);
            }
            self.cancel(&[agent], cancelled);
            self.current[agent] = p_a;
            Verdict::Execute
        } else {
            Verdict::Ignore
        }
    }
}

pub fn build_engine(parents: &[Option<usize>], strict: bool) -> Forest {
    let names: Vec<String> = (0..parents.len()).map(|i| format!("a{i}")).collect();
    let decls: Vec<AgentDecl> = parents
        .iter()
        .enumerate()
        .map(|(i, p)| AgentDecl::new(&names[i], p.map(|p| names[p].as_str())))
        .collect();
    let mut forest = Forest::new(&decls, |_, spec: &ActionSpec| {
        Ok::<_, docent_core::agent::ForestError>(ResolvedSpec {
            action_type: spec.action_type.clone(),
            params: Vec::new(),
        })
    })
    .expect("generated forest is acyclic");
    forest.set_strict(strict);
    forest
}

fn engine_apply(forest: &mut Forest, op: Op, now: f64) -> Outcome {
    let idx = |forest: &Forest, i: usize| forest.lookup(&format!("a{i}")).expect("agent exists");
    let to_set = |forest: &Forest, list: Vec<docent_core::agent::Cancellation>| {
        list.into_iter()
            .map(|c| {
                let level = match c.priority {
                    Priority::Command(k) => k,
                    other => panic!("unexpected priority {other:?}"),
                };
                (forest.name(c.agent)[1..].parse::<usize>().expect("agent name"), level)
            })
            .collect::<BTreeSet<_>>()
    };
    match op {
        Op::Request { agent, priority, from_parent } => {
            let at = idx(forest, agent);
            let request = ActionRequest {
                call: ActionCall {
                    action_type: "act".into(),
                    params: Vec::new(),
                    base_priority: priority,
                    duration: Some(1.0),
                },
                override_priority: None,
                from_parent,
                origin: ActionOrigin::Command,
            };
            let decision = forest.handle_action_at(at, request, now);
            assert_eq!(decision.effective_priority, Priority::Command(priority));
            Outcome {
                verdict: Some(decision.verdict),
                cancelled: to_set(forest, decision.cancelled),
            }
        }
        Op::Complete { agent } => {
            let at = idx(forest, agent);
            forest.on_action_complete(at, now);
            Outcome { verdict: None, cancelled: BTreeSet::new() }
        }
        Op::Stop { agent } => {
            let at = idx(forest, agent);
            let cancelled = forest.set_activity_at(at, Activity::Stopped, now);
            Outcome { verdict: None, cancelled: to_set(forest, cancelled) }
        }
        Op::Resume { agent } => {
            let at = idx(forest, agent);
            forest.set_activity_at(at, Activity::Active, now);
            Outcome { verdict: None, cancelled: BTreeSet::new() }
        }
    }
}

/// Runs a case through both interpreters; describes the first divergence.
pub fn check(case: &Case, strict: bool) -> Result<(), String> {
    let mut engine = build_engine(&case.parents, strict);
    let mut reference = Reference::new(&case.parents, strict);
    for (step, &op) in case.ops.iter().enumerate() {
        let want = reference.apply(op);
        let got = engine_apply(&mut engine, op, step as f64 * 0.1);
        if want != got {
            return Err(format!(
                "strict={strict} step {step} {op:?}: reference {want:?}, engine {got:?} (parents {:?})",
                case.parents
            ));
        }
    }
    Ok(())
}
