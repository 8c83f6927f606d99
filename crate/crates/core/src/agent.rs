//! Agent forest and priority arbitration.
//!
//! Each agent owns one robot subsystem and holds at most one current action.
//! Requests are arbitrated against the agent's own priority and against the
//! highest priority found among its ancestors and descendants:
//!
//! 1. a stopped agent ignores everything;
//! 2. a request that did not come from the parent must beat every active
//!    ancestor, which is then cancelled;
//! 3. the request must beat the agent's own current action; if it also beats
//!    every descendant, the descendants are cancelled.
//!
//! When no ancestor is active, step 2 passes the request through without
//! cancellation unless [`Forest::set_strict`] selects the literal reading,
//! under which such requests are ignored.
//!
//! Besides arbitration the forest tracks when each idle agent should return to
//! its default behavior and when it may start a background action.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::priority::Priority;
use crate::registry::ParamValue;

/// Slack used when comparing simulated times.
pub const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentIdx(usize);

impl AgentIdx {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type InstanceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activity {
    Active,
    Stopped,
}

/// An action type with concrete parameters, as stored in agent configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionSpec {
    pub action_type: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub params: Vec<String>,
}

impl ActionSpec {
    pub fn new(action_type: &str, params: &[&str]) -> Self {
        ActionSpec {
            action_type: action_type.into(),
            params: params.iter().map(|p| String::from(*p)).collect(),
        }
    }
}

/// What an agent is asked to perform.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCall {
    pub action_type: String,
    pub params: Vec<ParamValue>,
    pub base_priority: u8,
    /// `None` for composites, which finish when all delegated parts finish.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionOrigin {
    Command,
    Default,
    Background,
    Delegated {
        parent: AgentIdx,
        instance: InstanceId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRequest {
    pub call: ActionCall,
    pub override_priority: Option<Priority>,
    pub from_parent: bool,
    pub origin: ActionOrigin,
}

impl ActionRequest {
    pub fn command(call: ActionCall) -> Self {
        ActionRequest {
            call,
            override_priority: None,
            from_parent: false,
            origin: ActionOrigin::Command,
        }
    }

    /// A part of a composite, issued by `parent` at the composite's priority.
    pub fn delegated(
        call: ActionCall,
        priority: Priority,
        parent: AgentIdx,
        instance: InstanceId,
    ) -> Self {
        ActionRequest {
            call,
            override_priority: Some(priority),
            from_parent: true,
            origin: ActionOrigin::Delegated { parent, instance },
        }
    }

    pub fn priority(&self) -> Priority {
        self.override_priority
            .unwrap_or(Priority::Command(self.call.base_priority))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionInstance {
    pub id: InstanceId,
    pub call: ActionCall,
    pub origin: ActionOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentAction {
    pub instance: ActionInstance,
    pub priority: Priority,
    pub started_at: f64,
    /// Delegated parts still running, for composites.
    pub parts: BTreeSet<InstanceId>,
}

impl CurrentAction {
    pub fn progress(&self, now: f64) -> Option<f64> {
        match self.instance.call.duration {
            Some(d) if d > 0.0 => Some(((now - self.started_at) / d).max(0.0)),
            Some(_) => Some(1.0),
            None => None,
        }
    }

    pub fn is_finished(&self, now: f64) -> bool {
        match self.instance.call.duration {
            Some(d) => self.started_at + d <= now + TIME_EPSILON,
            None => self.parts.is_empty(),
        }
    }
}

/// Where an idle agent stands relative to its default behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdlePhase {
    /// In its default state (or idle for agents without one).
    Settled,
    /// Waiting to start the default behavior at the given time.
    Returning { at: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSpec {
    pub action_type: String,
    pub params: Vec<ParamValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentNode {
    pub id: String,
    pub parent: Option<AgentIdx>,
    pub children: Vec<AgentIdx>,
    pub activity: Activity,
    pub current: Option<CurrentAction>,
    pub default_behavior: Option<ResolvedSpec>,
    pub background_actions: Vec<ResolvedSpec>,
    pub idle_since: Option<f64>,
    pub phase: IdlePhase,
    pub default_return_delay: f64,
    pub background_threshold: f64,
}

impl AgentNode {
    pub fn current_priority(&self) -> Option<Priority> {
        self.current.as_ref().map(|c| c.priority)
    }

    /// A finished default or background action leaves the agent settled.
    /// Anything else, including an interrupted default, sends it back to its
    /// default behavior after the delay.
    fn phase_after(&self, origin: ActionOrigin, cancelled: bool, now: f64) -> IdlePhase {
        match (origin, &self.default_behavior) {
            (_, None) => IdlePhase::Settled,
            (ActionOrigin::Default | ActionOrigin::Background, _) if !cancelled => IdlePhase::Settled,
            (_, Some(_)) => IdlePhase::Returning {
                at: now + self.default_return_delay,
            },
        }
    }
}

/// One agent declaration in a forest configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentDecl {
    pub id: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub parent: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub default_behavior: Option<ActionSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub background_actions: Vec<ActionSpec>,
    #[cfg_attr(feature = "serde", serde(default = "default_return_delay"))]
    pub default_return_delay: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_background_threshold"))]
    pub background_threshold: f64,
    /// Limb agents can be addressed by name in a tag's first parameter.
    #[cfg_attr(feature = "serde", serde(default))]
    pub limb: bool,
}

pub const DEFAULT_RETURN_DELAY: f64 = 1.5;
pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 10.0;

fn default_return_delay() -> f64 {
    DEFAULT_RETURN_DELAY
}

fn default_background_threshold() -> f64 {
    DEFAULT_BACKGROUND_THRESHOLD
}

impl AgentDecl {
    pub fn new(id: &str, parent: Option<&str>) -> Self {
        AgentDecl {
            id: id.into(),
            parent: parent.map(Into::into),
            default_behavior: None,
            background_actions: Vec::new(),
            default_return_delay: default_return_delay(),
            background_threshold: default_background_threshold(),
            limb: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForestError {
    #[error("agent `{0}` declared twice")]
    DuplicateAgent(String),
    #[error("agent `{agent}` names unknown parent `{parent}`")]
    UnknownParent { agent: String, parent: String },
    #[error("hierarchy cycle through `{0}`")]
    Cycle(String),
    #[error("agent `{0}` has an invalid delay or threshold")]
    InvalidTiming(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Execute,
    Ignore,
    Delay,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Execute => "execute",
            Verdict::Ignore => "ignore",
            Verdict::Delay => "delay",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cancellation {
    pub agent: AgentIdx,
    pub instance: ActionInstance,
    pub priority: Priority,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArbitrationWarning {
    /// The new action runs while a descendant keeps an equal or higher
    /// priority action; their resources may overlap.
    DescendantOverlap {
        descendant: AgentIdx,
        priority: Priority,
    },
    /// Ancestors were cancelled but the request itself was then ignored.
    CancelledThenIgnored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrationDecision {
    pub verdict: Verdict,
    pub cancelled: Vec<Cancellation>,
    pub effective_priority: Priority,
    /// Set when the verdict is `Execute`.
    pub instance: Option<InstanceId>,
    pub warnings: Vec<ArbitrationWarning>,
}

impl ArbitrationDecision {
    fn ignore(priority: Priority, cancelled: Vec<Cancellation>) -> Self {
        let warnings = if cancelled.is_empty() {
            Vec::new()
        } else {
            alloc::vec![ArbitrationWarning::CancelledThenIgnored]
        };
        ArbitrationDecision {
            verdict: Verdict::Ignore,
            cancelled,
            effective_priority: priority,
            instance: None,
            warnings,
        }
    }

    pub fn delay(priority: Priority) -> Self {
        ArbitrationDecision {
            verdict: Verdict::Delay,
            cancelled: Vec::new(),
            effective_priority: priority,
            instance: None,
            warnings: Vec::new(),
        }
    }
}

/// Supplies durations for actions the forest starts on its own.
pub trait Durations {
    fn duration(&mut self, agent: &str, action_type: &str, params: &[ParamValue]) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdleKind {
    Default,
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdleStart {
    pub kind: IdleKind,
    pub decision: ArbitrationDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    nodes: Vec<AgentNode>,
    index: BTreeMap<String, AgentIdx>,
    next_instance: InstanceId,
    strict: bool,
}

impl Forest {
    /// Builds an idle forest. Default behaviors are resolved by the caller;
    /// see the dispatcher for registry-checked construction.
    pub fn new<E: From<ForestError>>(
        decls: &[AgentDecl],
        mut resolve: impl FnMut(&AgentDecl, &ActionSpec) -> Result<ResolvedSpec, E>,
    ) -> Result<Forest, E> {
        let mut index = BTreeMap::new();
        for (i, decl) in decls.iter().enumerate() {
            if index.insert(decl.id.clone(), AgentIdx(i)).is_some() {
                return Err(ForestError::DuplicateAgent(decl.id.clone()).into());
            }
            let timing_ok = |v: f64| v.is_finite() && v >= 0.0;
            if !timing_ok(decl.default_return_delay) || !timing_ok(decl.background_threshold) {
                return Err(ForestError::InvalidTiming(decl.id.clone()).into());
            }
        }
        let mut nodes = Vec::with_capacity(decls.len());
        for decl in decls {
            let parent = match &decl.parent {
                None => None,
                Some(p) => Some(*index.get(p).ok_or_else(|| ForestError::UnknownParent {
                    agent: decl.id.clone(),
                    parent: p.clone(),
                })?),
            };
            let default_behavior = match &decl.default_behavior {
                Some(spec) => Some(resolve(decl, spec)?),
                None => None,
            };
            let background_actions = decl
                .background_actions
                .iter()
                .map(|s| resolve(decl, s))
                .collect::<Result<Vec<_>, E>>()?;
            nodes.push(AgentNode {
                id: decl.id.clone(),
                parent,
                children: Vec::new(),
                activity: Activity::Active,
                current: None,
                default_behavior,
                background_actions,
                idle_since: Some(0.0),
                phase: IdlePhase::Settled,
                default_return_delay: decl.default_return_delay,
                background_threshold: decl.background_threshold,
            });
        }
        for i in 0..nodes.len() {
            let mut seen = 0;
            let mut cursor = nodes[i].parent;
            while let Some(p) = cursor {
                seen += 1;
                if seen > nodes.len() {
                    return Err(ForestError::Cycle(nodes[i].id.clone()).into());
                }
                cursor = nodes[p.0].parent;
            }
            if let Some(p) = nodes[i].parent {
                nodes[p.0].children.push(AgentIdx(i));
            }
        }
        for node in &mut nodes {
            if node.default_behavior.is_some() {
                node.phase = IdlePhase::Returning { at: 0.0 };
            }
        }
        Ok(Forest {
            nodes,
            index,
            next_instance: 1,
            strict: false,
        })
    }

    /// Selects the literal reading of the ancestor check, which ignores
    /// non-parent requests when no ancestor is active.
    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn agent(&self, idx: AgentIdx) -> &AgentNode {
        &self.nodes[idx.0]
    }

    pub fn agents(&self) -> impl Iterator<Item = (AgentIdx, &AgentNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (AgentIdx(i), n))
    }

    pub fn lookup(&self, id: &str) -> Result<AgentIdx, AgentError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| AgentError::UnknownAgent(id.into()))
    }

    pub fn name(&self, idx: AgentIdx) -> &str {
        &self.nodes[idx.0].id
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, idx: AgentIdx) -> Vec<AgentIdx> {
        let mut out = Vec::new();
        let mut cursor = self.nodes[idx.0].parent;
        while let Some(p) = cursor {
            out.push(p);
            cursor = self.nodes[p.0].parent;
        }
        out
    }

    /// Strict descendants in depth-first order.
    pub fn descendants(&self, idx: AgentIdx) -> Vec<AgentIdx> {
        let mut out = Vec::new();
        let mut stack: Vec<AgentIdx> = self.nodes[idx.0].children.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n.0].children.iter().rev().copied());
        }
        out
    }

    fn max_priority(&self, agents: &[AgentIdx]) -> Option<Priority> {
        agents
            .iter()
            .filter_map(|a| self.nodes[a.0].current_priority())
            .max()
    }

    pub fn ancestor_priority(&self, idx: AgentIdx) -> Option<Priority> {
        self.max_priority(&self.ancestors(idx))
    }

    pub fn descendant_priority(&self, idx: AgentIdx) -> Option<Priority> {
        self.max_priority(&self.descendants(idx))
    }

    pub fn handle_action(
        &mut self,
        agent_id: &str,
        request: ActionRequest,
        now: f64,
    ) -> Result<ArbitrationDecision, AgentError> {
        let idx = self.lookup(agent_id)?;
        Ok(self.handle_action_at(idx, request, now))
    }

    pub fn handle_action_at(
        &mut self,
        idx: AgentIdx,
        request: ActionRequest,
        now: f64,
    ) -> ArbitrationDecision {
        let p_a = request.priority();
        if self.nodes[idx.0].activity == Activity::Stopped {
            return ArbitrationDecision::ignore(p_a, Vec::new());
        }
        let mut cancelled = Vec::new();
        if self.nodes[idx.0].parent.is_some() && !request.from_parent {
            let ancestors = self.ancestors(idx);
            match self.max_priority(&ancestors) {
                Some(p_anc) if p_a > p_anc => {
                    for a in ancestors {
                        self.cancel_into(a, now, &mut cancelled);
                    }
                }
                Some(_) => return ArbitrationDecision::ignore(p_a, cancelled),
                None if self.strict => return ArbitrationDecision::ignore(p_a, cancelled),
                None => {}
            }
        }
        if self.nodes[idx.0].current_priority() >= Some(p_a) {
            return ArbitrationDecision::ignore(p_a, cancelled);
        }
        let descendants = self.descendants(idx);
        let mut warnings = Vec::new();
        if self.max_priority(&descendants) < Some(p_a) {
            for d in descendants {
                self.cancel_into(d, now, &mut cancelled);
            }
        } else {
            for d in descendants {
                if let Some(priority) = self.nodes[d.0].current_priority() {
                    if priority >= p_a {
                        warnings.push(ArbitrationWarning::DescendantOverlap {
                            descendant: d,
                            priority,
                        });
                    }
                }
            }
        }
        self.cancel_into(idx, now, &mut cancelled);
        let id = self.next_instance;
        self.next_instance += 1;
        let node = &mut self.nodes[idx.0];
        node.current = Some(CurrentAction {
            instance: ActionInstance {
                id,
                call: request.call,
                origin: request.origin,
            },
            priority: p_a,
            started_at: now,
            parts: BTreeSet::new(),
        });
        node.idle_since = None;
        node.phase = IdlePhase::Settled;
        if let ActionOrigin::Delegated { parent, instance } = request.origin {
            if let Some(cur) = &mut self.nodes[parent.0].current {
                if cur.instance.id == instance {
                    cur.parts.insert(id);
                }
            }
        }
        ArbitrationDecision {
            verdict: Verdict::Execute,
            cancelled,
            effective_priority: p_a,
            instance: Some(id),
            warnings,
        }
    }

    /// Cancels the agent's current action, and with it any parts the action
    /// delegated to other agents.
    pub fn cancel_action(&mut self, agent_id: &str, now: f64) -> Result<Vec<Cancellation>, AgentError> {
        let idx = self.lookup(agent_id)?;
        Ok(self.cancel_at(idx, now))
    }

    pub fn cancel_at(&mut self, idx: AgentIdx, now: f64) -> Vec<Cancellation> {
        let mut out = Vec::new();
        self.cancel_into(idx, now, &mut out);
        out
    }

    fn cancel_into(&mut self, idx: AgentIdx, now: f64, out: &mut Vec<Cancellation>) {
        let Some(current) = self.nodes[idx.0].current.take() else {
            return;
        };
        let node = &mut self.nodes[idx.0];
        node.idle_since = Some(now);
        node.phase = node.phase_after(current.instance.origin, true, now);
        self.detach_from_parent(&current.instance);
        let parts = current.parts.clone();
        out.push(Cancellation {
            agent: idx,
            instance: current.instance,
            priority: current.priority,
        });
        for part in parts {
            if let Some(holder) = self.holder_of(part) {
                self.cancel_into(holder, now, out);
            }
        }
    }

    fn holder_of(&self, instance: InstanceId) -> Option<AgentIdx> {
        self.nodes
            .iter()
            .position(|n| n.current.as_ref().is_some_and(|c| c.instance.id == instance))
            .map(AgentIdx)
    }

    fn detach_from_parent(&mut self, instance: &ActionInstance) {
        if let ActionOrigin::Delegated { parent, instance: owner } = instance.origin {
            if let Some(cur) = &mut self.nodes[parent.0].current {
                if cur.instance.id == owner {
                    cur.parts.remove(&instance.id);
                }
            }
        }
    }

    /// Finishes the agent's current action normally and schedules the
    /// return to its default behavior.
    pub fn on_action_complete(&mut self, idx: AgentIdx, now: f64) -> Option<CurrentAction> {
        let current = self.nodes[idx.0].current.take()?;
        let node = &mut self.nodes[idx.0];
        node.idle_since = Some(now);
        node.phase = node.phase_after(current.instance.origin, false, now);
        self.detach_from_parent(&current.instance);
        Some(current)
    }

    /// True when no strict ancestor or descendant runs a command-level
    /// action, so default and background behavior may start.
    pub fn subtree_quiet(&self, idx: AgentIdx) -> bool {
        self.ancestors(idx)
            .into_iter()
            .chain(self.descendants(idx))
            .all(|a| !self.nodes[a.0].current_priority().is_some_and(Priority::is_command))
    }

    /// Starts a due default-return, or a background action once the agent
    /// has idled past its threshold.
    pub fn tick_idle<D: Durations + ?Sized>(
        &mut self,
        idx: AgentIdx,
        now: f64,
        rng: &mut dyn RngCore,
        durations: &mut D,
    ) -> Option<IdleStart> {
        let node = &self.nodes[idx.0];
        if node.activity == Activity::Stopped || node.current.is_some() {
            return None;
        }
        let (kind, spec) = match node.phase {
            IdlePhase::Returning { at } if at <= now + TIME_EPSILON => {
                (IdleKind::Default, node.default_behavior.clone()?)
            }
            IdlePhase::Returning { .. } => return None,
            IdlePhase::Settled => {
                let idle_for = now - node.idle_since.unwrap_or(now);
                if node.background_actions.is_empty()
                    || idle_for + TIME_EPSILON < node.background_threshold
                {
                    return None;
                }
                if !self.subtree_quiet(idx) {
                    return None;
                }
                let pick = (rng.next_u64() % node.background_actions.len() as u64) as usize;
                (IdleKind::Background, node.background_actions[pick].clone())
            }
        };
        if !self.subtree_quiet(idx) {
            return None;
        }
        let duration = durations.duration(&self.nodes[idx.0].id, &spec.action_type, &spec.params);
        let (priority, origin) = match kind {
            IdleKind::Default => (Priority::Default, ActionOrigin::Default),
            IdleKind::Background => (Priority::Background, ActionOrigin::Background),
        };
        let request = ActionRequest {
            call: ActionCall {
                action_type: spec.action_type,
                params: spec.params,
                base_priority: 1,
                duration: Some(duration.unwrap_or(0.0)),
            },
            override_priority: Some(priority),
            from_parent: true,
            origin,
        };
        let decision = self.handle_action_at(idx, request, now);
        Some(IdleStart { kind, decision })
    }

    pub fn set_activity(
        &mut self,
        agent_id: &str,
        activity: Activity,
        now: f64,
    ) -> Result<Vec<Cancellation>, AgentError> {
        let idx = self.lookup(agent_id)?;
        Ok(self.set_activity_at(idx, activity, now))
    }

    pub fn set_activity_at(&mut self, idx: AgentIdx, activity: Activity, now: f64) -> Vec<Cancellation> {
        if self.nodes[idx.0].activity == activity {
            return Vec::new();
        }
        let cancelled = match activity {
            Activity::Stopped => self.cancel_at(idx, now),
            Activity::Active => Vec::new(),
        };
        let node = &mut self.nodes[idx.0];
        node.activity = activity;
        node.idle_since = Some(now);
        node.phase = match (activity, &node.default_behavior) {
            (Activity::Active, Some(_)) => IdlePhase::Returning {
                at: now + node.default_return_delay,
            },
            _ => IdlePhase::Settled,
        };
        cancelled
    }

    /// Cancels every agent's current action; agents stay active.
    pub fn interrupt_all(&mut self, now: f64) -> Vec<Cancellation> {
        let mut out = Vec::new();
        for i in 0..self.nodes.len() {
            self.cancel_into(AgentIdx(i), now, &mut out);
        }
        out
    }

    /// No agent is acting and none is waiting to return to its default.
    pub fn is_quiescent(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.current.is_none()
                && (n.activity == Activity::Stopped || n.phase == IdlePhase::Settled)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn call(priority: u8) -> ActionCall {
        ActionCall {
            action_type: "act".into(),
            params: Vec::new(),
            base_priority: priority,
            duration: Some(1.0),
        }
    }

    fn resolve(_: &AgentDecl, spec: &ActionSpec) -> Result<ResolvedSpec, ForestError> {
        Ok(ResolvedSpec {
            action_type: spec.action_type.clone(),
            params: Vec::new(),
        })
    }

    fn chain(names: &[&str]) -> Forest {
        let decls: Vec<AgentDecl> = names
            .iter()
            .enumerate()
            .map(|(i, n)| AgentDecl::new(n, if i == 0 { None } else { Some(names[i - 1]) }))
            .collect();
        Forest::new(&decls, resolve).unwrap()
    }

    struct Fixed(f64);

    impl Durations for Fixed {
        fn duration(&mut self, _: &str, _: &str, _: &[ParamValue]) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn stopped_agent_ignores() {
        let mut forest = chain(&["a"]);
        forest.set_activity("a", Activity::Stopped, 0.0).unwrap();
        let d = forest.handle_action("a", ActionRequest::command(call(9)), 0.0).unwrap();
        assert_eq!(d.verdict, Verdict::Ignore);
    }

    #[test]
    fn idle_root_executes() {
        let mut forest = chain(&["a"]);
        let d = forest.handle_action("a", ActionRequest::command(call(5)), 0.0).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        assert!(d.cancelled.is_empty());
        assert_eq!(forest.agent(forest.lookup("a").unwrap()).current_priority(), Some(Priority::Command(5)));
    }

    #[test]
    fn equal_priority_is_ignored() {
        let mut forest = chain(&["a"]);
        forest.handle_action("a", ActionRequest::command(call(5)), 0.0).unwrap();
        let d = forest.handle_action("a", ActionRequest::command(call(5)), 0.1).unwrap();
        assert_eq!(d.verdict, Verdict::Ignore);
    }

    #[test]
    fn child_beats_busy_parent() {
        let mut forest = chain(&["parent", "child"]);
        forest.handle_action("parent", ActionRequest::command(call(3)), 0.0).unwrap();
        let d = forest.handle_action("child", ActionRequest::command(call(5)), 0.1).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        assert_eq!(d.cancelled.len(), 1);
        assert_eq!(forest.name(d.cancelled[0].agent), "parent");
    }

    #[test]
    fn child_loses_to_busy_parent() {
        let mut forest = chain(&["parent", "child"]);
        forest.handle_action("parent", ActionRequest::command(call(3)), 0.0).unwrap();
        let d = forest.handle_action("child", ActionRequest::command(call(2)), 0.1).unwrap();
        assert_eq!(d.verdict, Verdict::Ignore);
        assert!(d.cancelled.is_empty());
    }

    #[test]
    fn idle_ancestors_pass_through_unless_strict() {
        let mut forest = chain(&["parent", "child"]);
        let d = forest.handle_action("child", ActionRequest::command(call(2)), 0.0).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);

        let mut strict = chain(&["parent", "child"]);
        strict.set_strict(true);
        let d = strict.handle_action("child", ActionRequest::command(call(2)), 0.0).unwrap();
        assert_eq!(d.verdict, Verdict::Ignore);
    }

    #[test]
    fn higher_request_cancels_descendants() {
        let mut forest = chain(&["a", "b", "c"]);
        forest.handle_action("c", ActionRequest::command(call(2)), 0.0).unwrap();
        let d = forest.handle_action("a", ActionRequest::command(call(4)), 0.1).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        assert_eq!(d.cancelled.len(), 1);
        assert!(forest.agent(forest.lookup("c").unwrap()).current.is_none());
    }

    #[test]
    fn higher_descendant_survives_with_warning() {
        let mut forest = chain(&["a", "b"]);
        forest.handle_action("b", ActionRequest::command(call(6)), 0.0).unwrap();
        let d = forest.handle_action("a", ActionRequest::command(call(4)), 0.1).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
        assert!(d.cancelled.is_empty());
        assert!(matches!(d.warnings[0], ArbitrationWarning::DescendantOverlap { .. }));
    }

    #[test]
    fn cancel_returns_action_and_is_idempotent() {
        let mut forest = chain(&["a"]);
        forest.handle_action("a", ActionRequest::command(call(2)), 0.0).unwrap();
        let first = forest.cancel_action("a", 0.5).unwrap();
        assert_eq!(first.len(), 1);
        assert!(forest.cancel_action("a", 0.6).unwrap().is_empty());
        assert_eq!(forest.cancel_action("zz", 0.6), Err(AgentError::UnknownAgent("zz".into())));
    }

    #[test]
    fn cancelling_composite_cancels_delegated_parts() {
        let mut forest = chain(&["top", "mid", "leaf"]);
        let top = forest.lookup("top").unwrap();
        let mut composite = call(5);
        composite.duration = None;
        let d = forest.handle_action_at(top, ActionRequest::command(composite), 0.0);
        let owner = d.instance.unwrap();
        for name in ["mid", "leaf"] {
            let idx = forest.lookup(name).unwrap();
            let r = ActionRequest::delegated(call(1), Priority::Command(5), top, owner);
            assert_eq!(forest.handle_action_at(idx, r, 0.0).verdict, Verdict::Execute);
        }
        assert_eq!(forest.agent(top).current.as_ref().unwrap().parts.len(), 2);
        let cancelled = forest.cancel_at(top, 1.0);
        assert_eq!(cancelled.len(), 3);
        assert!(forest.agents().all(|(_, n)| n.current.is_none()));
    }

    #[test]
    fn composite_finishes_with_its_parts() {
        let mut forest = chain(&["top", "leaf"]);
        let top = forest.lookup("top").unwrap();
        let leaf = forest.lookup("leaf").unwrap();
        let mut composite = call(5);
        composite.duration = None;
        let owner = forest
            .handle_action_at(top, ActionRequest::command(composite), 0.0)
            .instance
            .unwrap();
        forest.handle_action_at(leaf, ActionRequest::delegated(call(1), Priority::Command(5), top, owner), 0.0);
        assert!(!forest.agent(top).current.as_ref().unwrap().is_finished(5.0));
        forest.on_action_complete(leaf, 1.0);
        assert!(forest.agent(top).current.as_ref().unwrap().is_finished(1.0));
    }

    fn with_default(delay: f64) -> Forest {
        let mut decl = AgentDecl::new("arm", None);
        decl.default_behavior = Some(ActionSpec::new("neutral", &[]));
        decl.default_return_delay = delay;
        Forest::new(&[decl], resolve).unwrap()
    }

    #[test]
    fn completion_schedules_default_return() {
        let mut forest = with_default(1.5);
        let arm = forest.lookup("arm").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Initial default at t = 0, then settle.
        let start = forest.tick_idle(arm, 0.0, &mut rng, &mut Fixed(1.0)).unwrap();
        assert_eq!(start.kind, IdleKind::Default);
        forest.on_action_complete(arm, 1.0);
        assert_eq!(forest.agent(arm).phase, IdlePhase::Settled);

        forest.handle_action_at(arm, ActionRequest::command(call(3)), 8.0);
        forest.on_action_complete(arm, 10.0);
        assert_eq!(forest.agent(arm).phase, IdlePhase::Returning { at: 11.5 });
        assert!(forest.tick_idle(arm, 11.45, &mut rng, &mut Fixed(1.0)).is_none());
        let start = forest.tick_idle(arm, 11.5, &mut rng, &mut Fixed(1.0)).unwrap();
        assert_eq!(start.kind, IdleKind::Default);
        assert_eq!(start.decision.effective_priority, Priority::Default);
    }

    #[test]
    fn interrupted_default_returns_after_delay() {
        let mut forest = with_default(2.0);
        let arm = forest.lookup("arm").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = forest.tick_idle(arm, 0.0, &mut rng, &mut Fixed(5.0)).unwrap();
        assert_eq!(start.kind, IdleKind::Default);
        forest.cancel_at(arm, 1.0);
        assert_eq!(forest.agent(arm).phase, IdlePhase::Returning { at: 3.0 });
        assert!(forest.tick_idle(arm, 2.5, &mut rng, &mut Fixed(5.0)).is_none());
        let again = forest.tick_idle(arm, 3.0, &mut rng, &mut Fixed(5.0)).unwrap();
        assert_eq!(again.kind, IdleKind::Default);

        forest.interrupt_all(4.0);
        assert_eq!(forest.agent(arm).phase, IdlePhase::Returning { at: 6.0 });
    }

    #[test]
    fn new_command_replaces_pending_default() {
        let mut forest = with_default(1.5);
        let arm = forest.lookup("arm").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        forest.handle_action_at(arm, ActionRequest::command(call(3)), 0.0);
        forest.on_action_complete(arm, 10.0);
        let d = forest.handle_action_at(arm, ActionRequest::command(call(3)), 11.0);
        assert_eq!(d.verdict, Verdict::Execute);
        assert!(forest.tick_idle(arm, 11.5, &mut rng, &mut Fixed(1.0)).is_none());
    }

    #[test]
    fn no_default_means_settled_idle() {
        let mut forest = chain(&["brows"]);
        let brows = forest.lookup("brows").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        forest.handle_action_at(brows, ActionRequest::command(call(2)), 0.0);
        forest.on_action_complete(brows, 0.0);
        assert_eq!(forest.agent(brows).phase, IdlePhase::Settled);
        assert!(forest.tick_idle(brows, 100.0, &mut rng, &mut Fixed(1.0)).is_none());
    }

    fn with_backgrounds(list: &[&str]) -> Forest {
        let mut decl = AgentDecl::new("head", None);
        decl.background_actions = list.iter().map(|a| ActionSpec::new(a, &[])).collect();
        Forest::new(&[decl], resolve).unwrap()
    }

    #[test]
    fn background_after_threshold() {
        let mut forest = with_backgrounds(&["scan"]);
        let head = forest.lookup("head").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(forest.tick_idle(head, 3.0, &mut rng, &mut Fixed(1.0)).is_none());
        let start = forest.tick_idle(head, 12.0, &mut rng, &mut Fixed(1.0)).unwrap();
        assert_eq!(start.kind, IdleKind::Background);
        // Any command preempts it.
        let d = forest.handle_action_at(head, ActionRequest::command(call(1)), 12.5);
        assert_eq!(d.verdict, Verdict::Execute);
        assert_eq!(d.cancelled[0].priority, Priority::Background);
    }

    #[test]
    fn empty_background_list_never_starts() {
        let mut forest = with_backgrounds(&[]);
        let head = forest.lookup("head").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(forest.tick_idle(head, 1000.0, &mut rng, &mut Fixed(1.0)).is_none());
    }

    #[test]
    fn stop_cancels_then_blocks_and_resume_schedules_default() {
        let mut forest = with_default(1.5);
        let arm = forest.lookup("arm").unwrap();
        forest.handle_action_at(arm, ActionRequest::command(call(3)), 0.0);
        let cancelled = forest.set_activity("arm", Activity::Stopped, 1.0).unwrap();
        assert_eq!(cancelled.len(), 1);
        assert!(forest.set_activity("arm", Activity::Stopped, 1.1).unwrap().is_empty());
        let d = forest.handle_action_at(arm, ActionRequest::command(call(9)), 2.0);
        assert_eq!(d.verdict, Verdict::Ignore);
        forest.set_activity("arm", Activity::Active, 3.0).unwrap();
        assert_eq!(forest.agent(arm).phase, IdlePhase::Returning { at: 4.5 });
    }

    #[test]
    fn interrupt_all_counts() {
        let decls = vec![AgentDecl::new("a", None), AgentDecl::new("b", None), AgentDecl::new("c", None)];
        let mut forest = Forest::new(&decls, resolve).unwrap();
        assert!(forest.interrupt_all(0.0).is_empty());
        for n in ["a", "b", "c"] {
            forest.handle_action(n, ActionRequest::command(call(2)), 0.0).unwrap();
        }
        assert_eq!(forest.interrupt_all(1.0).len(), 3);
        assert!(forest.agents().all(|(_, n)| n.current.is_none() && n.activity == Activity::Active));
        let d = forest.handle_action("a", ActionRequest::command(call(2)), 1.1).unwrap();
        assert_eq!(d.verdict, Verdict::Execute);
    }

    #[test]
    fn cycles_and_unknown_parents_rejected() {
        let decls = vec![AgentDecl::new("a", Some("b")), AgentDecl::new("b", Some("a"))];
        assert!(matches!(Forest::new(&decls, resolve), Err(ForestError::Cycle(_))));
        let decls = vec![AgentDecl::new("a", Some("ghost"))];
        assert!(matches!(Forest::new(&decls, resolve), Err(ForestError::UnknownParent { .. })));
        let decls = vec![AgentDecl::new("a", None), AgentDecl::new("a", None)];
        assert!(matches!(Forest::new(&decls, resolve), Err(ForestError::DuplicateAgent(_))));
    }
}
