//! Deterministic discrete-time execution of a compiled timeline.
//!
//! Every tick runs three phases in a fixed order:
//!
//! 1. actions whose duration has elapsed complete, and requests that were
//!    waiting on them are resubmitted;
//! 2. timeline events that are due are routed and arbitrated;
//! 3. idle agents return to their defaults or start background actions.
//!
//! Each transition is appended to the trace. Runtime anomalies never abort a
//! run; they become warning records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    ActionCall, ActionOrigin, ActionRequest, Activity, AgentIdx, ArbitrationDecision,
    ArbitrationWarning, Cancellation, Durations, Forest, IdleKind, InstanceId, Verdict,
};
use crate::dispatch::{DispatchError, Dispatcher};
use crate::dsl::TimelineEvent;
use crate::priority::Priority;
use crate::profile::{delay_policy, DelayDecision};
use crate::registry::{render_params, ParamValue, Registry};

pub const DEFAULT_TICK: f64 = 0.05;
/// Longest the executor waits for the forest to settle after the last event.
pub const DEFAULT_SETTLE_LIMIT: f64 = 600.0;

/// Agent name used for records that concern the whole forest.
pub const FOREST_AGENT: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RecordKind {
    Dispatched,
    Executed,
    Ignored,
    Cancelled,
    Delayed,
    Resubmitted,
    Completed,
    DefaultStarted,
    BackgroundStarted,
    Warning,
}

impl RecordKind {
    pub const ALL: [RecordKind; 10] = [
        RecordKind::Dispatched,
        RecordKind::Executed,
        RecordKind::Ignored,
        RecordKind::Cancelled,
        RecordKind::Delayed,
        RecordKind::Resubmitted,
        RecordKind::Completed,
        RecordKind::DefaultStarted,
        RecordKind::BackgroundStarted,
        RecordKind::Warning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Dispatched => "dispatched",
            RecordKind::Executed => "executed",
            RecordKind::Ignored => "ignored",
            RecordKind::Cancelled => "cancelled",
            RecordKind::Delayed => "delayed",
            RecordKind::Resubmitted => "resubmitted",
            RecordKind::Completed => "completed",
            RecordKind::DefaultStarted => "default_started",
            RecordKind::BackgroundStarted => "background_started",
            RecordKind::Warning => "warning",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnomalyClass {
    Notice,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub seq: u64,
    pub time: f64,
    pub agent: String,
    pub kind: RecordKind,
    pub action_type: String,
    pub params: Vec<String>,
    pub priority: Option<Priority>,
    pub cause: Option<u64>,
    pub class: Option<AnomalyClass>,
    pub note: String,
}

impl TraceRecord {
    pub fn is_error(&self) -> bool {
        self.kind == RecordKind::Warning && self.class == Some(AnomalyClass::Error)
    }
}

/// Simulated time kept as a whole number of microsecond ticks, so that
/// timestamps do not accumulate rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    tick_us: u64,
    ticks: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("tick must be a positive whole number of microseconds, got {0}")]
    InvalidTick(f64),
}

impl SimClock {
    pub fn new(tick: f64) -> Result<Self, SimError> {
        let us = tick * 1e6;
        if !us.is_finite() || us < 1.0 || libm::fabs(us - libm::round(us)) > 1e-6 {
            return Err(SimError::InvalidTick(tick));
        }
        Ok(SimClock {
            tick_us: libm::round(us) as u64,
            ticks: 0,
        })
    }

    pub fn now(&self) -> f64 {
        (self.ticks * self.tick_us) as f64 / 1e6
    }

    pub fn tick(&self) -> f64 {
        self.tick_us as f64 / 1e6
    }

    pub fn advance(&mut self) {
        self.ticks += 1;
    }
}

/// Parts a composite action hands to other agents, plus anything worth
/// reporting about the expansion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub parts: Vec<(AgentIdx, ActionCall)>,
    pub warnings: Vec<(AnomalyClass, String)>,
}

/// Timing and coordination behavior of a concrete robot.
pub trait RobotModel: Durations {
    fn delay_policy(&self, progress: f64) -> DelayDecision {
        delay_policy(progress)
    }

    /// Splits a composite action (one whose duration is `None`) into parts.
    fn expand(&mut self, _forest: &Forest, _agent: AgentIdx, _call: &ActionCall, _priority: Priority) -> Expansion {
        Expansion::default()
    }

    fn on_execute(&mut self, _agent: &str, _call: &ActionCall) {}
}

/// Uses each action's nominal duration and has no composites.
#[derive(Debug, Clone)]
pub struct NominalModel {
    registry: Registry,
}

impl NominalModel {
    pub fn new(registry: Registry) -> Self {
        NominalModel { registry }
    }
}

impl Durations for NominalModel {
    fn duration(&mut self, _agent: &str, action_type: &str, _params: &[ParamValue]) -> Option<f64> {
        Some(self.registry.lookup(action_type).map_or(0.0, |d| d.nominal_duration))
    }
}

impl RobotModel for NominalModel {}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tick: f64,
    pub seed: u64,
    pub settle_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tick: DEFAULT_TICK,
            seed: 0,
            settle_limit: DEFAULT_SETTLE_LIMIT,
        }
    }
}

#[derive(Debug, Clone)]
struct Delayed {
    agent: AgentIdx,
    request: ActionRequest,
    blocking: InstanceId,
    record: u64,
}

pub struct Simulation<'a> {
    forest: Forest,
    dispatcher: &'a Dispatcher,
    registry: &'a Registry,
    model: &'a mut dyn RobotModel,
    clock: SimClock,
    settle_limit: f64,
    rng: ChaCha8Rng,
    timeline: Vec<TimelineEvent>,
    cursor: usize,
    delayed: Vec<Delayed>,
    started: BTreeMap<InstanceId, u64>,
    trace: Vec<TraceRecord>,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        timeline: Vec<TimelineEvent>,
        forest: Forest,
        dispatcher: &'a Dispatcher,
        registry: &'a Registry,
        model: &'a mut dyn RobotModel,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let mut timeline = timeline;
        timeline.sort_by(|a, b| a.trigger_time.total_cmp(&b.trigger_time).then(a.origin.cmp(&b.origin)));
        Ok(Simulation {
            forest,
            dispatcher,
            registry,
            model,
            clock: SimClock::new(config.tick)?,
            settle_limit: config.settle_limit,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            timeline,
            cursor: 0,
            delayed: Vec::new(),
            started: BTreeMap::new(),
            trace: Vec::new(),
            finished: false,
        })
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Runs to completion and returns the trace.
    pub fn run(mut self) -> Vec<TraceRecord> {
        while self.step() {}
        self.trace
    }

    /// Executes one tick. Returns false once the run has ended.
    pub fn step(&mut self) -> bool {
        if self.finished {
            return false;
        }
        let now = self.clock.now();
        self.complete_phase(now);
        while let Some(event) = self.timeline.get(self.cursor) {
            if event.trigger_time > now + crate::agent::TIME_EPSILON {
                break;
            }
            let event = event.clone();
            self.cursor += 1;
            self.fire(&event, now);
        }
        self.idle_phase(now);
        if self.cursor == self.timeline.len() && self.delayed.is_empty() && self.forest.is_quiescent() {
            self.finished = true;
            return false;
        }
        let last = self.timeline.last().map_or(0.0, |e| e.trigger_time);
        if self.cursor == self.timeline.len() && now > last + self.settle_limit {
            let note = format!("forest did not settle within {} s", self.settle_limit);
            self.record(RecordKind::Warning, FOREST_AGENT, "", Vec::new(), None, None, Some(AnomalyClass::Error), note);
            self.finished = true;
            return false;
        }
        self.clock.advance();
        true
    }

    /// Cancels every running action; returns how many were cancelled.
    pub fn interrupt_all(&mut self) -> usize {
        let now = self.clock.now();
        let seq = self.warn(FOREST_AGENT, None, AnomalyClass::Notice, "interrupt_all".into());
        let cancelled = self.dispatcher.interrupt_all(&mut self.forest, now);
        self.record_cancellations(&cancelled, seq);
        cancelled.len()
    }

    pub fn set_activity(&mut self, agent: AgentIdx, activity: Activity) {
        let now = self.clock.now();
        let note = match activity {
            Activity::Active => "resumed",
            Activity::Stopped => "stopped",
        };
        let name = String::from(self.forest.name(agent));
        let seq = self.warn(&name, None, AnomalyClass::Notice, note.into());
        let cancelled = self.forest.set_activity_at(agent, activity, now);
        self.record_cancellations(&cancelled, seq);
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        kind: RecordKind,
        agent: &str,
        action_type: &str,
        params: Vec<String>,
        priority: Option<Priority>,
        cause: Option<u64>,
        class: Option<AnomalyClass>,
        note: String,
    ) -> u64 {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceRecord {
            seq,
            time: self.clock.now(),
            agent: agent.into(),
            kind,
            action_type: action_type.into(),
            params,
            priority,
            cause,
            class,
            note,
        });
        seq
    }

    fn record_call(&mut self, kind: RecordKind, agent: AgentIdx, call: &ActionCall, priority: Priority, cause: Option<u64>) -> u64 {
        let name = String::from(self.forest.name(agent));
        self.record(kind, &name, &call.action_type, render_params(&call.params), Some(priority), cause, None, String::new())
    }

    fn warn(&mut self, agent: &str, cause: Option<u64>, class: AnomalyClass, note: String) -> u64 {
        self.record(RecordKind::Warning, agent, "", Vec::new(), None, cause, Some(class), note)
    }

    fn record_cancellations(&mut self, cancelled: &[Cancellation], cause: u64) {
        let mut batch: BTreeMap<InstanceId, u64> = BTreeMap::new();
        for c in cancelled {
            let cause = match c.instance.origin {
                ActionOrigin::Delegated { instance, .. } => batch.get(&instance).copied().unwrap_or(cause),
                _ => cause,
            };
            let seq = self.record_call(RecordKind::Cancelled, c.agent, &c.instance.call, c.priority, Some(cause));
            self.started.remove(&c.instance.id);
            batch.insert(c.instance.id, seq);
        }
    }

    fn complete(&mut self, idx: AgentIdx, now: f64) {
        if let Some(done) = self.forest.on_action_complete(idx, now) {
            let cause = self.started.remove(&done.instance.id);
            self.record_call(RecordKind::Completed, idx, &done.instance.call, done.priority, cause);
        }
    }

    fn complete_phase(&mut self, now: f64) {
        loop {
            let mut progressed = false;
            let due: Vec<AgentIdx> = self
                .forest
                .agents()
                .filter(|(_, n)| n.current.as_ref().is_some_and(|c| c.is_finished(now)))
                .map(|(i, _)| i)
                .collect();
            for idx in due {
                self.complete(idx, now);
                progressed = true;
            }
            let forest = &self.forest;
            let (ready, waiting): (Vec<Delayed>, Vec<Delayed>) = self.delayed.drain(..).partition(|d| {
                forest.agent(d.agent).current.as_ref().map(|c| c.instance.id) != Some(d.blocking)
            });
            self.delayed = waiting;
            for d in ready {
                let seq = self.record_call(RecordKind::Resubmitted, d.agent, &d.request.call, d.request.priority(), Some(d.record));
                self.arbitrate(d.agent, d.request, seq, now);
                progressed = true;
            }
            if !progressed {
                break;
            }
        }
    }

    fn fire(&mut self, event: &TimelineEvent, now: f64) {
        let routed = self
            .dispatcher
            .route(&event.action_type, &event.params)
            .and_then(|idx| match self.registry.lookup(&event.action_type) {
                Some(def) => Ok((idx, def.base_priority)),
                None => Err(DispatchError::UnroutableAction(event.action_type.clone())),
            });
        let (idx, base_priority) = match routed {
            Ok(found) => found,
            Err(e) => {
                let seq = self.record(
                    RecordKind::Dispatched,
                    &event.target_agent,
                    &event.action_type,
                    render_params(&event.params),
                    None,
                    None,
                    None,
                    String::new(),
                );
                self.warn(&event.target_agent, Some(seq), AnomalyClass::Error, e.to_string());
                return;
            }
        };
        let name = String::from(self.forest.name(idx));
        let call = ActionCall {
            action_type: event.action_type.clone(),
            duration: self.model.duration(&name, &event.action_type, &event.params),
            params: event.params.clone(),
            base_priority,
        };
        let request = ActionRequest::command(call);
        let seq = self.record_call(RecordKind::Dispatched, idx, &request.call, request.priority(), None);

        let current = self.forest.agent(idx).current.as_ref().filter(|c| {
            c.priority.is_command() && c.instance.call.duration.is_some_and(|d| d > 0.0)
        });
        if let Some(current) = current {
            let progress = current.progress(now).unwrap_or(0.0);
            let blocking = current.instance.id;
            let blocking_type = current.instance.call.action_type.clone();
            match self.model.delay_policy(progress) {
                DelayDecision::ArbitrateNow => {}
                DelayDecision::DelayUntilComplete => {
                    let note = format!("waiting for `{blocking_type}` at {:.0}%", progress * 100.0);
                    let delayed = self.record(
                        RecordKind::Delayed,
                        &name,
                        &request.call.action_type,
                        render_params(&request.call.params),
                        Some(request.priority()),
                        Some(seq),
                        None,
                        note,
                    );
                    self.delayed.push(Delayed {
                        agent: idx,
                        request,
                        blocking,
                        record: delayed,
                    });
                    return;
                }
                DelayDecision::CompleteThenResubmit => {
                    self.complete(idx, now);
                    let resubmitted = self.record_call(RecordKind::Resubmitted, idx, &request.call, request.priority(), Some(seq));
                    self.arbitrate(idx, request, resubmitted, now);
                    return;
                }
            }
        }
        self.arbitrate(idx, request, seq, now);
    }

    fn arbitrate(&mut self, idx: AgentIdx, request: ActionRequest, cause: u64, now: f64) -> Verdict {
        let decision = self.forest.handle_action_at(idx, request.clone(), now);
        self.apply(idx, &request, &decision, cause, now);
        decision.verdict
    }

    fn apply(&mut self, idx: AgentIdx, request: &ActionRequest, decision: &ArbitrationDecision, cause: u64, now: f64) {
        self.record_cancellations(&decision.cancelled, cause);
        let name = String::from(self.forest.name(idx));
        match decision.verdict {
            Verdict::Execute => {
                let seq = self.record_call(RecordKind::Executed, idx, &request.call, decision.effective_priority, Some(cause));
                if let Some(instance) = decision.instance {
                    self.started.insert(instance, seq);
                }
                self.model.on_execute(&name, &request.call);
                self.report_warnings(&name, decision, seq);
                if request.call.duration.is_none() {
                    if let Some(instance) = decision.instance {
                        self.expand(idx, instance, &request.call, decision.effective_priority, seq, now);
                    }
                }
            }
            Verdict::Ignore | Verdict::Delay => {
                let seq = self.record_call(RecordKind::Ignored, idx, &request.call, decision.effective_priority, Some(cause));
                self.report_warnings(&name, decision, seq);
            }
        }
    }

    fn report_warnings(&mut self, name: &str, decision: &ArbitrationDecision, cause: u64) {
        for w in &decision.warnings {
            let note = match w {
                ArbitrationWarning::DescendantOverlap { descendant, priority } if priority.is_command() => {
                    format!("`{}` keeps priority {priority} alongside", self.forest.name(*descendant))
                }
                ArbitrationWarning::DescendantOverlap { .. } => continue,
                ArbitrationWarning::CancelledThenIgnored => "ancestors cancelled, request ignored".into(),
            };
            self.warn(name, Some(cause), AnomalyClass::Notice, note);
        }
    }

    fn expand(&mut self, idx: AgentIdx, instance: InstanceId, call: &ActionCall, priority: Priority, cause: u64, now: f64) {
        let expansion = self.model.expand(&self.forest, idx, call, priority);
        let name = String::from(self.forest.name(idx));
        for (class, note) in expansion.warnings {
            self.warn(&name, Some(cause), class, note);
        }
        for (part, part_call) in expansion.parts {
            let request = ActionRequest::delegated(part_call, priority, idx, instance);
            if self.arbitrate(part, request.clone(), cause, now) == Verdict::Ignore {
                let note = format!("part `{}` of `{}` ignored", request.call.action_type, call.action_type);
                self.warn(&name, Some(cause), AnomalyClass::Notice, note);
            }
        }
    }

    fn idle_phase(&mut self, now: f64) {
        for i in 0..self.forest.len() {
            let idx = self.forest.agents().nth(i).map(|(idx, _)| idx).expect("in range");
            let Some(start) = self.forest.tick_idle(idx, now, &mut self.rng, &mut *self.model) else {
                continue;
            };
            let Some(current) = self.forest.agent(idx).current.clone() else {
                continue;
            };
            let kind = match start.kind {
                IdleKind::Default => RecordKind::DefaultStarted,
                IdleKind::Background => RecordKind::BackgroundStarted,
            };
            let seq = self.record_call(kind, idx, &current.instance.call, current.priority, None);
            self.started.insert(current.instance.id, seq);
            self.record_cancellations(&start.decision.cancelled, seq);
            let name = String::from(self.forest.name(idx));
            self.model.on_execute(&name, &current.instance.call);
        }
    }
}

/// Runs a timeline on a fresh simulation.
pub fn run(
    timeline: Vec<TimelineEvent>,
    forest: Forest,
    dispatcher: &Dispatcher,
    registry: &Registry,
    model: &mut dyn RobotModel,
    config: &SimConfig,
) -> Result<Vec<TraceRecord>, SimError> {
    Ok(Simulation::new(timeline, forest, dispatcher, registry, model, config)?.run())
}

pub fn summarize(trace: &[TraceRecord]) -> BTreeMap<RecordKind, usize> {
    let mut counts: BTreeMap<RecordKind, usize> = RecordKind::ALL.iter().map(|k| (*k, 0)).collect();
    for r in trace {
        *counts.entry(r.kind).or_default() += 1;
    }
    counts
}

pub fn error_count(trace: &[TraceRecord]) -> usize {
    trace.iter().filter(|r| r.is_error()).count()
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffEntry {
    /// Present only in the first trace, at the given index.
    Removed(usize, TraceRecord),
    /// Present only in the second trace, at the given index.
    Added(usize, TraceRecord),
}

#[derive(Debug, Clone, PartialEq)]
struct DiffKey<'a> {
    time: u64,
    agent: &'a str,
    kind: RecordKind,
    action_type: &'a str,
    params: &'a [String],
    priority: Option<Priority>,
    cause: Option<(RecordKind, &'a str, &'a str)>,
    class: Option<AnomalyClass>,
    note: &'a str,
}

fn diff_keys(trace: &[TraceRecord]) -> Vec<DiffKey<'_>> {
    let by_seq: BTreeMap<u64, &TraceRecord> = trace.iter().map(|r| (r.seq, r)).collect();
    trace
        .iter()
        .map(|r| DiffKey {
            time: r.time.to_bits(),
            agent: &r.agent,
            kind: r.kind,
            action_type: &r.action_type,
            params: &r.params,
            priority: r.priority,
            cause: r.cause.map(|c| match by_seq.get(&c) {
                Some(t) => (t.kind, t.agent.as_str(), t.action_type.as_str()),
                None => (RecordKind::Warning, "", ""),
            }),
            class: r.class,
            note: &r.note,
        })
        .collect()
}

/// Record-level differences between two traces.
///
/// Sequence numbers are ignored, and causes are compared by the record they
/// point at rather than by number, so an inserted record does not make every
/// later record differ.
pub fn trace_diff(a: &[TraceRecord], b: &[TraceRecord]) -> Vec<DiffEntry> {
    let ka = diff_keys(a);
    let kb = diff_keys(b);
    let prefix = ka.iter().zip(&kb).take_while(|(x, y)| x == y).count();
    let suffix = ka[prefix..]
        .iter()
        .rev()
        .zip(kb[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let xa = &ka[prefix..ka.len() - suffix];
    let xb = &kb[prefix..kb.len() - suffix];
    let (n, m) = (xa.len(), xb.len());
    // lcs[i][j] = LCS length of xa[i..] and xb[j..].
    let mut lcs = alloc::vec![0u32; (n + 1) * (m + 1)];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * (m + 1) + j] = if xa[i] == xb[j] {
                lcs[(i + 1) * (m + 1) + j + 1] + 1
            } else {
                lcs[(i + 1) * (m + 1) + j].max(lcs[i * (m + 1) + j + 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && xa[i] == xb[j] {
            i += 1;
            j += 1;
        } else if j == m || (i < n && lcs[(i + 1) * (m + 1) + j] >= lcs[i * (m + 1) + j + 1]) {
            out.push(DiffEntry::Removed(prefix + i, a[prefix + i].clone()));
            i += 1;
        } else {
            out.push(DiffEntry::Added(prefix + j, b[prefix + j].clone()));
            j += 1;
        }
    }
    out
}
