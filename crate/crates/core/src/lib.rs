//! Tour-guide robot behavior engine.
//!
//! Scenarios are narrative text with inline action tags such as
//! `<facial:joy>` or `<anim:right_arm;show_space;1>`. This crate parses and
//! sanitizes them against an [action registry](registry), compiles them into
//! timed events, and executes them over a forest of agents that resolve
//! conflicts by priority and hierarchy. It also holds the two-stage
//! generation pipeline that writes such scenarios.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and network providers live in the `docent` crate.

#![no_std]

extern crate alloc;

pub mod agent;
pub mod dispatch;
pub mod dsl;
pub mod gen;
pub mod pipeline;
pub mod priority;
pub mod profile;
pub mod registry;
pub mod sim;

pub use agent::{
    ActionCall, ActionRequest, Activity, AgentDecl, AgentIdx, ArbitrationDecision, Forest, Verdict,
};
pub use dispatch::{build_forest, ConfigError, Dispatcher, ForestConfig};
pub use dsl::{check_scenario, compile_timeline, parse_scenario, ScenarioDocument, SpeechModel};
pub use pipeline::{run_scenario, RunError, RunOutput, RunSetup};
pub use priority::Priority;
pub use registry::{ActionDefinition, ParamValue, Registry};
pub use sim::{RecordKind, SimConfig, Simulation, TraceRecord};
