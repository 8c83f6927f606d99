//! Scenario text to trace in one call.

use alloc::vec::Vec;

use crate::dispatch::{build_forest, ConfigError, Dispatcher, ForestConfig};
use crate::dsl::{check_scenario, compile_timeline, CheckedScenario, ParseError, SpeechModel, TimelineError, TimelineEvent};
use crate::profile::{mentor1_forest, mentor1_registry, Mentor1Robot, Stage};
use crate::registry::Registry;
use crate::sim::{SimConfig, SimError, Simulation, TraceRecord};

/// Everything a run depends on besides the scenario text.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub registry: Registry,
    pub forest: ForestConfig,
    pub stage: Stage,
    pub speech: SpeechModel,
    pub sim: SimConfig,
    pub strict: bool,
}

impl Default for RunSetup {
    fn default() -> Self {
        RunSetup {
            registry: mentor1_registry(),
            forest: mentor1_forest(),
            stage: Stage::default(),
            speech: SpeechModel::default(),
            sim: SimConfig::default(),
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("speech model needs a positive rate and non-negative pauses")]
    SpeechModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scenario: CheckedScenario,
    pub timeline: Vec<TimelineEvent>,
    pub trace: Vec<TraceRecord>,
}

/// Parses, sanitizes, compiles and simulates `raw_text` on the MENTOR-1
/// model.
pub fn run_scenario(raw_text: &str, setup: &RunSetup) -> Result<RunOutput, RunError> {
    if !setup.speech.is_valid() {
        return Err(RunError::SpeechModel);
    }
    let scenario = check_scenario(raw_text, &setup.registry)?;
    let mut forest = build_forest(&setup.forest, &setup.registry)?;
    forest.set_strict(setup.strict);
    let dispatcher = Dispatcher::new(&setup.forest, &setup.registry, &forest)?;
    let timeline = compile_timeline(&scenario.speech_text, &scenario.tags, &setup.speech, &setup.registry)?;
    let mut model = Mentor1Robot::new(setup.registry.clone(), setup.stage.clone());
    let trace = Simulation::new(timeline.clone(), forest, &dispatcher, &setup.registry, &mut model, &setup.sim)?.run();
    Ok(RunOutput {
        scenario,
        timeline,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RecordKind;

    #[test]
    fn runs_a_small_scenario() {
        let out = run_scenario("<facial:joy> Hello there. <anim:head;nodding;1> Welcome.", &RunSetup::default()).unwrap();
        let dispatched = out.trace.iter().filter(|r| r.kind == RecordKind::Dispatched).count();
        assert_eq!(dispatched, 2);
        assert_eq!(out.timeline.len(), 2);
    }

    #[test]
    fn reports_each_failure_kind() {
        let setup = RunSetup::default();
        assert!(matches!(run_scenario("Hi <facial:joy", &setup), Err(RunError::Parse(_))));
        let mut bad = setup.clone();
        bad.forest.agents[0].parent = Some("eyes".into());
        bad.forest.agents[7].parent = Some("android".into());
        assert!(matches!(run_scenario("Hi.", &bad), Err(RunError::Config(_))));
        let mut bad = setup.clone();
        bad.sim.tick = 0.0;
        assert!(matches!(run_scenario("Hi.", &bad), Err(RunError::Sim(_))));
        let mut bad = setup;
        bad.speech.chars_per_second = 0.0;
        assert!(matches!(run_scenario("Hi.", &bad), Err(RunError::SpeechModel)));
    }
}
