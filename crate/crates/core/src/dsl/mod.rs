//! Tagged scenario text: parsing, sanitization against a registry, and
//! compilation into a timed event stream.

mod parse;
mod sanitize;
mod timeline;

pub use parse::{
    normalize_whitespace, parse_scenario, render_scenario, ActionTag, MalformedTag, ParseError,
    ParsedScenario,
};
pub use sanitize::{sanitize, DropReason, SanitizationReport};
pub use timeline::{compile_timeline, SpeechModel, TimelineError, TimelineEvent};

use alloc::string::String;
use alloc::vec::Vec;

use crate::registry::Registry;

/// Scenario text with its embedded tags, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioDocument {
    pub raw_text: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub metadata: Option<crate::gen::GenerationParams>,
}

impl ScenarioDocument {
    pub fn new(raw_text: impl Into<String>) -> Self {
        ScenarioDocument {
            raw_text: raw_text.into(),
            metadata: None,
        }
    }
}

/// A parsed and sanitized scenario, ready for timeline compilation.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedScenario {
    pub speech_text: String,
    pub tags: Vec<ActionTag>,
    pub report: SanitizationReport,
}

/// Parses and sanitizes in one step, folding malformed brackets into the
/// report.
pub fn check_scenario(raw_text: &str, registry: &Registry) -> Result<CheckedScenario, ParseError> {
    let parsed = parse_scenario(raw_text)?;
    let (tags, mut report) = sanitize(&parsed.tags, registry);
    report.malformed = parsed.malformed;
    Ok(CheckedScenario {
        speech_text: parsed.speech_text,
        tags,
        report,
    })
}
