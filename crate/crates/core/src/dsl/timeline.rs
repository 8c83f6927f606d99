use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::parse::ActionTag;
use crate::registry::{validate_params, ParamValue, Registry, ValidationError};

/// Maps character offsets in speech to the time they are spoken.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeechModel {
    pub chars_per_second: f64,
    /// Extra seconds spent after each listed punctuation character.
    pub pauses: BTreeMap<char, f64>,
    /// Upper bound on how early a prolonged action starts before its anchor.
    pub advance_cap: f64,
}

impl Default for SpeechModel {
    fn default() -> Self {
        SpeechModel {
            chars_per_second: 15.0,
            pauses: ['.', '!', '?'].into_iter().map(|c| (c, 0.3)).collect(),
            advance_cap: 1.0,
        }
    }
}

impl SpeechModel {
    pub fn uniform(chars_per_second: f64) -> Self {
        SpeechModel {
            chars_per_second,
            pauses: BTreeMap::new(),
            advance_cap: 1.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.chars_per_second.is_finite()
            && self.chars_per_second > 0.0
            && self.advance_cap.is_finite()
            && self.advance_cap >= 0.0
            && self.pauses.values().all(|p| p.is_finite() && *p >= 0.0)
    }

    /// Seconds from the start of speech until character `offset` is reached.
    pub fn speak_time(&self, speech_text: &str, offset: usize) -> f64 {
        let mut pauses = 0.0;
        let mut count = 0usize;
        for c in speech_text.chars().take(offset) {
            count += 1;
            pauses += self.pauses.get(&c).copied().unwrap_or(0.0);
        }
        count as f64 / self.chars_per_second + pauses
    }

    pub fn total_duration(&self, speech_text: &str) -> f64 {
        self.speak_time(speech_text, usize::MAX)
    }

    /// Speak times for every offset `0..=len`.
    fn time_table(&self, speech_text: &str) -> Vec<f64> {
        let mut table = Vec::with_capacity(speech_text.len() + 1);
        let mut pauses = 0.0;
        table.push(0.0);
        for (i, c) in speech_text.chars().enumerate() {
            pauses += self.pauses.get(&c).copied().unwrap_or(0.0);
            table.push((i + 1) as f64 / self.chars_per_second + pauses);
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimelineEvent {
    pub trigger_time: f64,
    pub target_agent: String,
    pub action_type: String,
    pub params: Vec<ParamValue>,
    /// Character offset of the originating tag.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimelineError {
    #[error("action `{0}` has no owning agent")]
    UnroutableAction(String),
    #[error("tag `{action_type}` was not sanitized: {error}")]
    Unsanitized {
        action_type: String,
        error: ValidationError,
    },
}

/// Turns sanitized tags into time-ordered events.
///
/// Instantaneous actions fire when their anchor is spoken; prolonged ones
/// start up to `advance_cap` seconds earlier (never before zero).
pub fn compile_timeline(
    speech_text: &str,
    tags: &[ActionTag],
    speech_model: &SpeechModel,
    registry: &Registry,
) -> Result<Vec<TimelineEvent>, TimelineError> {
    let times = speech_model.time_table(speech_text);
    let last = times.len() - 1;
    let mut events = Vec::with_capacity(tags.len());
    for tag in tags {
        let definition = registry
            .lookup(&tag.action_type)
            .filter(|d| !d.owner_agent.is_empty())
            .ok_or_else(|| TimelineError::UnroutableAction(tag.action_type.clone()))?;
        let params = validate_params(definition, &tag.params).map_err(|error| {
            TimelineError::Unsanitized {
                action_type: tag.action_type.clone(),
                error,
            }
        })?;
        let spoken = times[tag.char_offset.min(last)];
        let trigger_time = if definition.is_prolonged() {
            let lead = definition.nominal_duration.min(speech_model.advance_cap);
            (spoken - lead).max(0.0)
        } else {
            spoken
        };
        events.push(TimelineEvent {
            trigger_time,
            target_agent: definition.owner_agent.clone(),
            action_type: tag.action_type.clone(),
            params,
            origin: tag.char_offset,
        });
    }
    events.sort_by(|a, b| {
        a.trigger_time
            .total_cmp(&b.trigger_time)
            .then(a.origin.cmp(&b.origin))
    });
    Ok(events)
}
