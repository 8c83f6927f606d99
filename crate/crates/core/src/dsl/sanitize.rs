use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::parse::{ActionTag, MalformedTag};
use crate::registry::{render_params, validate_params, Registry, ValidationError};

#[derive(Debug, Clone, PartialEq)]
pub enum DropReason {
    UnknownAction,
    BadParams(ValidationError),
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::UnknownAction => f.write_str("unknown action"),
            DropReason::BadParams(e) => write!(f, "bad parameters: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SanitizationReport {
    pub dropped_tags: Vec<(ActionTag, DropReason)>,
    pub repaired_tags: Vec<(ActionTag, String)>,
    /// Bracketed text that never became a tag; left in the speech.
    pub malformed: Vec<MalformedTag>,
}

impl SanitizationReport {
    pub fn is_clean(&self) -> bool {
        self.dropped_tags.is_empty() && self.malformed.is_empty()
    }

    /// Dropped tags plus malformed brackets.
    pub fn drop_count(&self) -> usize {
        self.dropped_tags.len() + self.malformed.len()
    }
}

/// Keeps tags the registry can execute, normalizing their parameters.
///
/// Never fails: unknown actions and unrecoverable parameters are reported and
/// dropped, coercible parameters are rewritten in canonical form.
pub fn sanitize(tags: &[ActionTag], registry: &Registry) -> (Vec<ActionTag>, SanitizationReport) {
    let mut kept = Vec::with_capacity(tags.len());
    let mut report = SanitizationReport::default();
    for tag in tags {
        let Some(definition) = registry.lookup(&tag.action_type) else {
            report
                .dropped_tags
                .push((tag.clone(), DropReason::UnknownAction));
            continue;
        };
        match validate_params(definition, &tag.params) {
            Err(e) => report
                .dropped_tags
                .push((tag.clone(), DropReason::BadParams(e))),
            Ok(values) => {
                let normalized = render_params(&values);
                if normalized != tag.params {
                    let notes = describe_repairs(definition, &tag.params, &normalized);
                    report.repaired_tags.push((tag.clone(), notes));
                }
                kept.push(ActionTag {
                    action_type: tag.action_type.clone(),
                    params: normalized,
                    char_offset: tag.char_offset,
                });
            }
        }
    }
    (kept, report)
}

fn describe_repairs(
    definition: &crate::registry::ActionDefinition,
    raw: &[String],
    normalized: &[String],
) -> String {
    let mut notes: Vec<String> = Vec::new();
    for (i, (spec, value)) in definition.param_schema.iter().zip(normalized).enumerate() {
        match raw.get(i) {
            None => notes.push(alloc::format!("filled default {}={value}", spec.name)),
            Some(r) if r.trim().is_empty() => {
                notes.push(alloc::format!("filled default {}={value}", spec.name))
            }
            Some(r) if r != value => {
                notes.push(alloc::format!("coerced {} `{r}` to `{value}`", spec.name))
            }
            _ => {}
        }
    }
    notes.join("; ")
}
