//! Two-stage scenario generation.
//!
//! Stage one asks a provider for a narrative in the guide's voice; stage two
//! asks it to annotate that narrative with action tags. Outputs are checked
//! after each stage and requested again once when they fail the check.

mod cache;
mod prompt;
mod provider;
mod stub;

pub use cache::{param_distance, DistanceWeights, ExhibitScenarios, ScenarioCache};
pub use prompt::{action_list, narrative_prompt, tagging_prompt, Prompt, PromptContext, PROMPT_VERSION};
pub use provider::{FinishStatus, Provider, ProviderError, ProviderRequest, ProviderResponse, RequestHint};
pub use stub::StubProvider;

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::dsl::{
    normalize_whitespace, parse_scenario, render_scenario, sanitize, ParseError, SanitizationReport,
    ScenarioDocument,
};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Style {
    Formal,
    Humorous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Audience {
    Schoolchildren,
    AdultsNontechnical,
    Specialists,
}

impl Style {
    pub const ALL: [Style; 2] = [Style::Formal, Style::Humorous];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::Formal => "formal",
            Style::Humorous => "humorous",
        }
    }
}

impl Audience {
    pub const ALL: [Audience; 3] = [
        Audience::Schoolchildren,
        Audience::AdultsNontechnical,
        Audience::Specialists,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Audience::Schoolchildren => "schoolchildren",
            Audience::AdultsNontechnical => "adults_nontechnical",
            Audience::Specialists => "specialists",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Audience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value `{0}`")]
pub struct UnknownValue(pub String);

impl FromStr for Style {
    type Err = UnknownValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownValue(s.into()))
    }
}

impl FromStr for Audience {
    type Err = UnknownValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Audience::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownValue(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationParams {
    /// Characters, counting spaces.
    pub target_length: usize,
    pub style: Style,
    pub audience: Audience,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhibitDescription {
    pub id: String,
    pub title: String,
    pub body: String,
}

impl ExhibitDescription {
    pub fn new(id: &str, title: &str, body: &str) -> Result<Self, GenError> {
        if body.trim().is_empty() {
            return Err(GenError::EmptyDescription(id.into()));
        }
        Ok(ExhibitDescription {
            id: id.into(),
            title: title.trim().into(),
            body: body.trim().into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("narrative is {length} characters, outside the allowed band around {target}")]
    LengthViolation {
        text: String,
        length: usize,
        target: usize,
    },
    #[error("tagging changed the narrative text")]
    NarrativeMutated { output: String },
    #[error("tagged output could not be parsed: {0}")]
    MalformedOutput(ParseError),
    #[error("no scenario available for exhibit `{0}`")]
    NoScenario(String),
    #[error("exhibit `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("target length must be positive")]
    ZeroLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub context: PromptContext,
    /// Allowed relative deviation from the target length.
    pub length_tolerance: f64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            context: PromptContext::default(),
            length_tolerance: 0.2,
            temperature: 0.7,
            max_tokens: 2048,
        }
    }
}

impl GenOptions {
    pub fn length_ok(&self, length: usize, target: usize) -> bool {
        let slack = self.length_tolerance * target as f64;
        (length as f64 - target as f64).abs() <= slack
    }
}

/// Stage one: a plain narrative of roughly the requested length.
pub fn generate_narrative<P: Provider + ?Sized>(
    exhibit: &ExhibitDescription,
    params: &GenerationParams,
    provider: &mut P,
    options: &GenOptions,
) -> Result<String, GenError> {
    if params.target_length == 0 {
        return Err(GenError::ZeroLength);
    }
    let prompt = narrative_prompt(&options.context, &exhibit.title, &exhibit.body, params);
    let request = ProviderRequest {
        system: prompt.system,
        user: prompt.user,
        temperature: options.temperature,
        max_tokens: options.max_tokens,
        hint: RequestHint::Narrative {
            exhibit: exhibit.clone(),
            params: params.clone(),
        },
    };
    let mut text = String::new();
    for _ in 0..2 {
        let response = provider.complete(&request)?;
        text = strip_tags(&response.text);
        if options.length_ok(text.chars().count(), params.target_length) {
            return Ok(text);
        }
    }
    Err(GenError::LengthViolation {
        length: text.chars().count(),
        text,
        target: params.target_length,
    })
}

/// Removes any tags a provider put into what should be plain speech.
fn strip_tags(text: &str) -> String {
    match parse_scenario(text) {
        Ok(parsed) => normalize_whitespace(&parsed.speech_text),
        Err(_) => normalize_whitespace(text),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedScenario {
    /// Speech with only registry-valid tags.
    pub document: ScenarioDocument,
    pub report: SanitizationReport,
    /// The provider's output before sanitization.
    pub raw_output: String,
}

/// Stage two: annotates `narrative` with action tags without touching its
/// words.
pub fn insert_tags<P: Provider + ?Sized>(
    narrative: &str,
    registry: &Registry,
    provider: &mut P,
    options: &GenOptions,
) -> Result<TaggedScenario, GenError> {
    let prompt = tagging_prompt(&options.context, narrative, registry);
    let request = ProviderRequest {
        system: prompt.system,
        user: prompt.user,
        temperature: options.temperature,
        max_tokens: options.max_tokens,
        hint: RequestHint::Tagging {
            narrative: narrative.into(),
        },
    };
    let expected = normalize_whitespace(narrative);
    let mut failure = GenError::NarrativeMutated { output: String::new() };
    for _ in 0..2 {
        let response = provider.complete(&request)?;
        let parsed = match parse_scenario(&response.text) {
            Ok(parsed) => parsed,
            Err(e) => {
                failure = GenError::MalformedOutput(e);
                continue;
            }
        };
        if normalize_whitespace(&parsed.speech_text) != expected {
            failure = GenError::NarrativeMutated {
                output: response.text,
            };
            continue;
        }
        let (kept, mut report) = sanitize(&parsed.tags, registry);
        report.malformed = parsed.malformed;
        return Ok(TaggedScenario {
            document: ScenarioDocument::new(render_scenario(&parsed.speech_text, &kept)),
            report,
            raw_output: response.text,
        });
    }
    Err(failure)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub document: ScenarioDocument,
    pub narrative: String,
    pub report: SanitizationReport,
    pub raw_output: String,
    /// Set when the narrative stayed outside the length band after a retry
    /// and was used anyway.
    pub length_violation: bool,
}

/// Runs both stages and attaches the parameters to the document.
pub fn generate_scenario<P: Provider + ?Sized>(
    exhibit: &ExhibitDescription,
    params: &GenerationParams,
    registry: &Registry,
    provider: &mut P,
    options: &GenOptions,
) -> Result<GeneratedScenario, GenError> {
    let (narrative, length_violation) = match generate_narrative(exhibit, params, provider, options) {
        Ok(text) => (text, false),
        Err(GenError::LengthViolation { text, .. }) => (text, true),
        Err(e) => return Err(e),
    };
    let tagged = insert_tags(&narrative, registry, provider, options)?;
    let mut document = tagged.document;
    document.metadata = Some(params.clone());
    Ok(GeneratedScenario {
        document,
        narrative,
        report: tagged.report,
        raw_output: tagged.raw_output,
        length_violation,
    })
}
