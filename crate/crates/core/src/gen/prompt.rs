use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Audience, GenerationParams, Style};
use crate::registry::{ParamKind, Registry};

pub const PROMPT_VERSION: &str = "v1";

const NARRATIVE_TEMPLATE: &str = include_str!("../../prompts/narrative.v1.txt");
const TAGGING_TEMPLATE: &str = include_str!("../../prompts/tagging.v1.txt");

/// Who is speaking and where.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PromptContext {
    pub narrator: String,
    pub location: String,
}

impl Default for PromptContext {
    fn default() -> Self {
        PromptContext {
            narrator: "MENTOR-1, an android tour guide with expressive arms, head and face".into(),
            location: "an exhibition hall of a technology museum".into(),
        }
    }
}

/// A system/user prompt pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

fn fill(template: &str, vars: &[(&str, &str)]) -> Prompt {
    let mut text = String::from(template);
    for (name, value) in vars {
        text = text.replace(&format!("{{{name}}}"), value);
    }
    let (system, user) = text.split_once("\n---\n").unwrap_or(("", &text));
    Prompt {
        system: system.trim().into(),
        user: user.trim().into(),
    }
}

fn style_rule(style: Style) -> &'static str {
    match style {
        Style::Formal => "Keep a calm, precise and respectful tone.",
        Style::Humorous => "Be playful: a light joke or a witty remark every few sentences is welcome.",
    }
}

fn audience_rule(audience: Audience) -> &'static str {
    match audience {
        Audience::Schoolchildren => "Use short sentences and everyday words, and ask the children simple questions.",
        Audience::AdultsNontechnical => "Explain technical terms with familiar comparisons.",
        Audience::Specialists => "Technical vocabulary is fine; focus on how and why it works.",
    }
}

pub fn narrative_prompt(
    context: &PromptContext,
    title: &str,
    body: &str,
    params: &GenerationParams,
) -> Prompt {
    let length = format!("{}", params.target_length);
    fill(
        NARRATIVE_TEMPLATE,
        &[
            ("narrator", &context.narrator),
            ("location", &context.location),
            ("length", &length),
            ("style", params.style.as_str()),
            ("style_rule", style_rule(params.style)),
            ("audience", params.audience.as_str()),
            ("audience_rule", audience_rule(params.audience)),
            ("title", title),
            ("body", body),
        ],
    )
}

/// One line per action offered to the tagger, with its parameters.
pub fn action_list(registry: &Registry) -> String {
    let mut lines = Vec::new();
    for def in registry.iter().filter(|d| !d.internal) {
        let mut params = Vec::new();
        for p in &def.param_schema {
            let kind = match p.kind {
                ParamKind::Point3d => String::from("x,y,z in meters"),
                _ if !p.choices.is_empty() => p.choices.join("|"),
                kind => format!("{kind}"),
            };
            match &p.default {
                Some(d) if !p.required => params.push(format!("{} ({kind}, optional, default {d})", p.name)),
                _ => params.push(format!("{} ({kind})", p.name)),
            }
        }
        let signature = if params.is_empty() {
            String::from("no parameters")
        } else {
            params.join("; ")
        };
        lines.push(format!("- {}: {}. Parameters: {signature}.", def.action_type, def.description));
    }
    lines.join("\n")
}

pub fn tagging_prompt(context: &PromptContext, narrative: &str, registry: &Registry) -> Prompt {
    let actions = action_list(registry);
    fill(
        TAGGING_TEMPLATE,
        &[
            ("narrator", &context.narrator),
            ("actions", &actions),
            ("narrative", narrative),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::mentor1_registry;

    fn params() -> GenerationParams {
        GenerationParams {
            target_length: 1200,
            style: Style::Humorous,
            audience: Audience::Specialists,
        }
    }

    #[test]
    fn narrative_prompt_carries_context_and_params() {
        let p = narrative_prompt(&PromptContext::default(), "Steam engine", "It pumps water.", &params());
        assert!(p.system.contains("technology museum"));
        assert!(p.system.contains("MENTOR-1"));
        assert!(p.system.contains("1200"));
        assert!(p.system.contains("humorous"));
        assert!(p.system.contains("specialists"));
        assert!(p.user.contains("Steam engine"));
        assert!(p.user.contains("It pumps water."));
        assert!(!p.system.contains('{') && !p.user.contains('{'));
    }

    #[test]
    fn tagging_prompt_lists_public_actions_only() {
        let p = tagging_prompt(&PromptContext::default(), "Hello.", &mentor1_registry());
        assert!(p.system.contains("- anim:"));
        assert!(p.system.contains("show_space"));
        assert!(!p.system.contains("neutral_pose"));
        assert!(p.user.ends_with("Hello."));
    }
}
