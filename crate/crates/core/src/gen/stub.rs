use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::provider::{FinishStatus, Provider, ProviderError, ProviderRequest, ProviderResponse, RequestHint};
use super::{Audience, ExhibitDescription, GenerationParams, Style};
use crate::registry::{ActionDefinition, ParamKind, Registry};

const UNKNOWN_ACTIONS: [&str; 5] = ["teleport", "juggle", "moonwalk", "fly", "sneeze"];

/// Offline provider: fills templates from the exhibit text and tags
/// narratives with actions drawn from a registry. Fully determined by its
/// seed and settings.
#[derive(Debug, Clone)]
pub struct StubProvider {
    rng: ChaCha8Rng,
    registry: Registry,
    /// Multiplies the requested length; values far from 1 provoke length
    /// violations.
    pub length_factor: f64,
    /// Chance of a tag before each sentence.
    pub tag_rate: f64,
    /// Share of tags naming an action that does not exist.
    pub unknown_rate: f64,
    /// Share of tags with parameters the registry rejects.
    pub bad_param_rate: f64,
    /// Alter one word of the narrative while tagging.
    pub mutate_speech: bool,
    /// Identifier used for parameters without a closed vocabulary.
    pub free_identifier: String,
}

impl StubProvider {
    pub fn new(seed: u64, registry: Registry) -> Self {
        StubProvider {
            rng: ChaCha8Rng::seed_from_u64(seed),
            registry,
            length_factor: 1.0,
            tag_rate: 0.6,
            unknown_rate: 0.0,
            bad_param_rate: 0.0,
            mutate_speech: false,
            free_identifier: "exhibit".into(),
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        // 53 random bits mapped to [0, 1).
        ((self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[(self.rng.next_u64() % items.len() as u64) as usize]
    }

    fn narrative(&mut self, exhibit: &ExhibitDescription, params: &GenerationParams) -> String {
        let goal = ((params.target_length as f64 * self.length_factor) as usize).max(1);
        let mut pool = opening(params, &exhibit.title);
        pool.extend(split_sentences(&exhibit.body));
        pool.extend(asides(params, &exhibit.title));
        let closing = closing(params);
        let mut text = String::new();
        let mut len = 0usize;
        let push = |text: &mut String, len: &mut usize, sentence: &str| {
            if *len > 0 {
                text.push(' ');
                *len += 1;
            }
            text.push_str(sentence);
            *len += sentence.chars().count();
        };
        let room = |len: usize| if len == 0 { 0 } else { 1 };
        let mut i = 0;
        loop {
            let sentence = if i < pool.len() {
                pool[i].clone()
            } else {
                let k = self.rng.next_u64() as usize % pool.len().max(1);
                pool.get(k).cloned().unwrap_or_else(|| closing.clone())
            };
            i += 1;
            let n = sentence.chars().count();
            if len + room(len) + n + room(1) + closing.chars().count() <= goal {
                push(&mut text, &mut len, &sentence);
                continue;
            }
            // Fill the remaining space word by word, keeping the closing line.
            let reserve = closing.chars().count() + 1;
            let mut partial = Vec::new();
            let mut plen = 0usize;
            for word in sentence.split_whitespace() {
                let w = word.trim_end_matches(['.', '!', '?', ',']);
                let extra = if partial.is_empty() { w.chars().count() } else { w.chars().count() + 1 };
                if len + room(len) + plen + extra + 1 + reserve > goal {
                    break;
                }
                partial.push(w);
                plen += extra;
            }
            if partial.len() >= 2 {
                let fragment = format!("{}.", partial.join(" "));
                push(&mut text, &mut len, &fragment);
            }
            if len + room(len) + closing.chars().count() <= goal || len == 0 {
                push(&mut text, &mut len, &closing);
            }
            break;
        }
        text
    }

    fn valid_params(&mut self, def: &ActionDefinition) -> Vec<String> {
        let mut params = Vec::new();
        for spec in &def.param_schema {
            if !spec.required && self.chance(0.5) {
                break;
            }
            let value = match spec.kind {
                ParamKind::Identifier if !spec.choices.is_empty() => self.pick(&spec.choices).clone(),
                ParamKind::Identifier => self.free_identifier.clone(),
                ParamKind::Integer => format!("{}", 1 + self.rng.next_u64() % 2),
                ParamKind::Real => String::from("0.5"),
                ParamKind::Point3d => String::from("1.5,0.4,1.2"),
            };
            params.push(value);
        }
        params
    }

    fn random_tag(&mut self) -> String {
        let public: Vec<ActionDefinition> = self.registry.iter().filter(|d| !d.internal).cloned().collect();
        if public.is_empty() || self.chance(self.unknown_rate) {
            let name = *self.pick(&UNKNOWN_ACTIONS);
            return format!("<{name}:left>");
        }
        let def = self.pick(&public).clone();
        let mut params = self.valid_params(&def);
        if self.chance(self.bad_param_rate) {
            match def.param_schema.iter().position(|p| !p.choices.is_empty()) {
                Some(i) if i < params.len() => params[i] = String::from("moonwalk"),
                _ => {
                    params = def.param_schema.iter().map(|_| String::from("x")).collect();
                    params.push(String::from("extra"));
                    params.push(String::from("extra"));
                }
            }
        }
        format!("<{}:{}>", def.action_type, params.join(";"))
    }

    fn tagged(&mut self, narrative: &str) -> String {
        let mut out = String::with_capacity(narrative.len() * 2);
        let mut at_sentence_start = true;
        let mut mutated = !self.mutate_speech;
        for word in narrative.split(' ') {
            if at_sentence_start && !word.is_empty() && self.chance(self.tag_rate) {
                out.push_str(&self.random_tag());
                out.push(' ');
            }
            if !mutated && word.chars().count() > 3 {
                out.push_str("indeed ");
                mutated = true;
            }
            out.push_str(word);
            out.push(' ');
            at_sentence_start = word.ends_with(['.', '!', '?']);
        }
        out.pop();
        out
    }
}

impl Provider for StubProvider {
    fn complete(&mut self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let text = match &request.hint {
            RequestHint::Narrative { exhibit, params } => self.narrative(exhibit, params),
            RequestHint::Tagging { narrative } => self.tagged(narrative),
        };
        if text.is_empty() {
            return Err(ProviderError::BadResponse("empty text".into()));
        }
        Ok(ProviderResponse {
            text,
            finish: FinishStatus::Complete,
        })
    }
}

fn split_sentences(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for word in body.split_whitespace() {
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
        if word.ends_with(['.', '!', '?']) {
            out.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        current.push('.');
        out.push(current);
    }
    out
}

fn opening(params: &GenerationParams, title: &str) -> Vec<String> {
    let greeting = match (params.style, params.audience) {
        (Style::Humorous, Audience::Schoolchildren) => "Hello, young explorers! Do not worry, I only bite batteries.",
        (Style::Humorous, Audience::AdultsNontechnical) => "Welcome, friends! I am a robot, so laughing at my jokes is optional but appreciated.",
        (Style::Humorous, Audience::Specialists) => "Good day, colleagues! I promise my firmware is more stable than my sense of humor.",
        (Style::Formal, Audience::Schoolchildren) => "Good morning, children, and welcome to our museum.",
        (Style::Formal, Audience::AdultsNontechnical) => "Good afternoon, and welcome to this part of the exhibition.",
        (Style::Formal, Audience::Specialists) => "Welcome, dear colleagues, to this section of the exhibition.",
    };
    vec![greeting.to_string(), format!("Let me introduce {title}.")]
}

fn asides(params: &GenerationParams, title: &str) -> Vec<String> {
    let mut out = vec![format!("Please take a closer look at {title}.")];
    out.push(
        match (params.style, params.audience) {
            (_, Audience::Schoolchildren) => "Can you guess how it works? Raise your hand if you have an idea.",
            (Style::Humorous, _) => "If it looks complicated, remember that my own wiring looks even worse.",
            (Style::Formal, Audience::Specialists) => "Note the engineering decisions behind its design.",
            (Style::Formal, _) => "Each part of it was designed with a clear purpose.",
        }
        .to_string(),
    );
    out.push("It is a fine example of human curiosity and skill.".to_string());
    out
}

fn closing(params: &GenerationParams) -> String {
    match params.style {
        Style::Formal => "Thank you for your attention.",
        Style::Humorous => "Thank you, and no refunds for bad jokes!",
    }
    .to_string()
}
