use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::registry::is_identifier;

/// An inline command `<action_type:p1; ...; pn>` excised from speech.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionTag {
    pub action_type: String,
    pub params: Vec<String>,
    /// Character (not byte) index into the speech text.
    pub char_offset: usize,
}

impl ActionTag {
    pub fn new(action_type: &str, params: &[&str], char_offset: usize) -> Self {
        ActionTag {
            action_type: action_type.into(),
            params: params.iter().map(|p| String::from(*p)).collect(),
            char_offset,
        }
    }

    /// The tag as it appears in scenario text.
    pub fn markup(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "<{}:", self.action_type);
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(p);
        }
        out.push('>');
        out
    }
}

/// Bracketed text that looked like a tag but did not match the grammar.
/// It stays in the speech text verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MalformedTag {
    pub text: String,
    pub char_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedScenario {
    pub speech_text: String,
    pub tags: Vec<ActionTag>,
    pub malformed: Vec<MalformedTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("unterminated tag opened at character {char_offset}")]
    UnterminatedTag { char_offset: usize },
}

enum Candidate {
    Tag {
        action_type: String,
        params: Vec<String>,
        end: usize,
    },
    Malformed {
        end: usize,
    },
    Literal,
    Unterminated,
}

/// Looks for a tag starting at `chars[start] == '<'`.
fn scan_tag(chars: &[char], start: usize) -> Candidate {
    let mut i = start + 1;
    let ident_start = i;
    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
        i += 1;
    }
    let ident: String = chars[ident_start..i].iter().collect();
    if !is_identifier(&ident) {
        return Candidate::Literal;
    }
    if i < chars.len() && chars[i] == ':' {
        let body_start = i + 1;
        let mut j = body_start;
        while j < chars.len() {
            match chars[j] {
                '>' => {
                    let body: String = chars[body_start..j].iter().collect();
                    let params = if body.trim().is_empty() {
                        Vec::new()
                    } else {
                        body.split(';').map(|p| String::from(p.trim())).collect()
                    };
                    return Candidate::Tag {
                        action_type: ident,
                        params,
                        end: j + 1,
                    };
                }
                '<' | '\n' => return Candidate::Malformed { end: j },
                _ => j += 1,
            }
        }
        return Candidate::Unterminated;
    }
    // An identifier followed by something other than the separator: the
    // bracket is literal speech, but worth reporting if it closes.
    let mut j = i;
    while j < chars.len() {
        match chars[j] {
            '>' => return Candidate::Malformed { end: j + 1 },
            '<' | '\n' => break,
            _ => j += 1,
        }
    }
    Candidate::Literal
}

struct Builder {
    speech: String,
    len: usize,
    pending_space: bool,
    pending: Vec<(String, Vec<String>)>,
    tags: Vec<ActionTag>,
}

impl Builder {
    fn trim_trailing_whitespace(&mut self) -> bool {
        let mut trimmed = false;
        while self.speech.ends_with(char::is_whitespace) {
            self.speech.pop();
            self.len -= 1;
            trimmed = true;
        }
        trimmed
    }

    fn flush_pending(&mut self) {
        if self.pending_space && self.len > 0 {
            self.speech.push(' ');
            self.len += 1;
        }
        self.pending_space = false;
        for (action_type, params) in self.pending.drain(..) {
            self.tags.push(ActionTag {
                action_type,
                params,
                char_offset: self.len,
            });
        }
    }

    /// Emits one literal character and returns its offset.
    fn push(&mut self, c: char) -> usize {
        if !self.pending.is_empty() {
            self.flush_pending();
        }
        self.speech.push(c);
        self.len += 1;
        self.len - 1
    }
}

/// Splits scenario text into spoken text and action tags.
///
/// Whitespace on either side of a tag collapses to a single space, and each
/// tag's offset points at the first character spoken after it.
pub fn parse_scenario(raw_text: &str) -> Result<ParsedScenario, ParseError> {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut b = Builder {
        speech: String::with_capacity(raw_text.len()),
        len: 0,
        pending_space: false,
        pending: Vec::new(),
        tags: Vec::new(),
    };
    let mut malformed = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            match scan_tag(&chars, i) {
                Candidate::Tag {
                    action_type,
                    params,
                    end,
                } => {
                    if b.trim_trailing_whitespace() {
                        b.pending_space = true;
                    }
                    b.pending.push((action_type, params));
                    i = end;
                    while i < chars.len() && chars[i].is_whitespace() {
                        b.pending_space = true;
                        i += 1;
                    }
                    continue;
                }
                Candidate::Unterminated => {
                    return Err(ParseError::UnterminatedTag { char_offset: i });
                }
                Candidate::Malformed { end } => {
                    let offset = b.push('<');
                    malformed.push(MalformedTag {
                        text: chars[i..end].iter().collect(),
                        char_offset: offset,
                    });
                    i += 1;
                    continue;
                }
                Candidate::Literal => {}
            }
        }
        b.push(chars[i]);
        i += 1;
    }
    b.pending_space = false;
    b.flush_pending();
    Ok(ParsedScenario {
        speech_text: b.speech,
        tags: b.tags,
        malformed,
    })
}

/// Re-inserts tags into speech text; the inverse of [`parse_scenario`] for
/// tags at offsets it produces.
pub fn render_scenario(speech_text: &str, tags: &[ActionTag]) -> String {
    let mut sorted: Vec<&ActionTag> = tags.iter().collect();
    sorted.sort_by_key(|t| t.char_offset);
    let mut out = String::with_capacity(speech_text.len() + tags.len() * 16);
    let mut next = sorted.into_iter().peekable();
    let mut prev: Option<char> = None;
    let mut chars = speech_text.chars().enumerate().peekable();
    loop {
        let pos = chars.peek().map_or(usize::MAX, |(i, _)| *i);
        while let Some(tag) = next.next_if(|t| t.char_offset <= pos) {
            if pos == usize::MAX && prev.is_some_and(|c| !c.is_whitespace()) {
                out.push(' ');
                prev = Some(' ');
            }
            out.push_str(&tag.markup());
            if pos != usize::MAX && prev.is_none_or(char::is_whitespace) {
                out.push(' ');
            }
        }
        match chars.next() {
            Some((_, c)) => {
                out.push(c);
                prev = Some(c);
            }
            None => break,
        }
    }
    out
}

/// Collapses every whitespace run to one space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
