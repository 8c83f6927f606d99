//! The universe of actions a robot can perform, and parameter validation
//! against it.
//!
//! Scenario tags carry their parameters as raw strings. [`validate_params`]
//! coerces them to the schema of the named [`ActionDefinition`], filling
//! optional trailing parameters from their defaults. Anything the registry
//! does not know about is rejected, which is what lets generated scenarios
//! name actions that do not exist without harming the run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::priority::{Priority, MAX_COMMAND_LEVEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ParamKind {
    Identifier,
    Integer,
    Real,
    Point3d,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Identifier => "identifier",
            ParamKind::Integer => "integer",
            ParamKind::Real => "real",
            ParamKind::Point3d => "point3d",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub required: bool,
    /// Raw default for optional parameters, parsed with `kind`.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub default: Option<String>,
    /// Closed vocabulary for identifier parameters; empty means any identifier.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub choices: Vec<String>,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

impl ParamSpec {
    pub fn required(name: &str, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            required: true,
            default: None,
            choices: Vec::new(),
        }
    }

    pub fn optional(name: &str, kind: ParamKind, default: &str) -> Self {
        ParamSpec {
            required: false,
            default: Some(default.into()),
            ..ParamSpec::required(name, kind)
        }
    }

    pub fn with_choices<I, S>(mut self, choices: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.choices = choices.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DurationClass {
    Instantaneous,
    Prolonged,
}

/// A named robot resource such as `right_arm_joints` or `speaker`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ResourceId(String);

impl ResourceId {
    pub fn new(name: &str) -> Option<ResourceId> {
        (!name.trim().is_empty()).then(|| ResourceId(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionDefinition {
    pub action_type: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub param_schema: Vec<ParamSpec>,
    pub duration_class: DurationClass,
    /// Seconds; zero for instantaneous actions.
    #[cfg_attr(feature = "serde", serde(default))]
    pub nominal_duration: f64,
    pub base_priority: u8,
    pub owner_agent: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub resources: BTreeSet<ResourceId>,
    /// Contextual meaning, shown to tag generators.
    #[cfg_attr(feature = "serde", serde(default))]
    pub description: String,
    /// Internal actions (defaults, background fillers) are valid in
    /// scenarios but are not offered to tag generators.
    #[cfg_attr(feature = "serde", serde(default))]
    pub internal: bool,
}

impl ActionDefinition {
    pub fn priority(&self) -> Priority {
        Priority::Command(self.base_priority)
    }

    pub fn is_prolonged(&self) -> bool {
        self.duration_class == DurationClass::Prolonged
    }

    fn check(&self) -> Result<(), String> {
        if !is_identifier(&self.action_type) {
            return Err("action_type is not an identifier".into());
        }
        if self.base_priority == 0 || self.base_priority > MAX_COMMAND_LEVEL {
            return Err(alloc::format!(
                "base_priority {} outside 1..={MAX_COMMAND_LEVEL}",
                self.base_priority
            ));
        }
        if !self.nominal_duration.is_finite() || self.nominal_duration < 0.0 {
            return Err("nominal_duration must be a finite non-negative number".into());
        }
        if self.duration_class == DurationClass::Instantaneous && self.nominal_duration != 0.0 {
            return Err("instantaneous actions must have nominal_duration 0".into());
        }
        if self.owner_agent.trim().is_empty() {
            return Err("owner_agent is empty".into());
        }
        let mut seen = BTreeSet::new();
        let mut optional_seen = false;
        for spec in &self.param_schema {
            if !seen.insert(spec.name.as_str()) {
                return Err(alloc::format!("parameter `{}` declared twice", spec.name));
            }
            if spec.required {
                if optional_seen {
                    return Err(alloc::format!(
                        "required parameter `{}` follows an optional one",
                        spec.name
                    ));
                }
            } else {
                optional_seen = true;
                let Some(raw) = &spec.default else {
                    return Err(alloc::format!(
                        "optional parameter `{}` has no default",
                        spec.name
                    ));
                };
                coerce(spec, raw).map_err(|_| {
                    alloc::format!("default `{raw}` of `{}` does not fit its kind", spec.name)
                })?;
            }
            if !spec.choices.is_empty() && spec.kind != ParamKind::Identifier {
                return Err(alloc::format!(
                    "choices given for non-identifier parameter `{}`",
                    spec.name
                ));
            }
        }
        Ok(())
    }
}

/// A parameter after coercion to its schema kind.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum ParamValue {
    Integer(i64),
    Real(f64),
    Point([f64; 3]),
    Identifier(String),
}

impl ParamValue {
    pub fn as_identifier(&self) -> Option<&str> {
        match self {
            ParamValue::Identifier(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            ParamValue::Integer(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_point(&self) -> Option<[f64; 3]> {
        match self {
            ParamValue::Point(p) => Some(*p),
            _ => None,
        }
    }
}

/// Canonical textual form, the inverse of coercion.
impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Identifier(s) => f.write_str(s),
            ParamValue::Integer(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Point([x, y, z]) => write!(f, "{x},{y},{z}"),
        }
    }
}

pub fn render_params(values: &[ParamValue]) -> Vec<String> {
    values.iter().map(ToString::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("expected {min}..={max} parameters, got {got}")]
    ArityMismatch { min: usize, max: usize, got: usize },
    /// `position` is 1-based.
    #[error("parameter {position} (`{name}`): `{got}` is not a valid {expected}")]
    TypeMismatch {
        position: usize,
        name: String,
        expected: ParamKind,
        got: String,
    },
    #[error("parameter {position} (`{name}`): `{got}` is not one of the allowed values")]
    NotAllowed {
        position: usize,
        name: String,
        got: String,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("action `{0}` is already registered")]
    DuplicateAction(String),
    #[error("invalid definition for `{action_type}`: {reason}")]
    InvalidDefinition { action_type: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    actions: BTreeMap<String, ActionDefinition>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_definitions<I>(definitions: I) -> Result<Self, RegistryError>
    where
        I: IntoIterator<Item = ActionDefinition>,
    {
        let mut registry = Registry::new();
        for def in definitions {
            registry.register(def, false)?;
        }
        Ok(registry)
    }

    pub fn register(
        &mut self,
        definition: ActionDefinition,
        overwrite: bool,
    ) -> Result<(), RegistryError> {
        definition
            .check()
            .map_err(|reason| RegistryError::InvalidDefinition {
                action_type: definition.action_type.clone(),
                reason,
            })?;
        if !overwrite && self.actions.contains_key(&definition.action_type) {
            return Err(RegistryError::DuplicateAction(definition.action_type));
        }
        self.actions
            .insert(definition.action_type.clone(), definition);
        Ok(())
    }

    pub fn lookup(&self, action_type: &str) -> Option<&ActionDefinition> {
        self.actions.get(action_type)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionDefinition> {
        self.actions.values()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Coerces raw tag parameters to `definition`'s schema.
///
/// The result always has exactly the schema's arity. Empty trailing or
/// missing optional parameters take their declared defaults.
pub fn validate_params(
    definition: &ActionDefinition,
    raw_params: &[String],
) -> Result<Vec<ParamValue>, ValidationError> {
    let schema = &definition.param_schema;
    let min = schema.iter().filter(|s| s.required).count();
    let max = schema.len();
    if raw_params.len() < min || raw_params.len() > max {
        return Err(ValidationError::ArityMismatch {
            min,
            max,
            got: raw_params.len(),
        });
    }
    schema
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let raw = raw_params.get(i).map(|s| s.trim()).unwrap_or("");
            let raw = match (&spec.default, raw.is_empty()) {
                (Some(default), true) if !spec.required => default.as_str(),
                _ => raw,
            };
            coerce(spec, raw).map_err(|e| e.at(i + 1, spec))
        })
        .collect()
}

enum CoerceError {
    Kind(String),
    Choice(String),
}

impl CoerceError {
    fn at(self, position: usize, spec: &ParamSpec) -> ValidationError {
        match self {
            CoerceError::Kind(got) => ValidationError::TypeMismatch {
                position,
                name: spec.name.clone(),
                expected: spec.kind,
                got,
            },
            CoerceError::Choice(got) => ValidationError::NotAllowed {
                position,
                name: spec.name.clone(),
                got,
            },
        }
    }
}

fn coerce(spec: &ParamSpec, raw: &str) -> Result<ParamValue, CoerceError> {
    let kind_err = || CoerceError::Kind(raw.into());
    match spec.kind {
        ParamKind::Identifier => {
            if !is_identifier(raw) {
                return Err(kind_err());
            }
            if spec.choices.is_empty() || spec.choices.iter().any(|c| c == raw) {
                return Ok(ParamValue::Identifier(raw.into()));
            }
            spec.choices
                .iter()
                .find(|c| c.eq_ignore_ascii_case(raw))
                .map(|c| ParamValue::Identifier(c.clone()))
                .ok_or_else(|| CoerceError::Choice(raw.into()))
        }
        ParamKind::Integer => {
            if let Ok(v) = raw.parse::<i64>() {
                return Ok(ParamValue::Integer(v));
            }
            // Integral reals such as `2.0` are accepted.
            let v = parse_real(raw).ok_or_else(kind_err)?;
            if libm::trunc(v) == v && libm::fabs(v) < 9.0e15 {
                Ok(ParamValue::Integer(v as i64))
            } else {
                Err(kind_err())
            }
        }
        ParamKind::Real => parse_real(raw).map(ParamValue::Real).ok_or_else(kind_err),
        ParamKind::Point3d => {
            let mut parts = raw.split(',').map(|p| parse_real(p.trim()));
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(Some(x)), Some(Some(y)), Some(Some(z)), None) => {
                    Ok(ParamValue::Point([x, y, z]))
                }
                _ => Err(kind_err()),
            }
        }
    }
}

fn parse_real(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
