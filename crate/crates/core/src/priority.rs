use core::fmt;
use core::str::FromStr;

/// Highest command level accepted by registries.
pub const MAX_COMMAND_LEVEL: u8 = 10;

/// Ordered action priority.
///
/// The two reserved levels sit below every command level, so any command
/// preempts a background or default-return action under ordinary arbitration.
/// "No active action" is modelled as `Option::<Priority>::None`, which orders
/// below every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Priority {
    Background,
    Default,
    Command(u8),
}

impl Priority {
    /// A command level in `1..=MAX_COMMAND_LEVEL`.
    pub fn command(level: u8) -> Option<Priority> {
        (1..=MAX_COMMAND_LEVEL)
            .contains(&level)
            .then_some(Priority::Command(level))
    }

    pub fn is_command(self) -> bool {
        matches!(self, Priority::Command(_))
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Priority::Background => f.write_str("background"),
            Priority::Default => f.write_str("default"),
            Priority::Command(level) => write!(f, "{level}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid priority `{0}`")]
pub struct PriorityParseError(pub alloc::string::String);

impl FromStr for Priority {
    type Err = PriorityParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "background" => Ok(Priority::Background),
            "default" => Ok(Priority::Default),
            other => other
                .parse::<u8>()
                .ok()
                .and_then(Priority::command)
                .ok_or_else(|| PriorityParseError(other.into())),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Priority {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Priority {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
