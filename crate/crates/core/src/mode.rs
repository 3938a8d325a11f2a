use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Response behaviour selected by the mode markers on the slate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interpret,
    #[default]
    Collaborate,
    Ideate,
    Analogy,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Interpret, Mode::Collaborate, Mode::Ideate, Mode::Analogy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Interpret => "interpret",
            Mode::Collaborate => "collaborate",
            Mode::Ideate => "ideate",
            Mode::Analogy => "analogy",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mode `{0}`")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMode(s.to_owned()))
    }
}
