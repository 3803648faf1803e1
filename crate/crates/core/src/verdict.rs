use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CoreError;

/// Whether rotated copies of an image keep its semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    /// Rotation-agnostic: rotated copies are positives.
    #[serde(rename = "RAI")]
    Rai,
    /// Canonically oriented: rotated copies are negatives.
    #[serde(rename = "NON_RAI")]
    NonRai,
}

impl Verdict {
    pub fn is_rai(self) -> bool {
        self == Verdict::Rai
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Rai => "RAI",
            Verdict::NonRai => "NON_RAI",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "RAI" => Ok(Verdict::Rai),
            "NON_RAI" => Ok(Verdict::NonRai),
            other => Err(CoreError::InvalidVerdict(other.to_string())),
        }
    }
}
