use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three expression-profile components. Also the evaluation dimensions of
/// the preference study and the categories of the ATOMIC baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    EngagedEvents,
    GeneralizableProperties,
    EvokedEmotions,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [
        Dimension::EngagedEvents,
        Dimension::GeneralizableProperties,
        Dimension::EvokedEmotions,
    ];

    /// Lower-case label used when serializing a component for embedding.
    pub fn serial_label(self) -> &'static str {
        match self {
            Dimension::EngagedEvents => "engaged events",
            Dimension::GeneralizableProperties => "generalizable properties",
            Dimension::EvokedEmotions => "evoked emotions",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Dimension::EngagedEvents => "Engaged Events",
            Dimension::GeneralizableProperties => "Generalizable Properties",
            Dimension::EvokedEmotions => "Evoked Emotions",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Dimension::EngagedEvents => "engaged_events",
            Dimension::GeneralizableProperties => "generalizable_properties",
            Dimension::EvokedEmotions => "evoked_emotions",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.key() == s || d.serial_label() == s)
            .ok_or_else(|| format!("unknown dimension {s:?}"))
    }
}
