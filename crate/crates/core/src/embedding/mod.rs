//! Textual serialization of profile components, the six representation
//! conditions, and embedding providers.

mod provider;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use provider::{
    cosine, read_vectors, write_vectors, EmbeddingProvider, EmbeddingVector, HashBagEmbedder,
    HttpEmbedder, DEFAULT_EMBEDDING_MODEL, MOCK_DIM,
};

use crate::dimension::Dimension;
use crate::scene::{ExpressionProfile, UsageInstance};
use crate::transport::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("condition `{0}` needs an expression profile")]
    MissingProfile(ReprCondition),
    #[error("vector file: {0}")]
    Io(#[from] std::io::Error),
    #[error("vector file: {0}")]
    Format(String),
}

/// `<label>: a, b, c.`; an empty list becomes `<label>: none.`
pub fn serialize_component(dim: Dimension, items: &[String]) -> String {
    let body = if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    };
    format!("{}: {}.", dim.serial_label(), body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReprCondition {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "text+event")]
    TextEvent,
    #[serde(rename = "text+property")]
    TextProperty,
    #[serde(rename = "text+emotion")]
    TextEmotion,
    #[serde(rename = "text+scene")]
    TextScene,
    #[serde(rename = "scene")]
    SceneOnly,
}

impl ReprCondition {
    pub const ALL: [ReprCondition; 6] = [
        ReprCondition::Text,
        ReprCondition::TextEvent,
        ReprCondition::TextProperty,
        ReprCondition::TextEmotion,
        ReprCondition::TextScene,
        ReprCondition::SceneOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReprCondition::Text => "text",
            ReprCondition::TextEvent => "text+event",
            ReprCondition::TextProperty => "text+property",
            ReprCondition::TextEmotion => "text+emotion",
            ReprCondition::TextScene => "text+scene",
            ReprCondition::SceneOnly => "scene",
        }
    }

    /// Row label used in accuracy tables.
    pub fn title(self) -> &'static str {
        match self {
            ReprCondition::Text => "Text",
            ReprCondition::TextEvent => "Text+Event",
            ReprCondition::TextProperty => "Text+Property",
            ReprCondition::TextEmotion => "Text+Emotion",
            ReprCondition::TextScene => "Text+Scene",
            ReprCondition::SceneOnly => "Scene only",
        }
    }

    fn includes_text(self) -> bool {
        self != ReprCondition::SceneOnly
    }

    fn components(self) -> &'static [Dimension] {
        match self {
            ReprCondition::Text => &[],
            ReprCondition::TextEvent => &[Dimension::EngagedEvents],
            ReprCondition::TextProperty => &[Dimension::GeneralizableProperties],
            ReprCondition::TextEmotion => &[Dimension::EvokedEmotions],
            ReprCondition::TextScene | ReprCondition::SceneOnly => &Dimension::ALL,
        }
    }
}

impl fmt::Display for ReprCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReprCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase();
        ReprCondition::ALL
            .into_iter()
            .find(|c| c.name() == s || c.title().to_lowercase() == s)
            .or(match s.as_str() {
                "scene-only" | "scene_only" | "sceneonly" => Some(ReprCondition::SceneOnly),
                _ => None,
            })
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// Items of one component as they are serialized. Emotions contribute their
/// lowercased labels only.
pub fn component_items(profile: &ExpressionProfile, dim: Dimension) -> Vec<String> {
    match dim {
        Dimension::EngagedEvents => profile.engaged_events.clone(),
        Dimension::GeneralizableProperties => profile.generalizable_properties.clone(),
        Dimension::EvokedEmotions => profile
            .emotion_labels()
            .into_iter()
            .map(|e| e.to_lowercase())
            .collect(),
    }
}

pub fn build_condition_text(
    cond: ReprCondition,
    instance: &UsageInstance,
    profile: Option<&ExpressionProfile>,
) -> Result<String, EmbeddingError> {
    build_condition_text_with(cond, instance, profile, &mut serialize_component)
}

/// As [`build_condition_text`] with a caller-supplied serializer.
pub fn build_condition_text_with(
    cond: ReprCondition,
    instance: &UsageInstance,
    profile: Option<&ExpressionProfile>,
    serializer: &mut dyn FnMut(Dimension, &[String]) -> String,
) -> Result<String, EmbeddingError> {
    if cond == ReprCondition::Text {
        return Ok(instance.context_text.clone());
    }
    let profile = profile.ok_or(EmbeddingError::MissingProfile(cond))?;
    let mut parts = Vec::with_capacity(4);
    if cond.includes_text() {
        parts.push(instance.context_text.clone());
    }
    for &dim in cond.components() {
        parts.push(serializer(dim, &component_items(profile, dim)));
    }
    Ok(parts.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialize_examples() {
        let items = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(
            serialize_component(
                Dimension::EvokedEmotions,
                &items(&["loneliness", "resignation", "introspection"])
            ),
            "evoked emotions: loneliness, resignation, introspection."
        );
        assert_eq!(
            serialize_component(Dimension::EvokedEmotions, &[]),
            "evoked emotions: none."
        );
        assert_eq!(
            serialize_component(Dimension::EngagedEvents, &items(&["PersonX drinks it"])),
            "engaged events: PersonX drinks it."
        );
    }

    #[test]
    fn condition_names_round_trip() {
        for c in ReprCondition::ALL {
            assert_eq!(c.name().parse::<ReprCondition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("all".parse::<ReprCondition>().is_err());
    }
}
