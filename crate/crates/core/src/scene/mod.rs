//! Scene schema: usage instances, contextual scenes, expression profiles.
//!
//! A [`SceneRepresentation`] pairs a [`ContextualScene`] (what is happening in
//! the whole context) with an [`ExpressionProfile`] (what the target expression
//! does, bears and evokes inside that scene). Raw model completions are turned
//! into these types by [`parse_scene`]; [`validate_scene`] checks the schema
//! invariants and reports noisy-but-usable output as warnings.

mod label;
mod parse;
mod validate;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use label::{find_label_refs, EntityLabel, LabelShape, RECOGNIZED_PREFIXES};
pub use parse::{parse_scene, parse_scene_with_warnings, ParseError};
pub use validate::{validate_scene, Issue, ValidationReport};

/// Literal used by the model for setting fields it cannot infer.
pub const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    CocaScenes,
    Dwug,
    #[default]
    Other,
}

/// A context `u` together with the target expression `x` occurring in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageInstance {
    pub instance_id: String,
    pub context_text: String,
    pub target_expression: String,
    /// Character (not byte) offsets `[start, end)` into `context_text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_span: Option<(usize, usize)>,
    pub keyword_lemma: String,
    #[serde(default)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_scene_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("instance {0}: context text is empty")]
    EmptyContext(String),
    #[error("instance {0}: target expression is empty")]
    EmptyTarget(String),
    #[error("instance {id}: span {start}..{end} selects {found:?}, expected {expected:?}")]
    SpanMismatch {
        id: String,
        start: usize,
        end: usize,
        found: String,
        expected: String,
    },
    #[error("instance {id}: target {target:?} does not occur in context")]
    TargetNotFound { id: String, target: String },
}

impl UsageInstance {
    /// Builds an instance and checks its invariants.
    pub fn new(
        instance_id: impl Into<String>,
        context_text: impl Into<String>,
        target_expression: impl Into<String>,
        target_span: Option<(usize, usize)>,
        keyword_lemma: impl Into<String>,
        source: Source,
    ) -> Result<Self, InstanceError> {
        let instance = Self {
            instance_id: instance_id.into(),
            context_text: context_text.into(),
            target_expression: target_expression.into(),
            target_span,
            keyword_lemma: keyword_lemma.into(),
            source,
            gold_scene_type: None,
        };
        instance.check()?;
        Ok(instance)
    }

    /// Builds an instance for `lemma`, locating its first case-insensitive
    /// occurrence in `context_text` and using the matched surface form.
    pub fn locate(
        instance_id: impl Into<String>,
        context_text: impl Into<String>,
        lemma: &str,
        source: Source,
    ) -> Result<Self, InstanceError> {
        let id = instance_id.into();
        let context: String = context_text.into();
        let Some((start, end)) = find_case_insensitive(&context, lemma) else {
            return Err(InstanceError::TargetNotFound {
                id,
                target: lemma.to_string(),
            });
        };
        // Take in a short inflectional tail (crow → crows, raccoon → raccoons).
        let tail = context
            .chars()
            .skip(end)
            .take_while(|c| c.is_alphabetic())
            .count();
        let end = if tail <= 3 { end + tail } else { end };
        let surface = char_slice(&context, start, end).unwrap_or_default();
        Self::new(id, context, surface, Some((start, end)), lemma, source)
    }

    pub fn with_gold_scene_type(mut self, scene_type: impl Into<String>) -> Self {
        self.gold_scene_type = Some(scene_type.into());
        self
    }

    pub fn check(&self) -> Result<(), InstanceError> {
        if self.context_text.trim().is_empty() {
            return Err(InstanceError::EmptyContext(self.instance_id.clone()));
        }
        if self.target_expression.trim().is_empty() {
            return Err(InstanceError::EmptyTarget(self.instance_id.clone()));
        }
        match self.target_span {
            Some((start, end)) => {
                let found = char_slice(&self.context_text, start, end).unwrap_or_default();
                if found != self.target_expression {
                    return Err(InstanceError::SpanMismatch {
                        id: self.instance_id.clone(),
                        start,
                        end,
                        found,
                        expected: self.target_expression.clone(),
                    });
                }
            }
            None => {
                if find_case_insensitive(&self.context_text, &self.target_expression).is_none() {
                    return Err(InstanceError::TargetNotFound {
                        id: self.instance_id.clone(),
                        target: self.target_expression.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Character span of the target, falling back to the first
    /// case-insensitive match when no explicit span was given.
    pub fn resolved_span(&self) -> Option<(usize, usize)> {
        self.target_span
            .or_else(|| find_case_insensitive(&self.context_text, &self.target_expression))
    }

    /// Context text with the target wrapped in `open`/`close` markers.
    pub fn highlighted(&self, open: &str, close: &str) -> String {
        let Some((start, end)) = self.resolved_span() else {
            return self.context_text.clone();
        };
        let mut out = String::with_capacity(self.context_text.len() + open.len() + close.len());
        for (i, c) in self.context_text.chars().enumerate() {
            if i == start {
                out.push_str(open);
            }
            if i == end {
                out.push_str(close);
            }
            out.push(c);
        }
        if end == self.context_text.chars().count() {
            out.push_str(close);
        }
        out
    }
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<String> {
    if start > end {
        return None;
    }
    let count = text.chars().count();
    if end > count {
        return None;
    }
    Some(text.chars().skip(start).take(end - start).collect())
}

/// First case-insensitive occurrence of `needle`, as character offsets.
pub fn find_case_insensitive(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    let hay: Vec<char> = haystack.chars().collect();
    let pat: Vec<char> = needle.chars().collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return None;
    }
    let eq = |a: char, b: char| a == b || a.to_lowercase().eq(b.to_lowercase());
    (0..=hay.len() - pat.len())
        .find(|&i| pat.iter().enumerate().all(|(j, &p)| eq(hay[i + j], p)))
        .map(|i| (i, i + pat.len()))
}

/// An abstracted event such as `PersonX drinks ObjectZ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneEvent {
    pub text: String,
    pub referenced_labels: Vec<EntityLabel>,
}

impl SceneEvent {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let referenced_labels = find_label_refs(&text);
        Self {
            text,
            referenced_labels,
        }
    }
}

impl Serialize for SceneEvent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for SceneEvent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(SceneEvent::new)
    }
}

/// A role the entity plays, optionally with the frame it belongs to,
/// e.g. `Agent (Feeding)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

impl Role {
    /// Parses `role (Frame)` or a bare `role`.
    pub fn parse(text: &str) -> Self {
        let (name, frame) = split_parenthetical(text);
        Self { name, frame }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.frame {
            Some(frame) => write!(f, "{} ({})", self.name, frame),
            None => f.write_str(&self.name),
        }
    }
}

/// An emotion label with its optional explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emotion {
    pub emotion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl Emotion {
    pub fn new(emotion: impl Into<String>) -> Self {
        Self {
            emotion: emotion.into(),
            explanation: None,
        }
    }

    pub fn explained(emotion: impl Into<String>, explanation: impl Into<String>) -> Self {
        Self {
            emotion: emotion.into(),
            explanation: Some(explanation.into()),
        }
    }

    /// Parses `Nostalgia (tied to memories)` or a bare label.
    pub fn parse(text: &str) -> Self {
        let (emotion, explanation) = split_parenthetical(text);
        Self {
            emotion,
            explanation,
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.explanation {
            Some(why) => write!(f, "{} ({})", self.emotion, why),
            None => f.write_str(&self.emotion),
        }
    }
}

/// Splits a trailing parenthetical off `text`: `"Agent (Feeding)"` yields
/// `("Agent", Some("Feeding"))`.
fn split_parenthetical(text: &str) -> (String, Option<String>) {
    let text = text.trim();
    if text.ends_with(')') {
        if let Some(open) = matching_open_paren(text) {
            let head = text[..open].trim();
            let inner = text[open + 1..text.len() - 1].trim();
            if !head.is_empty() && !inner.is_empty() {
                return (head.to_string(), Some(inner.to_string()));
            }
        }
    }
    (text.to_string(), None)
}

fn matching_open_paren(text: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEntity {
    pub label: EntityLabel,
    pub surface_mention: String,
    #[serde(default)]
    pub roles: Vec<Role>,
    #[serde(default)]
    pub properties: Vec<String>,
    #[serde(default)]
    pub emotions: Vec<Emotion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub place: String,
    pub time: String,
    pub atmosphere: String,
}

impl Setting {
    pub fn unspecified() -> Self {
        Self {
            place: UNSPECIFIED.into(),
            time: UNSPECIFIED.into(),
            atmosphere: UNSPECIFIED.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextualScene {
    pub events: Vec<SceneEvent>,
    pub entities: Vec<SceneEntity>,
    pub setting: Setting,
}

impl ContextualScene {
    pub fn entity(&self, label: &EntityLabel) -> Option<&SceneEntity> {
        self.entities.iter().find(|e| &e.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionProfile {
    pub keyword: String,
    pub assigned_label: Option<EntityLabel>,
    pub engaged_events: Vec<String>,
    pub generalizable_properties: Vec<String>,
    /// Empty when the model reported no evoked emotion ("None").
    pub evoked_emotions: Vec<Emotion>,
}

impl ExpressionProfile {
    pub fn emotion_labels(&self) -> Vec<String> {
        self.evoked_emotions
            .iter()
            .map(|e| e.emotion.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub prompt_hash: String,
    pub created_at: DateTime<Utc>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            prompt_hash: String::new(),
            created_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

/// `S(u, x)`: the contextual scene and the expression profile for one usage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneRepresentation {
    pub instance_ref: String,
    pub contextual_scene: ContextualScene,
    pub expression_profile: ExpressionProfile,
    pub provenance: Provenance,
}

/// Flat on-disk layout of a scene document.
#[derive(Serialize, Deserialize)]
struct SceneDocument {
    instance_ref: String,
    events: Vec<SceneEvent>,
    entities: Vec<SceneEntity>,
    setting: Setting,
    keyword: String,
    assigned_label: Option<EntityLabel>,
    engaged_events: Vec<String>,
    generalizable_properties: Vec<String>,
    evoked_emotions: Vec<Emotion>,
    provenance: Provenance,
}

impl SceneRepresentation {
    /// Canonical pretty-printed document; [`parse_scene`] reads it back.
    pub fn render(&self) -> String {
        let doc = SceneDocument {
            instance_ref: self.instance_ref.clone(),
            events: self.contextual_scene.events.clone(),
            entities: self.contextual_scene.entities.clone(),
            setting: self.contextual_scene.setting.clone(),
            keyword: self.expression_profile.keyword.clone(),
            assigned_label: self.expression_profile.assigned_label.clone(),
            engaged_events: self.expression_profile.engaged_events.clone(),
            generalizable_properties: self.expression_profile.generalizable_properties.clone(),
            evoked_emotions: self.expression_profile.evoked_emotions.clone(),
            provenance: self.provenance.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("scene document serializes");
        out.push('\n');
        out
    }

    /// Reads a document written by [`SceneRepresentation::render`].
    pub fn from_document(text: &str) -> Result<Self, serde_json::Error> {
        let doc: SceneDocument = serde_json::from_str(text)?;
        Ok(Self {
            instance_ref: doc.instance_ref,
            contextual_scene: ContextualScene {
                events: doc.events,
                entities: doc.entities,
                setting: doc.setting,
            },
            expression_profile: ExpressionProfile {
                keyword: doc.keyword,
                assigned_label: doc.assigned_label,
                engaged_events: doc.engaged_events,
                generalizable_properties: doc.generalizable_properties,
                evoked_emotions: doc.evoked_emotions,
            },
            provenance: doc.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_uses_surface_form() {
        let u = UsageInstance::locate(
            "r-e",
            "Raccoons pried open the doors and tore into the boxes.",
            "raccoon",
            Source::CocaScenes,
        )
        .unwrap();
        assert_eq!(u.target_expression, "Raccoons");
        assert_eq!(u.target_span, Some((0, 8)));
        let long = UsageInstance::locate("f", "the fireplace glowed", "fire", Source::Other).unwrap();
        assert_eq!(long.target_expression, "fire");
    }

    #[test]
    fn span_must_select_target() {
        let err = UsageInstance::new("x", "a cup of tea", "tea", Some((0, 3)), "tea", Source::Other);
        assert!(matches!(err, Err(InstanceError::SpanMismatch { .. })));
        assert!(UsageInstance::new("x", "a cup of tea", "tea", Some((9, 12)), "tea", Source::Other).is_ok());
    }

    #[test]
    fn target_must_occur_without_span() {
        let err = UsageInstance::new("x", "a cup of tea", "coffee", None, "coffee", Source::Other);
        assert!(matches!(err, Err(InstanceError::TargetNotFound { .. })));
        assert!(UsageInstance::new("x", "A cup of TEA", "tea", None, "tea", Source::Other).is_ok());
    }

    #[test]
    fn empty_fields_rejected() {
        assert!(matches!(
            UsageInstance::new("x", " ", "tea", None, "tea", Source::Other),
            Err(InstanceError::EmptyContext(_))
        ));
        assert!(matches!(
            UsageInstance::new("x", "tea", "", None, "tea", Source::Other),
            Err(InstanceError::EmptyTarget(_))
        ));
    }

    #[test]
    fn highlight_wraps_target() {
        let u = UsageInstance::locate("x", "feeding the crows", "crow", Source::Other).unwrap();
        assert_eq!(u.highlighted("**", "**"), "feeding the **crows**");
        let end = UsageInstance::locate("y", "she drank tea", "tea", Source::Other).unwrap();
        assert_eq!(end.highlighted("**", "**"), "she drank **tea**");
    }

    #[test]
    fn role_and_emotion_parenthetical() {
        assert_eq!(
            Role::parse("Agent (Feeding)"),
            Role {
                name: "Agent".into(),
                frame: Some("Feeding".into())
            }
        );
        assert_eq!(Role::parse("Worker").frame, None);
        let e = Emotion::parse("Nostalgia (tied to memories (of past) routines)");
        assert_eq!(e.emotion, "Nostalgia");
        assert_eq!(e.explanation.as_deref(), Some("tied to memories (of past) routines"));
        assert_eq!(e.to_string(), "Nostalgia (tied to memories (of past) routines)");
    }
}
