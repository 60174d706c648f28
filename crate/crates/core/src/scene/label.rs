use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const RECOGNIZED_PREFIXES: &[&str] = &["Person", "Object", "Animal", "AnimalGroup", "Place"];
const SUFFIXES: &[char] = &['X', 'Y', 'Z'];

/// Anonymized participant label such as `PersonX` or `AnimalGroupX`.
///
/// Any string is accepted; [`EntityLabel::shape`] tells whether it follows the
/// category-prefix plus `X`/`Y`/`Z` convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityLabel {
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelShape {
    Conforming,
    UnrecognizedPrefix,
    BadSuffix,
}

impl EntityLabel {
    pub fn new(raw: impl Into<String>) -> Self {
        Self { raw: raw.into() }
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    /// Category prefix and suffix letter, if the label ends in an uppercase
    /// letter preceded by something.
    pub fn split(&self) -> Option<(&str, char)> {
        let last = self.raw.chars().last()?;
        if !last.is_ascii_uppercase() || self.raw.len() < 2 {
            return None;
        }
        Some((&self.raw[..self.raw.len() - 1], last))
    }

    pub fn shape(&self) -> LabelShape {
        match self.split() {
            Some((_, suffix)) if !SUFFIXES.contains(&suffix) => LabelShape::BadSuffix,
            None => LabelShape::BadSuffix,
            Some((prefix, _)) if RECOGNIZED_PREFIXES.contains(&prefix) => LabelShape::Conforming,
            Some(_) => LabelShape::UnrecognizedPrefix,
        }
    }

    /// True if `token` looks like a label (`CamelCase` ending in a single
    /// capital), whether or not its prefix is recognized.
    pub fn is_label_like(token: &str) -> bool {
        label_regex()
            .find(token)
            .is_some_and(|m| m.start() == 0 && m.end() == token.len())
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl From<&str> for EntityLabel {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

fn label_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[A-Z][a-z]+(?:[A-Z][a-z]+)*[A-Z]\b").unwrap())
}

/// Label occurrences in free text, in order of first appearance, deduplicated.
pub fn find_label_refs(text: &str) -> Vec<EntityLabel> {
    let mut out: Vec<EntityLabel> = Vec::new();
    for m in label_regex().find_iter(text) {
        let label = EntityLabel::new(m.as_str());
        if !out.contains(&label) {
            out.push(label);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(EntityLabel::new("PersonX").shape(), LabelShape::Conforming);
        assert_eq!(EntityLabel::new("AnimalGroupX").shape(), LabelShape::Conforming);
        assert_eq!(EntityLabel::new("PlaceZ").shape(), LabelShape::Conforming);
        assert_eq!(EntityLabel::new("VehicleX").shape(), LabelShape::UnrecognizedPrefix);
        assert_eq!(EntityLabel::new("AnimalQ").shape(), LabelShape::BadSuffix);
        assert_eq!(EntityLabel::new("Person1").shape(), LabelShape::BadSuffix);
        assert_eq!(EntityLabel::new("X").shape(), LabelShape::BadSuffix);
    }

    #[test]
    fn refs_in_event_text() {
        let refs = find_label_refs("PersonX feeds AnimalGroupX while PersonX's friend waits");
        assert_eq!(refs, vec![EntityLabel::new("PersonX"), EntityLabel::new("AnimalGroupX")]);
        assert!(find_label_refs("It is consumed alone").is_empty());
        assert_eq!(find_label_refs("AnimalQ flies"), vec![EntityLabel::new("AnimalQ")]);
    }

    #[test]
    fn label_like_tokens() {
        assert!(EntityLabel::is_label_like("ObjectY"));
        assert!(!EntityLabel::is_label_like("she"));
        assert!(!EntityLabel::is_label_like("the man"));
        assert!(!EntityLabel::is_label_like("TV"));
    }
}
