//! ATOMIC-2020 baseline profile: 22 if-then relations consolidated into the
//! three expression-profile dimensions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dimension::Dimension;
use crate::scene::ParseError;
use crate::text::{clean_item, clean_line, norm_key, split_key, strip_code_fence, strip_parenthetical};

pub(crate) const ATOMIC_HEADER: &str =
    "Given a sentence and a target keyword, describe the keyword in the situation using the following ATOMIC-2020 commonsense relations.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomicRelation {
    Causes,
    HinderedBy,
    XReason,
    HasSubEvent,
    IsBefore,
    IsAfter,
    XIntent,
    XNeed,
    XEffect,
    OEffect,
    ObjectUse,
    HasProperty,
    MadeUpOf,
    AtLocation,
    CapableOf,
    Desires,
    NotDesires,
    XReact,
    OReact,
    XWant,
    OWant,
    XAttr,
}

use AtomicRelation::*;

impl AtomicRelation {
    pub const ALL: [AtomicRelation; 22] = [
        Causes, HinderedBy, XReason, HasSubEvent, IsBefore, IsAfter, XIntent, XNeed, XEffect,
        OEffect, ObjectUse, HasProperty, MadeUpOf, AtLocation, CapableOf, Desires, NotDesires,
        XReact, OReact, XWant, OWant, XAttr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Causes => "Causes",
            HinderedBy => "HinderedBy",
            XReason => "xReason",
            HasSubEvent => "HasSubEvent",
            IsBefore => "isBefore",
            IsAfter => "isAfter",
            XIntent => "xIntent",
            XNeed => "xNeed",
            XEffect => "xEffect",
            OEffect => "oEffect",
            ObjectUse => "ObjectUse",
            HasProperty => "HasProperty",
            MadeUpOf => "MadeUpOf",
            AtLocation => "AtLocation",
            CapableOf => "CapableOf",
            Desires => "Desires",
            NotDesires => "NotDesires",
            XReact => "xReact",
            OReact => "oReact",
            XWant => "xWant",
            OWant => "oWant",
            XAttr => "xAttr",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Causes => "What the event causes",
            HinderedBy => "What prevents the event",
            XReason => "Why PersonX acts",
            HasSubEvent => "Steps making up the event",
            IsBefore => "What usually happens before",
            IsAfter => "What usually happens after",
            XIntent => "What PersonX intends",
            XNeed => "What PersonX needs beforehand",
            XEffect => "What happens to PersonX",
            OEffect => "What happens to others",
            ObjectUse => "What the keyword is used for",
            HasProperty => "Attribute or quality",
            MadeUpOf => "Material or components",
            AtLocation => "Where typically found",
            CapableOf => "What the keyword can do",
            Desires => "What it wants (if animate)",
            NotDesires => "What it avoids (if animate)",
            XReact => "How PersonX feels afterward",
            OReact => "How others feel",
            XWant => "What PersonX wants next",
            OWant => "What others want",
            XAttr => "How PersonX is perceived",
        }
    }

    pub fn category(self) -> Dimension {
        match self {
            Causes | HinderedBy | XReason | HasSubEvent | IsBefore | IsAfter | XIntent | XNeed
            | XEffect | OEffect => Dimension::EngagedEvents,
            ObjectUse | HasProperty | MadeUpOf | AtLocation | CapableOf | Desires | NotDesires => {
                Dimension::GeneralizableProperties
            }
            XReact | OReact | XWant | OWant | XAttr => Dimension::EvokedEmotions,
        }
    }

    /// Case- and punctuation-insensitive name lookup (`Hindered By` → HinderedBy).
    pub fn from_loose(key: &str) -> Option<Self> {
        let squash = |s: &str| -> String {
            s.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect()
        };
        let wanted = squash(&strip_parenthetical(key));
        Self::ALL.into_iter().find(|r| squash(r.name()) == wanted)
    }
}

impl fmt::Display for AtomicRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for AtomicRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for AtomicRelation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AtomicRelation::from_loose(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown ATOMIC relation {s:?}")))
    }
}

/// Relation answers per dimension. Every relation of a dimension has an
/// entry; `None` marks it inapplicable (or not produced by the model).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicProfile {
    pub engaged_events: BTreeMap<AtomicRelation, Option<String>>,
    pub generalizable_properties: BTreeMap<AtomicRelation, Option<String>>,
    pub evoked_emotions: BTreeMap<AtomicRelation, Option<String>>,
}

impl AtomicProfile {
    pub fn from_answers(mut answers: BTreeMap<AtomicRelation, Option<String>>) -> Self {
        let mut part = |dim: Dimension| -> BTreeMap<AtomicRelation, Option<String>> {
            AtomicRelation::ALL
                .into_iter()
                .filter(|r| r.category() == dim)
                .map(|r| (r, answers.remove(&r).flatten()))
                .collect()
        };
        Self {
            engaged_events: part(Dimension::EngagedEvents),
            generalizable_properties: part(Dimension::GeneralizableProperties),
            evoked_emotions: part(Dimension::EvokedEmotions),
        }
    }

    pub fn dimension(&self, dim: Dimension) -> &BTreeMap<AtomicRelation, Option<String>> {
        match dim {
            Dimension::EngagedEvents => &self.engaged_events,
            Dimension::GeneralizableProperties => &self.generalizable_properties,
            Dimension::EvokedEmotions => &self.evoked_emotions,
        }
    }

    pub fn get(&self, relation: AtomicRelation) -> Option<&str> {
        self.dimension(relation.category())
            .get(&relation)
            .and_then(|v| v.as_deref())
    }

    pub fn is_inapplicable(&self, relation: AtomicRelation) -> bool {
        self.get(relation).is_none()
    }

    /// `Relation: answer` lines for the applicable relations of `dim`.
    pub fn render_fragment(&self, dim: Dimension) -> String {
        self.dimension(dim)
            .iter()
            .filter_map(|(rel, v)| v.as_ref().map(|v| format!("{}: {}", rel.name(), v)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn answer(text: &str) -> Option<String> {
    let v = clean_item(text);
    match norm_key(&v).as_str() {
        "" | "n_a" | "na" | "none" | "not_applicable" | "inapplicable" => None,
        _ => Some(v),
    }
}

/// Parses a baseline completion (`Relation: answer` lines or JSON).
pub fn parse_atomic(raw: &str) -> Result<(AtomicProfile, Vec<String>), ParseError> {
    let (body, base) = strip_code_fence(raw);
    let mut answers: BTreeMap<AtomicRelation, Option<String>> = BTreeMap::new();
    let mut warnings = Vec::new();

    if body.trim_start().starts_with('{') {
        let value: Value = serde_json::from_str(body).map_err(|e| ParseError::Malformed {
            offset: base,
            reason: e.to_string(),
        })?;
        collect_json(&value, &mut answers, &mut warnings);
    } else {
        let headers: Vec<String> = Dimension::ALL.iter().map(|d| d.key().to_string()).collect();
        for line in body.lines() {
            let line = clean_line(line);
            if line.is_empty() {
                continue;
            }
            match split_key(&line) {
                Some((key, rest)) => match AtomicRelation::from_loose(key) {
                    Some(rel) => {
                        answers.insert(rel, answer(rest));
                    }
                    None if headers.contains(&norm_key(key)) => {}
                    None => warnings.push(format!("unrecognized line ignored: {line:?}")),
                },
                None if headers.contains(&norm_key(&line)) => {}
                None => warnings.push(format!("unrecognized line ignored: {line:?}")),
            }
        }
    }

    if answers.is_empty() {
        return Err(ParseError::Malformed {
            offset: base + (body.len() - body.trim_start().len()),
            reason: "no ATOMIC relations found".into(),
        });
    }
    for dim in Dimension::ALL {
        if !answers.keys().any(|r| r.category() == dim) {
            return Err(ParseError::MissingSection { section: dim.key() });
        }
    }
    Ok((AtomicProfile::from_answers(answers), warnings))
}

fn collect_json(
    value: &Value,
    answers: &mut BTreeMap<AtomicRelation, Option<String>>,
    warnings: &mut Vec<String>,
) {
    let Value::Object(map) = value else { return };
    for (key, v) in map {
        match (AtomicRelation::from_loose(key), v) {
            (Some(rel), Value::String(s)) => {
                answers.insert(rel, answer(s));
            }
            (Some(rel), Value::Array(items)) => {
                let joined = items
                    .iter()
                    .filter_map(|i| i.as_str().map(str::trim))
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(", ");
                answers.insert(rel, answer(&joined));
            }
            (Some(rel), Value::Null) => {
                answers.insert(rel, None);
            }
            (_, Value::Object(_)) => collect_json(v, answers, warnings),
            (_, other) => warnings.push(format!("field `{key}` = {other} ignored")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_ten_seven_five() {
        let count = |d| AtomicRelation::ALL.iter().filter(|r| r.category() == d).count();
        assert_eq!(count(Dimension::EngagedEvents), 10);
        assert_eq!(count(Dimension::GeneralizableProperties), 7);
        assert_eq!(count(Dimension::EvokedEmotions), 5);
    }

    #[test]
    fn loose_names() {
        assert_eq!(AtomicRelation::from_loose("Hindered By"), Some(HinderedBy));
        assert_eq!(AtomicRelation::from_loose("xintent"), Some(XIntent));
        assert_eq!(AtomicRelation::from_loose("Causes (What the event causes)"), Some(Causes));
        assert_eq!(AtomicRelation::from_loose("Feels"), None);
    }

    #[test]
    fn json_form_and_na() {
        let raw = r#"{"engaged_events": {"Causes": "a spill", "xIntent": "N/A"},
                      "generalizable_properties": {"HasProperty": ["red", "round"], "Desires": null},
                      "evoked_emotions": {"xReact": "calm"}}"#;
        let (p, _) = parse_atomic(raw).unwrap();
        assert_eq!(p.get(Causes), Some("a spill"));
        assert!(p.is_inapplicable(XIntent));
        assert!(p.is_inapplicable(Desires));
        assert_eq!(p.get(HasProperty), Some("red, round"));
        assert_eq!(p.generalizable_properties.len(), 7);
    }

    #[test]
    fn missing_category_named() {
        let err = parse_atomic("Causes: x\nxReact: y\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::MissingSection {
                section: "generalizable_properties"
            }
        );
        assert!(matches!(parse_atomic("no idea"), Err(ParseError::Malformed { .. })));
    }

    #[test]
    fn relation_round_trips_through_json() {
        let (p, _) = parse_atomic("Causes: x\nObjectUse: y\nxWant: z\n").unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"xWant\":\"z\""));
        let back: AtomicProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
