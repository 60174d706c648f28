use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{find_label_refs, EntityLabel, LabelShape, SceneRepresentation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    NoEvents,
    NoEntities,
    EmptyEvent { index: usize },
    DuplicateLabel { label: String },
    EmptySurfaceMention { label: String },
    EmptySettingField { field: &'static str },
    NoEngagedEvents,
    NoGeneralizableProperties,
    EmptyItem { field: &'static str, index: usize },
    AssignedLabelUnresolved { label: String },
    // warnings
    UnresolvedLabel { label: String, location: String },
    UnrecognizedPrefix { label: String },
    BadSuffix { label: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NoEvents => f.write_str("events: at least one event is required"),
            Issue::NoEntities => f.write_str("entities: at least one entity is required"),
            Issue::EmptyEvent { index } => write!(f, "events[{index}]: empty event text"),
            Issue::DuplicateLabel { label } => write!(f, "entities: duplicate label {label}"),
            Issue::EmptySurfaceMention { label } => {
                write!(f, "entities: {label} has no surface mention")
            }
            Issue::EmptySettingField { field } => {
                write!(f, "setting: {field} is empty (use \"unspecified\")")
            }
            Issue::NoEngagedEvents => f.write_str("engaged_events: at least one entry is required"),
            Issue::NoGeneralizableProperties => {
                f.write_str("generalizable_properties: at least one entry is required")
            }
            Issue::EmptyItem { field, index } => write!(f, "{field}[{index}]: empty entry"),
            Issue::AssignedLabelUnresolved { label } => {
                write!(f, "expression profile: assigned label {label} is not a scene entity")
            }
            Issue::UnresolvedLabel { label, location } => {
                write!(f, "{location}: label {label} does not match any entity")
            }
            Issue::UnrecognizedPrefix { label } => {
                write!(f, "label {label}: unrecognized category prefix")
            }
            Issue::BadSuffix { label } => write!(f, "label {label}: suffix must be X, Y or Z"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    /// One line per error, for repair prompts and logs.
    pub fn error_summary(&self) -> String {
        self.errors
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks the schema invariants of a parsed scene. Never fails: violations of
/// hard invariants land in `errors`, noisy-but-usable output in `warnings`.
pub fn validate_scene(scene: &SceneRepresentation) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cs = &scene.contextual_scene;
    let ep = &scene.expression_profile;

    if cs.events.is_empty() {
        report.errors.push(Issue::NoEvents);
    }
    for (index, event) in cs.events.iter().enumerate() {
        if event.text.trim().is_empty() {
            report.errors.push(Issue::EmptyEvent { index });
        }
    }

    if cs.entities.is_empty() {
        report.errors.push(Issue::NoEntities);
    }
    let mut seen = BTreeSet::new();
    for entity in &cs.entities {
        if !seen.insert(&entity.label) {
            report.errors.push(Issue::DuplicateLabel {
                label: entity.label.raw.clone(),
            });
        }
        if entity.surface_mention.trim().is_empty() {
            report.errors.push(Issue::EmptySurfaceMention {
                label: entity.label.raw.clone(),
            });
        }
    }

    let setting = &cs.setting;
    for (field, value) in [
        ("place", &setting.place),
        ("time", &setting.time),
        ("atmosphere", &setting.atmosphere),
    ] {
        if value.trim().is_empty() {
            report.errors.push(Issue::EmptySettingField { field });
        }
    }

    if ep.engaged_events.is_empty() {
        report.errors.push(Issue::NoEngagedEvents);
    }
    if ep.generalizable_properties.is_empty() {
        report.errors.push(Issue::NoGeneralizableProperties);
    }
    let lists: [(&'static str, Vec<&str>); 3] = [
        ("engaged_events", ep.engaged_events.iter().map(String::as_str).collect()),
        (
            "generalizable_properties",
            ep.generalizable_properties.iter().map(String::as_str).collect(),
        ),
        (
            "evoked_emotions",
            ep.evoked_emotions.iter().map(|e| e.emotion.as_str()).collect(),
        ),
    ];
    for (field, items) in lists {
        for (index, item) in items.iter().enumerate() {
            if item.trim().is_empty() {
                report.errors.push(Issue::EmptyItem { field, index });
            }
        }
    }

    if let Some(label) = &ep.assigned_label {
        if cs.entity(label).is_none() {
            report.errors.push(Issue::AssignedLabelUnresolved {
                label: label.raw.clone(),
            });
        }
    }

    // Warnings: unresolved references and non-conforming label shapes.
    let mut shaped: BTreeSet<EntityLabel> = BTreeSet::new();
    let mut check_shape = |label: &EntityLabel, report: &mut ValidationReport| {
        if !shaped.insert(label.clone()) {
            return;
        }
        match label.shape() {
            LabelShape::Conforming => {}
            LabelShape::UnrecognizedPrefix => report.warnings.push(Issue::UnrecognizedPrefix {
                label: label.raw.clone(),
            }),
            LabelShape::BadSuffix => report.warnings.push(Issue::BadSuffix {
                label: label.raw.clone(),
            }),
        }
    };
    for entity in &cs.entities {
        check_shape(&entity.label, &mut report);
    }
    if let Some(label) = &ep.assigned_label {
        check_shape(label, &mut report);
    }
    for (i, event) in cs.events.iter().enumerate() {
        for label in &event.referenced_labels {
            check_shape(label, &mut report);
            if cs.entity(label).is_none() {
                report.warnings.push(Issue::UnresolvedLabel {
                    label: label.raw.clone(),
                    location: format!("events[{i}]"),
                });
            }
        }
    }
    for (i, text) in ep.engaged_events.iter().enumerate() {
        for label in find_label_refs(text) {
            check_shape(&label, &mut report);
            if cs.entity(&label).is_none() {
                report.warnings.push(Issue::UnresolvedLabel {
                    label: label.raw,
                    location: format!("engaged_events[{i}]"),
                });
            }
        }
    }

    report
}
