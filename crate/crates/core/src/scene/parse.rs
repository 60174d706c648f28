//! Completion text → [`SceneRepresentation`].
//!
//! Two surface forms are accepted: a JSON document (flat, or with nested
//! `contextual_scene` / `expression_profile` objects) and the bullet list the
//! scene instruction asks for. Both lead to the same typed scene.

use serde_json::{Map, Value};

use crate::text::{
    clean_item, clean_line, norm_key, split_key, split_outside_parens, strip_code_fence,
    strip_parenthetical,
};

use super::{
    ContextualScene, Emotion, EntityLabel, ExpressionProfile, Provenance, Role, SceneEntity,
    SceneEvent, SceneRepresentation, Setting, UsageInstance,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("missing required section `{section}`")]
    MissingSection { section: &'static str },
    #[error("malformed output at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
}

impl ParseError {
    fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        ParseError::Malformed {
            offset,
            reason: reason.into(),
        }
    }
}

/// Parses a raw completion into a scene for `instance`.
pub fn parse_scene(raw: &str, instance: &UsageInstance) -> Result<SceneRepresentation, ParseError> {
    parse_scene_with_warnings(raw, instance).map(|(scene, _)| scene)
}

/// Like [`parse_scene`], also returning non-fatal notes (ignored fields,
/// stray lines).
pub fn parse_scene_with_warnings(
    raw: &str,
    instance: &UsageInstance,
) -> Result<(SceneRepresentation, Vec<String>), ParseError> {
    let (body, body_offset) = strip_code_fence(raw);
    let trimmed_start = body.len() - body.trim_start().len();
    if body.trim_start().starts_with('{') {
        return parse_json(body, body_offset, instance);
    }
    match parse_bullets(body, body_offset, instance) {
        Err(ParseError::Malformed { offset, reason }) if offset == body_offset + trimmed_start => {
            // No headers at all; the JSON may be embedded in prose.
            match (body.find('{'), body.rfind('}')) {
                (Some(start), Some(end)) if end > start => {
                    parse_json(&body[start..=end], body_offset + start, instance)
                }
                _ => Err(ParseError::Malformed { offset, reason }),
            }
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// JSON form

fn parse_json(
    text: &str,
    offset: usize,
    instance: &UsageInstance,
) -> Result<(SceneRepresentation, Vec<String>), ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        ParseError::malformed(offset + byte_offset(text, e.line(), e.column()), e.to_string())
    })?;
    let Value::Object(root) = value else {
        return Err(ParseError::malformed(offset, "top-level JSON value is not an object"));
    };

    let mut warnings = Vec::new();
    let mut ctx: Map<String, Value> = Map::new();
    let mut prof: Map<String, Value> = Map::new();
    let mut provenance = None;

    for (key, value) in root {
        match norm_key(&key).as_str() {
            "contextual_scene" | "scene" | "context" => match value {
                Value::Object(inner) => {
                    for (k, v) in inner {
                        ctx.insert(norm_key(&k), v);
                    }
                }
                _ => warnings.push(format!("field `{key}` is not an object; ignored")),
            },
            "expression_profile" | "profile" => match value {
                Value::Object(inner) => {
                    for (k, v) in inner {
                        let k = match norm_key(&k).as_str() {
                            "events" => "engaged_events".to_string(),
                            "properties" => "generalizable_properties".to_string(),
                            "emotions" => "evoked_emotions".to_string(),
                            other => other.to_string(),
                        };
                        prof.insert(k, v);
                    }
                }
                Value::String(s) => {
                    prof.insert("keyword".into(), Value::String(s));
                }
                _ => warnings.push(format!("field `{key}` is not an object; ignored")),
            },
            "events" | "entities" | "setting" => {
                ctx.insert(norm_key(&key), value);
            }
            k @ ("engaged_events" | "generalizable_properties" | "evoked_emotions" | "keyword"
            | "assigned_label") => {
                prof.insert(k.to_string(), value);
            }
            "provenance" => match serde_json::from_value::<Provenance>(value) {
                Ok(p) => provenance = Some(p),
                Err(e) => warnings.push(format!("provenance ignored: {e}")),
            },
            "instance_ref" | "instance_id" => {
                if value.as_str() != Some(instance.instance_id.as_str()) {
                    warnings.push(format!(
                        "document instance_ref {value} differs from {}",
                        instance.instance_id
                    ));
                }
            }
            _ => warnings.push(format!("unknown field `{key}` ignored")),
        }
    }

    let events = ctx
        .remove("events")
        .ok_or(ParseError::MissingSection { section: "events" })?;
    let entities = ctx
        .remove("entities")
        .ok_or(ParseError::MissingSection { section: "entities" })?;
    let setting = ctx
        .remove("setting")
        .ok_or(ParseError::MissingSection { section: "setting" })?;
    for k in ctx.keys() {
        warnings.push(format!("unknown contextual scene field `{k}` ignored"));
    }
    let engaged = prof.remove("engaged_events").ok_or(ParseError::MissingSection {
        section: "engaged_events",
    })?;
    let properties = prof
        .remove("generalizable_properties")
        .ok_or(ParseError::MissingSection {
            section: "generalizable_properties",
        })?;
    let emotions = prof.remove("evoked_emotions").ok_or(ParseError::MissingSection {
        section: "evoked_emotions",
    })?;

    let mut keyword = instance.keyword_lemma.clone();
    let mut assigned_label = None;
    if let Some(v) = prof.remove("keyword") {
        match v {
            Value::String(s) => {
                let (kw, label) = split_keyword(&s);
                if !kw.is_empty() {
                    keyword = kw;
                }
                assigned_label = label;
            }
            Value::Null => {}
            other => warnings.push(format!("keyword {other} is not a string; ignored")),
        }
    }
    if let Some(v) = prof.remove("assigned_label") {
        match v {
            Value::String(s) if !s.trim().is_empty() => {
                assigned_label = Some(EntityLabel::new(s.trim()))
            }
            Value::String(_) | Value::Null => {}
            other => warnings.push(format!("assigned_label {other} is not a string; ignored")),
        }
    }
    for k in prof.keys() {
        warnings.push(format!("unknown expression profile field `{k}` ignored"));
    }

    let scene = SceneRepresentation {
        instance_ref: instance.instance_id.clone(),
        contextual_scene: ContextualScene {
            events: json_strings(&events, ';')
                .into_iter()
                .map(SceneEvent::new)
                .collect(),
            entities: json_entities(&entities, &mut warnings),
            setting: json_setting(&setting),
        },
        expression_profile: ExpressionProfile {
            keyword,
            assigned_label,
            engaged_events: json_strings(&engaged, ';'),
            generalizable_properties: json_strings(&properties, ';'),
            evoked_emotions: json_emotions(&emotions),
        },
        provenance: provenance.unwrap_or_default(),
    };
    Ok((scene, warnings))
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn first_string_field(obj: &Map<String, Value>, keys: &[&str]) -> Option<String> {
    obj.iter()
        .find(|(k, _)| keys.contains(&norm_key(k).as_str()))
        .and_then(|(_, v)| match v {
            Value::String(s) => Some(s.trim().to_string()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
}

fn json_field<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    obj.iter()
        .find(|(k, _)| keys.contains(&norm_key(k).as_str()))
        .map(|(_, v)| v)
}

/// A list of strings from an array, or from one string split on `sep`.
fn json_strings(value: &Value, sep: char) -> Vec<String> {
    match value {
        Value::Array(items) => items
            .iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(s.trim().to_string()),
                Value::Object(obj) => first_string_field(obj, &["text", "event", "property", "value", "description"])
                    .or_else(|| obj.values().find_map(|v| v.as_str().map(|s| s.trim().to_string()))),
                Value::Null => None,
                other => Some(other.to_string()),
            })
            .filter(|s| !s.is_empty())
            .collect(),
        Value::String(s) => split_outside_parens(s, sep)
            .into_iter()
            .flat_map(|part| part.lines().map(str::to_string).collect::<Vec<_>>())
            .map(|s| clean_item(&s))
            .filter(|s| !s.is_empty())
            .collect(),
        Value::Null => Vec::new(),
        other => vec![other.to_string()],
    }
}

fn json_emotions(value: &Value) -> Vec<Emotion> {
    let emotions: Vec<Emotion> = match value {
        Value::Array(items) => items
            .iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(Emotion::parse(s)),
                Value::Object(obj) => {
                    let emotion = first_string_field(obj, &["emotion", "name", "label", "text"])?;
                    let explanation = first_string_field(obj, &["explanation", "reason", "why", "because"])
                        .filter(|s| !s.is_empty());
                    Some(Emotion {
                        emotion,
                        explanation,
                    })
                }
                _ => None,
            })
            .collect(),
        Value::String(s) => return parse_emotion_items(s),
        _ => Vec::new(),
    };
    drop_none_markers(emotions)
}

fn json_entities(value: &Value, warnings: &mut Vec<String>) -> Vec<SceneEntity> {
    let mut out = Vec::new();
    match value {
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(obj) => out.push(json_entity(None, obj)),
                    Value::String(s) => match entity_from_line(s) {
                        Some(e) => out.push(e),
                        None => warnings.push(format!("entity entry {s:?} has no label; ignored")),
                    },
                    other => warnings.push(format!("entity entry {other} ignored")),
                }
            }
        }
        Value::Object(map) => {
            for (key, v) in map {
                match v {
                    Value::Object(obj) => out.push(json_entity(Some(key), obj)),
                    Value::String(s) => match entity_from_line(&format!("{key}: {s}")) {
                        Some(e) => out.push(e),
                        None => warnings.push(format!("entity entry {key:?} has no label; ignored")),
                    },
                    other => warnings.push(format!("entity entry {key}: {other} ignored")),
                }
            }
        }
        other => warnings.push(format!("entities value {other} is not a list; ignored")),
    }
    out
}

fn json_entity(key: Option<&str>, obj: &Map<String, Value>) -> SceneEntity {
    let label_text = first_string_field(obj, &["label", "id", "entity", "name", "placeholder"])
        .or_else(|| key.map(str::to_string))
        .unwrap_or_default();
    let (mut label, mut mention) = split_entity_head(&label_text);
    if let Some(m) = first_string_field(obj, &["surface_mention", "mention", "surface", "surface_form", "text"]) {
        mention = m;
    }
    if label.raw.is_empty() {
        label = EntityLabel::new(label_text.trim());
    }
    let roles = match json_field(obj, &["roles", "role", "roles_frames", "role_s", "roles_with_frames"]) {
        Some(Value::Array(items)) => items
            .iter()
            .filter_map(|item| match item {
                Value::String(s) => Some(Role::parse(s)),
                Value::Object(o) => {
                    let name = first_string_field(o, &["name", "role"])?;
                    let frame = first_string_field(o, &["frame", "frame_name"]).filter(|s| !s.is_empty());
                    Some(Role { name, frame })
                }
                _ => None,
            })
            .collect(),
        Some(Value::String(s)) => split_outside_parens(s, ',')
            .into_iter()
            .map(|r| Role::parse(&clean_item(&r)))
            .filter(|r| !r.name.is_empty())
            .collect(),
        _ => Vec::new(),
    };
    let properties = json_field(obj, &["properties", "property", "traits"])
        .map(|v| json_strings(v, ','))
        .unwrap_or_default();
    let emotions = json_field(obj, &["emotions", "emotion", "emotional_state"])
        .map(json_emotions)
        .unwrap_or_default();
    SceneEntity {
        label,
        surface_mention: mention,
        roles,
        properties,
        emotions,
    }
}

fn json_setting(value: &Value) -> Setting {
    match value {
        Value::Object(obj) => Setting {
            place: first_string_field(obj, &["place", "location"]).unwrap_or_default(),
            time: first_string_field(obj, &["time"]).unwrap_or_default(),
            atmosphere: first_string_field(obj, &["atmosphere", "atmos", "mood"]).unwrap_or_default(),
        },
        Value::String(s) => {
            let mut acc = SettingAcc::default();
            acc.absorb(s);
            acc.finish()
        }
        _ => Setting {
            place: String::new(),
            time: String::new(),
            atmosphere: String::new(),
        },
    }
}

// ---------------------------------------------------------------------------
// Bullet-list form

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Events,
    Entities,
    Setting,
    Engaged,
    Properties,
    Emotions,
    Profile,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EntityField {
    Roles,
    Properties,
    Emotions,
    Mention,
}

#[derive(Default)]
struct SettingAcc {
    place: Option<String>,
    time: Option<String>,
    atmosphere: Option<String>,
    positional: Vec<String>,
}

impl SettingAcc {
    fn absorb(&mut self, content: &str) {
        for seg in split_outside_parens(content, ';') {
            let seg = clean_item(&seg);
            if seg.is_empty() {
                continue;
            }
            match split_key(&seg) {
                Some((key, rest)) => match norm_key(key).as_str() {
                    "place" | "location" => self.place = Some(clean_item(rest)),
                    "time" => self.time = Some(clean_item(rest)),
                    "atmosphere" | "atmos" | "mood" => self.atmosphere = Some(clean_item(rest)),
                    _ => self.positional.push(seg),
                },
                None => self.positional.push(seg),
            }
        }
    }

    fn finish(self) -> Setting {
        let mut positional = self.positional.into_iter();
        let mut fill = |slot: Option<String>| slot.or_else(|| positional.next()).unwrap_or_default();
        let place = fill(self.place);
        let time = fill(self.time);
        let atmosphere = fill(self.atmosphere);
        Setting {
            place,
            time,
            atmosphere,
        }
    }
}

struct BulletState {
    section: Option<Section>,
    in_profile: bool,
    seen: [bool; 6],
    headers: usize,
    events: Vec<String>,
    entities: Vec<SceneEntity>,
    entity_field: Option<EntityField>,
    setting: SettingAcc,
    keyword: Option<String>,
    assigned_label: Option<EntityLabel>,
    engaged: Vec<String>,
    properties: Vec<String>,
    emotions: Vec<Emotion>,
    warnings: Vec<String>,
}

const SECTION_NAMES: [&str; 6] = [
    "events",
    "entities",
    "setting",
    "engaged_events",
    "generalizable_properties",
    "evoked_emotions",
];

impl BulletState {
    fn mark(&mut self, section: Section) {
        let idx = match section {
            Section::Events => 0,
            Section::Entities => 1,
            Section::Setting => 2,
            Section::Engaged => 3,
            Section::Properties => 4,
            Section::Emotions => 5,
            Section::Profile | Section::Ignored => {
                self.headers += 1;
                self.section = Some(section);
                return;
            }
        };
        self.seen[idx] = true;
        self.headers += 1;
        self.section = Some(section);
    }

    /// Top-level header for a normalized key, if it is one.
    fn header(&self, key: &str) -> Option<Section> {
        let section = match key {
            "contextual_scene" | "contextual_scene_c" | "scene" => Section::Ignored,
            "events" if self.in_profile && self.seen[0] => Section::Engaged,
            "events" | "event" => Section::Events,
            "entities" | "entity" => Section::Entities,
            "setting" => Section::Setting,
            "engaged_events" | "engaged_event" => Section::Engaged,
            "generalizable_properties" | "generalizable_property" | "generalized_properties" => {
                Section::Properties
            }
            "evoked_emotions" | "evoked_emotion" => Section::Emotions,
            "properties" if self.in_profile => Section::Properties,
            "emotions" if self.in_profile => Section::Emotions,
            k if k.starts_with("expression_profile") => Section::Profile,
            _ => return None,
        };
        Some(section)
    }
}

fn parse_bullets(
    body: &str,
    base_offset: usize,
    instance: &UsageInstance,
) -> Result<(SceneRepresentation, Vec<String>), ParseError> {
    let mut st = BulletState {
        section: None,
        in_profile: false,
        seen: [false; 6],
        headers: 0,
        events: Vec::new(),
        entities: Vec::new(),
        entity_field: None,
        setting: SettingAcc::default(),
        keyword: None,
        assigned_label: None,
        engaged: Vec::new(),
        properties: Vec::new(),
        emotions: Vec::new(),
        warnings: Vec::new(),
    };
    let first_content = body.len() - body.trim_start().len();

    let mut offset = 0usize;
    for raw_line in body.split_inclusive('\n') {
        let line_offset = base_offset + offset;
        offset += raw_line.len();
        let line = clean_line(raw_line);
        if line.is_empty() || line.chars().all(|c| matches!(c, '-' | '=' | '_' | '*')) {
            continue;
        }
        let (key_part, rest) = match split_key(&line) {
            Some((k, r)) => (k.to_string(), Some(r.trim().to_string())),
            None => (line.clone(), None),
        };
        let key = norm_key(&strip_parenthetical(&key_part));

        if key == "keyword" || key == "target_keyword" || key == "target_expression" {
            st.in_profile = true;
            st.headers += 1;
            st.section = Some(Section::Profile);
            let (kw, label) = split_keyword(rest.as_deref().unwrap_or(""));
            if !kw.is_empty() {
                st.keyword = Some(kw);
            }
            if label.is_some() {
                st.assigned_label = label;
            }
            continue;
        }

        let in_entity_context = st.section == Some(Section::Entities);
        let entity_sub = in_entity_context && entity_field(&key).is_some();
        if !entity_sub {
            if let Some(section) = st.header(&key) {
                match section {
                    Section::Events | Section::Entities | Section::Setting | Section::Ignored => {
                        st.in_profile = false
                    }
                    _ => st.in_profile = true,
                }
                st.mark(section);
                st.entity_field = None;
                if section == Section::Profile {
                    if let Some((open, close)) = key_part.find('(').zip(key_part.rfind(')')) {
                        if close > open {
                            let (kw, label) = split_keyword(&key_part[open + 1..close]);
                            if !kw.is_empty() {
                                st.keyword = Some(kw);
                            }
                            if label.is_some() {
                                st.assigned_label = label;
                            }
                        }
                    }
                }
                if let Some(content) = rest.filter(|r| !r.is_empty()) {
                    absorb_content(&mut st, section, &content, line_offset)?;
                }
                continue;
            }
        }

        match st.section {
            None => st.warnings.push(format!("text before first section ignored: {line:?}")),
            Some(section) => absorb_content(&mut st, section, &line, line_offset)?,
        }
    }

    if st.headers == 0 {
        return Err(ParseError::malformed(
            base_offset + first_content,
            "no section headers found",
        ));
    }
    if let Some(i) = st.seen.iter().position(|s| !s) {
        return Err(ParseError::MissingSection {
            section: SECTION_NAMES[i],
        });
    }

    let scene = SceneRepresentation {
        instance_ref: instance.instance_id.clone(),
        contextual_scene: ContextualScene {
            events: st.events.into_iter().map(SceneEvent::new).collect(),
            entities: st.entities,
            setting: st.setting.finish(),
        },
        expression_profile: ExpressionProfile {
            keyword: st.keyword.unwrap_or_else(|| instance.keyword_lemma.clone()),
            assigned_label: st.assigned_label,
            engaged_events: st.engaged,
            generalizable_properties: st.properties,
            evoked_emotions: drop_none_markers(st.emotions),
        },
        provenance: Provenance::default(),
    };
    Ok((scene, st.warnings))
}

fn absorb_content(
    st: &mut BulletState,
    section: Section,
    content: &str,
    offset: usize,
) -> Result<(), ParseError> {
    match section {
        Section::Events => st.events.extend(split_items(content)),
        Section::Engaged => st.engaged.extend(split_items(content)),
        Section::Properties => st.properties.extend(split_items(content)),
        Section::Emotions => st.emotions.extend(parse_emotion_items(content)),
        Section::Setting => st.setting.absorb(content),
        Section::Entities => absorb_entity_line(st, content, offset)?,
        Section::Profile => st
            .warnings
            .push(format!("unlabelled expression profile line ignored: {content:?}")),
        Section::Ignored => {}
    }
    Ok(())
}

fn entity_field(key: &str) -> Option<EntityField> {
    if key.starts_with("role") {
        return Some(EntityField::Roles);
    }
    match key {
        "property" | "properties" | "traits" => Some(EntityField::Properties),
        "emotion" | "emotions" | "emotional_state" => Some(EntityField::Emotions),
        "surface_mention" | "mention" => Some(EntityField::Mention),
        _ => None,
    }
}

fn absorb_entity_line(st: &mut BulletState, content: &str, offset: usize) -> Result<(), ParseError> {
    let sub = split_key(content).and_then(|(k, r)| {
        entity_field(&norm_key(&strip_parenthetical(k))).map(|f| (f, r.to_string()))
    });
    if let Some((field, rest)) = sub {
        let Some(entity) = st.entities.last_mut() else {
            return Err(ParseError::malformed(
                offset,
                "entity attribute line before any entity",
            ));
        };
        st.entity_field = Some(field);
        apply_entity_field(entity, field, &rest);
        return Ok(());
    }
    if let Some(entity) = entity_from_line(content) {
        st.entity_field = None;
        st.entities.push(entity);
        return Ok(());
    }
    // Continuation of the previous entity's attribute list.
    match st.entities.last_mut() {
        Some(entity) => {
            let field = st.entity_field.unwrap_or(EntityField::Roles);
            apply_entity_field(entity, field, content);
            Ok(())
        }
        None => Err(ParseError::malformed(
            offset,
            format!("entity line without a label: {content:?}"),
        )),
    }
}

fn apply_entity_field(entity: &mut SceneEntity, field: EntityField, content: &str) {
    match field {
        EntityField::Roles => entity.roles.extend(
            split_outside_parens(content, ',')
                .into_iter()
                .map(|r| clean_item(&r))
                .filter(|r| !r.is_empty())
                .map(|r| Role::parse(&r)),
        ),
        EntityField::Properties => entity.properties.extend(
            split_outside_parens(content, ',')
                .into_iter()
                .map(|p| clean_item(&p))
                .filter(|p| !p.is_empty()),
        ),
        EntityField::Emotions => entity.emotions.extend(
            split_outside_parens(content, ',')
                .into_iter()
                .map(|e| clean_item(&e))
                .filter(|e| !e.is_empty())
                .map(|e| Emotion::parse(&e)),
        ),
        EntityField::Mention => entity.surface_mention = clean_item(content),
    }
}

/// `PersonX (she): Agent (Feeding); Property: Reflective; Emotion: Calm`
fn entity_from_line(line: &str) -> Option<SceneEntity> {
    let (head, rest) = match split_key(line) {
        Some((h, r)) => (h, r),
        None => (line, ""),
    };
    let (label, mention) = split_entity_head(head);
    if label.raw.is_empty() {
        return None;
    }
    let mut entity = SceneEntity {
        label,
        surface_mention: mention,
        roles: Vec::new(),
        properties: Vec::new(),
        emotions: Vec::new(),
    };
    for seg in split_outside_parens(rest, ';') {
        let seg = seg.trim();
        if seg.is_empty() {
            continue;
        }
        let keyed = split_key(seg).and_then(|(k, r)| {
            entity_field(&norm_key(&strip_parenthetical(k))).map(|f| (f, r))
        });
        match keyed {
            Some((field, r)) => apply_entity_field(&mut entity, field, r),
            None => apply_entity_field(&mut entity, EntityField::Roles, seg),
        }
    }
    Some(entity)
}

/// `PersonX (she)` → (PersonX, "she"); also accepts `she (PersonX)`.
fn split_entity_head(head: &str) -> (EntityLabel, String) {
    let head = head.trim().trim_end_matches(':').trim();
    let (before, inner) = match (head.find('('), head.rfind(')')) {
        (Some(open), Some(close)) if close > open => {
            (head[..open].trim(), Some(head[open + 1..close].trim()))
        }
        _ => (head, None),
    };
    let before = before.trim_matches(|c: char| c == ':' || c == ',' || c.is_whitespace());
    let first = before.split_whitespace().next().unwrap_or("");
    if EntityLabel::is_label_like(first) {
        let mention = match inner {
            Some(m) => m.to_string(),
            None => before[first.len()..].trim().trim_start_matches(['-', '=']).trim().to_string(),
        };
        return (EntityLabel::new(first), mention);
    }
    if let Some(inner) = inner {
        if EntityLabel::is_label_like(inner) {
            return (EntityLabel::new(inner), before.to_string());
        }
    }
    (EntityLabel::new(""), String::new())
}

/// `crow (AnimalGroupX)`, `crow = AnimalGroupX`, `whiskey → ObjectZ`.
fn split_keyword(text: &str) -> (String, Option<EntityLabel>) {
    let text = text.trim();
    let label = text
        .split(|c: char| !c.is_alphanumeric())
        .find(|tok| EntityLabel::is_label_like(tok))
        .map(EntityLabel::new);
    let cut = text
        .find(['(', '=', '→', ','])
        .or_else(|| text.find(" - "))
        .or_else(|| text.find("->"))
        .unwrap_or(text.len());
    let mut keyword = clean_item(&text[..cut]);
    if let Some(l) = &label {
        if keyword == l.raw {
            keyword.clear();
        }
    }
    (keyword, label)
}

fn parse_emotion_items(content: &str) -> Vec<Emotion> {
    let mut out = Vec::new();
    for seg in split_outside_parens(content, ';') {
        let seg = clean_item(&seg);
        if seg.is_empty() {
            continue;
        }
        let simple_list = !seg.contains('(') && !seg.contains(" - ") && !seg.contains(':');
        if simple_list && seg.contains(',') {
            out.extend(
                seg.split(',')
                    .map(clean_item)
                    .filter(|s| !s.is_empty())
                    .map(Emotion::new),
            );
        } else if let Some((emotion, why)) = seg.split_once(" - ").or_else(|| split_key(&seg)) {
            out.push(Emotion::explained(emotion.trim(), clean_item(why)));
        } else {
            out.push(Emotion::parse(&seg));
        }
    }
    drop_none_markers(out)
}

fn drop_none_markers(emotions: Vec<Emotion>) -> Vec<Emotion> {
    let is_none = |e: &Emotion| {
        matches!(
            norm_key(&e.emotion).as_str(),
            "none" | "n_a" | "na" | "no_specific_emotions" | "no_emotions" | "nothing_specific"
        )
    };
    emotions.into_iter().filter(|e| !is_none(e)).collect()
}

fn split_items(content: &str) -> Vec<String> {
    split_outside_parens(content, ';')
        .into_iter()
        .map(|s| clean_item(&s))
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Source;

    fn crow() -> UsageInstance {
        UsageInstance::locate(
            "crow-1",
            "Sometimes she would just stay by the window, feeding the crows while he was doing some paperwork, just like old times.",
            "crow",
            Source::Other,
        )
        .unwrap()
    }

    #[test]
    fn clean_line_strips_markers() {
        assert_eq!(clean_line("1. **Events:**"), "Events:");
        assert_eq!(clean_line("   - *Engaged events:* PersonX feeds them"), "Engaged events: PersonX feeds them");
        assert_eq!(clean_line("### Expression Profile"), "Expression Profile");
        assert_eq!(clean_line("· Place: by a window"), "Place: by a window");
    }

    #[test]
    fn keyword_forms() {
        assert_eq!(
            split_keyword("crow = AnimalGroupX"),
            ("crow".to_string(), Some(EntityLabel::new("AnimalGroupX")))
        );
        assert_eq!(
            split_keyword("whiskey (ObjectZ)"),
            ("whiskey".to_string(), Some(EntityLabel::new("ObjectZ")))
        );
        assert_eq!(split_keyword("tea"), ("tea".to_string(), None));
    }

    #[test]
    fn entity_head_forms() {
        assert_eq!(
            split_entity_head("PersonX (she)"),
            (EntityLabel::new("PersonX"), "she".to_string())
        );
        assert_eq!(
            split_entity_head("the man (PersonX)"),
            (EntityLabel::new("PersonX"), "the man".to_string())
        );
        assert_eq!(split_entity_head("the man").0.raw, "");
    }

    #[test]
    fn refusal_is_malformed() {
        let err = parse_scene("Sorry, I cannot help", &crow()).unwrap_err();
        assert!(matches!(err, ParseError::Malformed { offset: 0, .. }), "{err:?}");
    }

    #[test]
    fn broken_json_reports_offset() {
        let raw = "{\n  \"events\": [\"PersonX runs\",\n}";
        match parse_scene(raw, &crow()).unwrap_err() {
            ParseError::Malformed { offset, .. } => assert!(offset > 10 && offset <= raw.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_section_named() {
        let raw = "Events:\n- PersonX feeds AnimalGroupX\nEntities:\n- PersonX (she): Agent\nSetting:\n- Place: unspecified; Time: unspecified; Atmosphere: unspecified\nExpression Profile\n- Engaged events: PersonX feeds them\n- Evoked emotions: None\n";
        assert_eq!(
            parse_scene(raw, &crow()).unwrap_err(),
            ParseError::MissingSection {
                section: "generalizable_properties"
            }
        );
    }

    #[test]
    fn none_emotions_are_empty() {
        let raw = "Events: PersonX feeds AnimalGroupX\nEntities:\n- PersonX (she): Agent (Feeding)\n- AnimalGroupX (the crows): Recipients (Feeding)\nSetting: Place: unspecified; Time: unspecified; Atmosphere: unspecified\nExpression Profile (crow = AnimalGroupX)\n- Engaged events: PersonX feeds them\n- Generalizable properties: commonly present near humans\n- Evoked emotions: None\n";
        let scene = parse_scene(raw, &crow()).unwrap();
        assert!(scene.expression_profile.evoked_emotions.is_empty());
        assert_eq!(scene.expression_profile.keyword, "crow");
        assert_eq!(
            scene.expression_profile.assigned_label,
            Some(EntityLabel::new("AnimalGroupX"))
        );
    }

    #[test]
    fn nested_bullets_and_json_in_prose() {
        let nested = "Here is the abstraction:\n\n1. **Events:**\n   - PersonX feeds AnimalGroupX\n2. **Entities:**\n   - PersonX (she)\n     - Role: Agent (Feeding)\n     - Property: reflective, calm\n     - Emotion: Nostalgia (memories)\n   - AnimalGroupX (the crows)\n     - Roles: Recipients (Feeding)\n3. **Setting:**\n   - Place: by a window\n   - Time: unspecified\n   - Atmosphere: calm\n4. **Expression Profile:**\n   - Keyword: crow (AnimalGroupX)\n   - Engaged Events:\n     - PersonX feeds them\n   - Generalizable Properties:\n     - respond to routine interactions\n   - Evoked Emotions:\n     - Serenity (peaceful presence)\n";
        let (scene, warnings) = parse_scene_with_warnings(nested, &crow()).unwrap();
        let she = &scene.contextual_scene.entities[0];
        assert_eq!(she.properties, vec!["reflective", "calm"]);
        assert_eq!(she.emotions[0].explanation.as_deref(), Some("memories"));
        assert_eq!(scene.contextual_scene.entities[1].roles[0].frame.as_deref(), Some("Feeding"));
        assert_eq!(scene.expression_profile.engaged_events, vec!["PersonX feeds them"]);
        assert_eq!(scene.expression_profile.evoked_emotions[0].emotion, "Serenity");
        assert_eq!(warnings.len(), 1);

        let prose = "Sure! {\"events\": [\"PersonX feeds AnimalGroupX\"], \"entities\": [{\"label\": \"PersonX\", \"surface_mention\": \"she\"}], \"setting\": {\"place\": \"window\", \"time\": \"unspecified\", \"atmosphere\": \"calm\"}, \"expression_profile\": {\"keyword\": \"crow\", \"engaged_events\": \"PersonX feeds them\", \"properties\": [\"tame\"], \"emotions\": \"None\"}} Hope this helps.";
        let scene = parse_scene(prose, &crow()).unwrap();
        assert_eq!(scene.expression_profile.generalizable_properties, vec!["tame"]);
        assert!(scene.expression_profile.evoked_emotions.is_empty());
    }

    #[test]
    fn unknown_json_fields_warn() {
        let raw = r#"{"events": ["PersonX runs"], "entities": {"PersonX (he)": {"roles": "Agent (Running)"}}, "setting": "Place: park; Time: dawn; Atmosphere: brisk", "engaged_events": ["PersonX runs"], "generalizable_properties": ["fast"], "evoked_emotions": [], "confidence": 0.9}"#;
        let u = UsageInstance::locate("r", "he runs in the park", "runs", Source::Other).unwrap();
        let (scene, warnings) = parse_scene_with_warnings(raw, &u).unwrap();
        assert_eq!(scene.contextual_scene.entities[0].surface_mention, "he");
        assert_eq!(scene.contextual_scene.setting.time, "dawn");
        assert!(warnings.iter().any(|w| w.contains("confidence")));
    }
}
