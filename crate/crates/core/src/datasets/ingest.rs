use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::scene::{char_slice, Source, UsageInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestFormat {
    /// Header with `lemma`, `identifier`, `context` and
    /// `indexes_target_token` (`start:end`, character offsets). An optional
    /// `target` column is checked against the sliced surface form.
    DwugLike,
    /// Header with `instance_id`, `keyword`, `sentence`; optional
    /// `target_start`/`target_end` and `source`.
    PlainTsv,
}

impl FromStr for IngestFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "dwug_like" | "dwug" => Ok(IngestFormat::DwugLike),
            "plain_tsv" | "tsv" => Ok(IngestFormat::PlainTsv),
            other => Err(format!("unknown usage format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub instances: Vec<UsageInstance>,
    pub errors: Vec<RowError>,
}

pub fn ingest_usages(path: &Path, format: IngestFormat) -> Result<IngestReport, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_usages(&text, format)
}

/// Only a missing header or required column fails the whole file; bad rows
/// are collected in the report.
pub fn parse_usages(text: &str, format: IngestFormat) -> Result<IngestReport, DatasetError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines.next().ok_or(DatasetError::Parse {
        line: 1,
        message: "empty usage file".into(),
    })?;
    let columns: HashMap<String, usize> = header
        .trim_end_matches('\r')
        .split('\t')
        .enumerate()
        .map(|(i, name)| (name.trim().to_lowercase(), i))
        .collect();
    let required: &[&str] = match format {
        IngestFormat::DwugLike => &["lemma", "identifier", "context", "indexes_target_token"],
        IngestFormat::PlainTsv => &["instance_id", "keyword", "sentence"],
    };
    if let Some(missing) = required.iter().find(|c| !columns.contains_key(**c)) {
        return Err(DatasetError::Parse {
            line: header_idx + 1,
            message: format!("missing column {missing:?}"),
        });
    }

    let mut report = IngestReport::default();
    for (idx, raw) in lines {
        let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
        let get = |name: &str| -> Option<&str> {
            columns
                .get(name)
                .and_then(|&i| fields.get(i))
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
        };
        let row = match format {
            IngestFormat::DwugLike => dwug_row(&get),
            IngestFormat::PlainTsv => plain_row(&get),
        };
        match row {
            Ok(inst) => report.instances.push(inst),
            Err(message) => report.errors.push(RowError {
                line: idx + 1,
                message,
            }),
        }
    }
    Ok(report)
}

fn required<'a>(get: &dyn Fn(&str) -> Option<&'a str>, name: &str) -> Result<&'a str, String> {
    get(name).ok_or_else(|| format!("missing value for {name:?}"))
}

/// `plane_nn` → `plane`.
fn strip_pos_tag(lemma: &str) -> &str {
    match lemma.rsplit_once('_') {
        Some((head, tag))
            if !head.is_empty()
                && (2..=3).contains(&tag.len())
                && tag.chars().all(|c| c.is_ascii_lowercase()) =>
        {
            head
        }
        _ => lemma,
    }
}

fn parse_offsets(text: &str) -> Result<(usize, usize), String> {
    let (s, e) = text
        .split_once(':')
        .ok_or_else(|| format!("offsets {text:?} are not of the form start:end"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("offset {v:?} is not a non-negative integer"))
    };
    Ok((parse(s)?, parse(e)?))
}

fn sliced(context: &str, start: usize, end: usize) -> Result<String, String> {
    let surface = char_slice(context, start, end).ok_or_else(|| {
        format!(
            "offsets {start}:{end} fall outside a context of {} characters",
            context.chars().count()
        )
    })?;
    if surface.trim().is_empty() {
        return Err(format!("offsets {start}:{end} select no text"));
    }
    Ok(surface)
}

fn dwug_row<'a>(get: &dyn Fn(&str) -> Option<&'a str>) -> Result<UsageInstance, String> {
    let lemma = strip_pos_tag(required(get, "lemma")?);
    let id = required(get, "identifier")?;
    let context = required(get, "context")?;
    let (start, end) = parse_offsets(required(get, "indexes_target_token")?)?;
    let surface = sliced(context, start, end)?;
    if let Some(expected) = get("target") {
        if surface != expected {
            return Err(format!(
                "offsets {start}:{end} select {surface:?} but the target column says {expected:?}"
            ));
        }
    }
    UsageInstance::new(id, context, surface, Some((start, end)), lemma, Source::Dwug)
        .map_err(|e| e.to_string())
}

fn plain_row<'a>(get: &dyn Fn(&str) -> Option<&'a str>) -> Result<UsageInstance, String> {
    let id = required(get, "instance_id")?;
    let keyword = required(get, "keyword")?;
    let sentence = required(get, "sentence")?;
    let source = match get("source").map(str::to_lowercase).as_deref() {
        None | Some("other") => Source::Other,
        Some("coca") | Some("coca_scenes") => Source::CocaScenes,
        Some("dwug") => Source::Dwug,
        Some(other) => return Err(format!("unknown source {other:?}")),
    };
    match (get("target_start"), get("target_end")) {
        (Some(s), Some(e)) => {
            let (start, end) = parse_offsets(&format!("{s}:{e}"))?;
            let surface = sliced(sentence, start, end)?;
            UsageInstance::new(id, sentence, surface, Some((start, end)), keyword, source)
                .map_err(|e| e.to_string())
        }
        (None, None) => {
            UsageInstance::locate(id, sentence, keyword, source).map_err(|e| e.to_string())
        }
        _ => Err("target_start and target_end must be given together".into()),
    }
}
