//! Loading instances and artifacts; atomic file writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use scene_forge::datasets::{
    ingest_usages, load_corpus, sample_corpus, synthetic_separable_corpus, IngestFormat,
    SceneTypedCorpus,
};
use scene_forge::generation::AtomicProfile;
use scene_forge::scene::{SceneRepresentation, UsageInstance};
use serde::{Deserialize, Serialize};

use crate::{CliError, InputArgs, InputFormat};

pub struct Loaded {
    pub instances: Vec<UsageInstance>,
    pub corpus: Option<SceneTypedCorpus>,
    pub warnings: Vec<String>,
}

pub fn load_instances(args: &InputArgs) -> Result<Loaded, CliError> {
    let from_corpus = |(corpus, warnings): (SceneTypedCorpus, Vec<String>)| Loaded {
        instances: corpus.instances().cloned().collect(),
        corpus: Some(corpus),
        warnings,
    };
    if args.sample {
        return Ok(from_corpus(sample_corpus()));
    }
    if args.synthetic {
        return Ok(from_corpus((synthetic_separable_corpus(), Vec::new())));
    }
    let path = args
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("one of --input, --sample or --synthetic is required".into()))?;
    let format = match args.input_format {
        InputFormat::Corpus => return Ok(from_corpus(load_corpus(path, args.strict)?)),
        InputFormat::DwugLike => IngestFormat::DwugLike,
        InputFormat::PlainTsv => IngestFormat::PlainTsv,
    };
    let report = ingest_usages(path, format)?;
    Ok(Loaded {
        instances: report.instances,
        corpus: None,
        warnings: report
            .errors
            .iter()
            .map(|e| format!("line {}: {} (row skipped)", e.line, e.message))
            .collect(),
    })
}

/// Writes through a sibling temp file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| CliError::io(path, e))
}

/// Instance ids made safe for file names.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_scene(dir: &Path, scene: &SceneRepresentation) -> Result<(), CliError> {
    let path = dir.join(format!("{}.json", file_stem(&scene.instance_ref)));
    write_atomic(&path, (scene.render() + "\n").as_bytes())
}

/// Scenes keyed by instance id.
pub fn read_scenes(dir: &Path) -> Result<BTreeMap<String, SceneRepresentation>, CliError> {
    let mut out = BTreeMap::new();
    for path in json_files(dir)? {
        let scene = SceneRepresentation::from_document(&read_text(&path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        out.insert(scene.instance_ref.clone(), scene);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AtomicRecord {
    pub instance_id: String,
    pub profile: AtomicProfile,
}

pub fn write_atomic_profile(dir: &Path, record: &AtomicRecord) -> Result<(), CliError> {
    let path = dir.join(format!("{}.json", file_stem(&record.instance_id)));
    let text = serde_json::to_string_pretty(record).expect("atomic record serializes") + "\n";
    write_atomic(&path, text.as_bytes())
}

pub fn read_atomic_profiles(dir: &Path) -> Result<BTreeMap<String, AtomicProfile>, CliError> {
    let mut out = BTreeMap::new();
    for path in json_files(dir)? {
        let record: AtomicRecord = serde_json::from_str(&read_text(&path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        out.insert(record.instance_id, record.profile);
    }
    Ok(out)
}

/// One JSON value per non-blank, non-`#` line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
