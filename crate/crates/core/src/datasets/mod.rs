//! Scene-typed corpora, odd-scene-out trial sampling and usage ingestion.

mod ingest;
mod trials;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::scene::{InstanceError, Source, UsageInstance};

pub use ingest::{ingest_usages, parse_usages, IngestFormat, IngestReport, RowError};
pub use trials::{
    load_trials, sample_trial, sample_trial_set, save_trials, trials_from_jsonl, trials_to_jsonl,
    OddOneOutTrial, TRIALS_PER_KEYWORD,
};

/// Keywords of the scene-typed corpus.
pub const CORPUS_KEYWORDS: [&str; 26] = [
    "bathroom", "beer", "chicken", "cigar", "cigarette", "coffee", "crow", "eagle", "elevator",
    "fire", "knife", "microwave", "oven", "owl", "pistol", "raccoon", "rat", "raven", "rifle",
    "squirrel", "sword", "tea", "turkey", "vulture", "water", "wine",
];

pub const TYPES_PER_KEYWORD: usize = 4;
pub const SENTENCES_PER_TYPE: usize = 5;

pub const CORPUS_HEADER: &str = "keyword\tscene_type\tsentence_id\tsentence";

/// The three-keyword sample corpus bundled with the crate.
pub const SAMPLE_CORPUS_TSV: &str = include_str!("../../assets/table3_corpus.tsv");

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("keyword {keyword:?}{}: {message}", scene_type.as_ref().map(|t| format!(", scene type {t:?}")).unwrap_or_default())]
    Shape {
        keyword: String,
        scene_type: Option<String>,
        message: String,
    },
    #[error("keyword {0:?} not in corpus")]
    UnknownKeyword(String),
    #[error("keyword {keyword:?}: {message}")]
    Insufficient { keyword: String, message: String },
    #[error("trial file line {line}: {message}")]
    TrialFormat { line: usize, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// keyword → scene type → instances, in file order within each type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SceneTypedCorpus {
    pub keywords: BTreeMap<String, BTreeMap<String, Vec<UsageInstance>>>,
}

impl SceneTypedCorpus {
    pub fn insert(&mut self, instance: UsageInstance, scene_type: &str) {
        let instance = instance.with_gold_scene_type(scene_type);
        self.keywords
            .entry(instance.keyword_lemma.clone())
            .or_default()
            .entry(scene_type.to_string())
            .or_default()
            .push(instance);
    }

    pub fn len(&self) -> usize {
        self.keywords
            .values()
            .flat_map(|types| types.values())
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keyword_names(&self) -> Vec<&str> {
        self.keywords.keys().map(String::as_str).collect()
    }

    pub fn instances(&self) -> impl Iterator<Item = &UsageInstance> {
        self.keywords
            .values()
            .flat_map(|types| types.values())
            .flatten()
    }

    /// Keeps only the named keywords.
    pub fn retain_keywords(&mut self, keep: &[&str]) {
        self.keywords.retain(|k, _| keep.contains(&k.as_str()));
    }

    /// One message per deviation from 4 scene types × 5 sentences.
    pub fn shape_problems(&self) -> Vec<DatasetError> {
        let mut problems = Vec::new();
        for (keyword, types) in &self.keywords {
            if types.len() != TYPES_PER_KEYWORD {
                problems.push(DatasetError::Shape {
                    keyword: keyword.clone(),
                    scene_type: None,
                    message: format!(
                        "has {} scene types, expected {TYPES_PER_KEYWORD}",
                        types.len()
                    ),
                });
            }
            for (scene_type, instances) in types {
                if instances.len() != SENTENCES_PER_TYPE {
                    problems.push(DatasetError::Shape {
                        keyword: keyword.clone(),
                        scene_type: Some(scene_type.clone()),
                        message: format!(
                            "has {} sentences, expected {SENTENCES_PER_TYPE}",
                            instances.len()
                        ),
                    });
                }
            }
        }
        problems
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(CORPUS_HEADER);
        out.push('\n');
        for (keyword, types) in &self.keywords {
            for (scene_type, instances) in types {
                for inst in instances {
                    let _ = writeln!(
                        out,
                        "{keyword}\t{scene_type}\t{}\t{}",
                        inst.instance_id, inst.context_text
                    );
                }
            }
        }
        out
    }
}

/// Parses corpus TSV. Strict mode turns shape deviations and bad rows into
/// errors; lenient mode reports them as warnings and skips bad rows.
pub fn parse_corpus(
    text: &str,
    strict: bool,
) -> Result<(SceneTypedCorpus, Vec<String>), DatasetError> {
    let mut corpus = SceneTypedCorpus::default();
    let mut warnings = Vec::new();
    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() || row.starts_with('#') || (line == 1 && row == CORPUS_HEADER) {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        let result = if fields.len() != 4 {
            Err(format!("expected 4 tab-separated fields, found {}", fields.len()))
        } else if let Some(first) = seen_ids.get(fields[2]) {
            Err(format!("sentence id {:?} already used on line {first}", fields[2]))
        } else {
            let [keyword, scene_type, id, sentence] = [fields[0], fields[1], fields[2], fields[3]]
                .map(str::trim);
            if keyword.is_empty() || scene_type.is_empty() || id.is_empty() {
                Err("keyword, scene type and sentence id must be non-empty".to_string())
            } else {
                UsageInstance::locate(id, sentence, keyword, Source::CocaScenes)
                    .map(|inst| (inst, scene_type))
                    .map_err(|e: InstanceError| e.to_string())
            }
        };
        match result {
            Ok((inst, scene_type)) => {
                seen_ids.insert(inst.instance_id.clone(), line);
                corpus.insert(inst, scene_type);
            }
            Err(message) if strict => return Err(DatasetError::Parse { line, message }),
            Err(message) => warnings.push(format!("line {line}: {message} (row skipped)")),
        }
    }

    let problems = corpus.shape_problems();
    if strict {
        if let Some(first) = problems.into_iter().next() {
            return Err(first);
        }
    } else {
        warnings.extend(problems.iter().map(ToString::to_string));
    }
    Ok((corpus, warnings))
}

pub fn load_corpus(
    path: &Path,
    strict: bool,
) -> Result<(SceneTypedCorpus, Vec<String>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_corpus(&text, strict)
}

pub fn save_corpus(corpus: &SceneTypedCorpus, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, corpus.to_tsv()).map_err(|e| DatasetError::io(path, e))
}

/// The bundled three-keyword sample, loaded leniently.
pub fn sample_corpus() -> (SceneTypedCorpus, Vec<String>) {
    parse_corpus(SAMPLE_CORPUS_TSV, false).expect("bundled sample corpus parses leniently")
}

/// A full-shape corpus (26 × 4 × 5) whose scene types are separable by
/// construction: sentences of one type share four signature tokens, and
/// each sentence adds one token of its own.
pub fn synthetic_separable_corpus() -> SceneTypedCorpus {
    let mut corpus = SceneTypedCorpus::default();
    for (k, keyword) in CORPUS_KEYWORDS.iter().enumerate() {
        for t in 0..TYPES_PER_KEYWORD {
            let scene_type = format!("scene{}", t + 1);
            let signature: Vec<String> = (0..4).map(|j| format!("k{k}t{t}s{j}")).collect();
            for s in 0..SENTENCES_PER_TYPE {
                let id = format!("{keyword}-{}-{}", t + 1, s + 1);
                let sentence = format!(
                    "The {keyword} {} {} u{k}t{t}n{s} {} {}.",
                    signature[0], signature[1], signature[2], signature[3]
                );
                let inst = UsageInstance::locate(id, sentence, keyword, Source::CocaScenes)
                    .expect("keyword occurs in synthetic sentence");
                corpus.insert(inst, &scene_type);
            }
        }
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_corpus_loads_with_warnings() {
        let (corpus, warnings) = sample_corpus();
        assert_eq!(corpus.len(), 15);
        assert_eq!(corpus.keyword_names(), vec!["bathroom", "fire", "raccoon"]);
        assert!(!warnings.is_empty());
        let raccoon = &corpus.keywords["raccoon"];
        assert_eq!(raccoon["household_intruder"].len(), 4);
        assert_eq!(raccoon["rescued_animal"][0].instance_id, "raccoon-b");
        assert!(parse_corpus(SAMPLE_CORPUS_TSV, true).is_err());
    }

    #[test]
    fn synthetic_is_full_shape() {
        let corpus = synthetic_separable_corpus();
        assert_eq!(corpus.len(), 520);
        let (again, warnings) = parse_corpus(&corpus.to_tsv(), true).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(again, corpus);
    }

    #[test]
    fn missing_sentence_is_shape_error() {
        let tsv = synthetic_separable_corpus().to_tsv();
        let dropped: String = tsv
            .lines()
            .filter(|l| !l.contains("\towl-2-3\t"))
            .map(|l| format!("{l}\n"))
            .collect();
        match parse_corpus(&dropped, true) {
            Err(DatasetError::Shape {
                keyword,
                scene_type,
                ..
            }) => {
                assert_eq!(keyword, "owl");
                assert_eq!(scene_type.as_deref(), Some("scene2"));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn bad_row_names_line() {
        let text = format!("{CORPUS_HEADER}\nowl\tx\towl-1\tAn owl hooted.\nowl\tx\n");
        match parse_corpus(&text, true) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let (c, w) = parse_corpus(&text, false).unwrap();
        assert_eq!(c.len(), 1);
        assert!(w[0].starts_with("line 3:"));
    }
}
