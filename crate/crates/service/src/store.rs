//! Append-only judgment and choice logs with periodic snapshots.
//!
//! `judgments.jsonl` holds one `PreferenceJudgment` per line and
//! `odd_choices.jsonl` one `OddChoice` per line. `snapshot.json` records
//! the state after a known number of lines of each log; on open the
//! snapshot is loaded and only later lines are replayed.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use scene_forge::evaluation::{OddChoice, PreferenceJudgment};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const JUDGMENT_LOG: &str = "judgments.jsonl";
pub const CHOICE_LOG: &str = "odd_choices.jsonl";
pub const SNAPSHOT: &str = "snapshot.json";
pub const DEFAULT_SNAPSHOT_EVERY: usize = 50;

#[derive(Debug, Default, Serialize, Deserialize)]
struct Snapshot {
    judgment_lines: usize,
    choice_lines: usize,
    judgments: Vec<PreferenceJudgment>,
    choices: Vec<OddChoice>,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    judgments: Vec<PreferenceJudgment>,
    choices: Vec<OddChoice>,
    judged: BTreeSet<(String, String)>,
    chosen: BTreeSet<(String, String)>,
    judgment_log: File,
    choice_log: File,
    since_snapshot: usize,
    snapshot_every: usize,
}

impl Store {
    /// Opens or creates the logs under `dir`. A torn final line left by a
    /// crash is cut off and reported as a warning.
    pub fn open(dir: &Path) -> Result<(Self, Vec<String>), ServiceError> {
        fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
        let mut warnings = Vec::new();
        let snapshot_path = dir.join(SNAPSHOT);
        let snapshot: Snapshot = match fs::read_to_string(&snapshot_path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
                warnings.push(format!("ignoring unreadable snapshot: {e}"));
                Snapshot::default()
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Snapshot::default(),
            Err(e) => return Err(ServiceError::io(&snapshot_path, e)),
        };

        let judgment_path = dir.join(JUDGMENT_LOG);
        let choice_path = dir.join(CHOICE_LOG);
        let mut judgments: Vec<PreferenceJudgment> =
            replay(&judgment_path, &snapshot.judgments, snapshot.judgment_lines, &mut warnings)?;
        let mut choices: Vec<OddChoice> =
            replay(&choice_path, &snapshot.choices, snapshot.choice_lines, &mut warnings)?;

        let mut judged = BTreeSet::new();
        judgments.retain(|j| judged.insert((j.annotator_id.clone(), j.item_id.clone())));
        let mut chosen = BTreeSet::new();
        choices.retain(|c| chosen.insert((c.annotator_id.clone(), c.trial_id.clone())));

        let store = Store {
            judgment_log: append(&judgment_path)?,
            choice_log: append(&choice_path)?,
            dir: dir.to_path_buf(),
            judgments,
            choices,
            judged,
            chosen,
            since_snapshot: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        };
        Ok((store, warnings))
    }

    pub fn with_snapshot_every(mut self, n: usize) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn judgments(&self) -> &[PreferenceJudgment] {
        &self.judgments
    }

    pub fn choices(&self) -> &[OddChoice] {
        &self.choices
    }

    pub fn has_judgment(&self, annotator: &str, item: &str) -> bool {
        self.judged.contains(&(annotator.to_string(), item.to_string()))
    }

    pub fn has_choice(&self, annotator: &str, trial: &str) -> bool {
        self.chosen.contains(&(annotator.to_string(), trial.to_string()))
    }

    pub fn append_judgment(&mut self, j: PreferenceJudgment) -> Result<(), ServiceError> {
        let key = (j.annotator_id.clone(), j.item_id.clone());
        if self.judged.contains(&key) {
            return Err(ServiceError::Duplicate(format!(
                "item {:?} already judged by {:?}",
                j.item_id, j.annotator_id
            )));
        }
        write_line(&mut self.judgment_log, &j, &self.dir.join(JUDGMENT_LOG))?;
        self.judged.insert(key);
        self.judgments.push(j);
        self.bump()
    }

    pub fn append_choice(&mut self, c: OddChoice) -> Result<(), ServiceError> {
        let key = (c.annotator_id.clone(), c.trial_id.clone());
        if self.chosen.contains(&key) {
            return Err(ServiceError::Duplicate(format!(
                "trial {:?} already answered by {:?}",
                c.trial_id, c.annotator_id
            )));
        }
        write_line(&mut self.choice_log, &c, &self.dir.join(CHOICE_LOG))?;
        self.chosen.insert(key);
        self.choices.push(c);
        self.bump()
    }

    fn bump(&mut self) -> Result<(), ServiceError> {
        self.since_snapshot += 1;
        if self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes the snapshot through a temp file and rename.
    pub fn snapshot(&mut self) -> Result<(), ServiceError> {
        let snap = Snapshot {
            judgment_lines: self.judgments.len(),
            choice_lines: self.choices.len(),
            judgments: self.judgments.clone(),
            choices: self.choices.clone(),
        };
        let path = self.dir.join(SNAPSHOT);
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        let write = || -> io::Result<()> {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &snap)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| ServiceError::io(&path, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}

fn append(path: &Path) -> Result<File, ServiceError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ServiceError::io(path, e))
}

fn write_line<T: Serialize>(file: &mut File, value: &T, path: &Path) -> Result<(), ServiceError> {
    let mut line = serde_json::to_string(value).expect("log record serializes");
    line.push('\n');
    file.write_all(line.as_bytes())
        .and_then(|_| file.sync_data())
        .map_err(|e| ServiceError::io(path, e))
}

/// Snapshot records plus every log line after `skip`. Dedup happens in the
/// caller because snapshot and log may overlap after an interrupted write.
fn replay<T: DeserializeOwned + Clone>(
    path: &Path,
    snapshot: &[T],
    skip: usize,
    warnings: &mut Vec<String>,
) -> Result<Vec<T>, ServiceError> {
    let mut out = snapshot.to_vec();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(ServiceError::io(path, e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if complete < text.len() {
        warnings.push(format!(
            "{}: dropping torn final line ({} bytes)",
            path.display(),
            text.len() - complete
        ));
        let f = OpenOptions::new().write(true).open(path).map_err(|e| ServiceError::io(path, e))?;
        f.set_len(complete as u64).map_err(|e| ServiceError::io(path, e))?;
    }
    let lines: Vec<&str> = text[..complete].lines().collect();
    if skip > lines.len() {
        warnings.push(format!(
            "{}: snapshot covers {skip} lines but the log has {}; replaying the whole log",
            path.display(),
            lines.len()
        ));
        out.clear();
    }
    let start = if skip > lines.len() { 0 } else { skip };
    for (i, line) in lines.iter().enumerate().skip(start) {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) => warnings.push(format!("{} line {}: {e}", path.display(), i + 1)),
        }
    }
    Ok(out)
}
