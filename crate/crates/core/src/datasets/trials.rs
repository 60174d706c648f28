use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, SceneTypedCorpus};
use crate::scene::UsageInstance;

pub const TRIALS_PER_KEYWORD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddOneOutTrial {
    pub trial_id: String,
    pub keyword: String,
    /// Presentation order.
    pub candidates: Vec<UsageInstance>,
    pub gold_index: usize,
    pub base_scene_type: String,
    pub odd_scene_type: String,
}

impl OddOneOutTrial {
    /// Checks the five-candidate invariants.
    pub fn check(&self) -> Result<(), String> {
        if self.candidates.len() != 5 {
            return Err(format!("{} candidates, expected 5", self.candidates.len()));
        }
        if self.gold_index >= 5 {
            return Err(format!("gold index {} out of range", self.gold_index));
        }
        if self.base_scene_type == self.odd_scene_type {
            return Err("base and odd scene types coincide".into());
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if c.keyword_lemma != self.keyword {
                return Err(format!("candidate {i} has keyword {:?}", c.keyword_lemma));
            }
            let expected = if i == self.gold_index {
                &self.odd_scene_type
            } else {
                &self.base_scene_type
            };
            if c.gold_scene_type.as_ref() != Some(expected) {
                return Err(format!(
                    "candidate {i} has scene type {:?}, expected {expected:?}",
                    c.gold_scene_type
                ));
            }
        }
        Ok(())
    }
}

pub fn sample_trial<R: Rng + ?Sized>(
    corpus: &SceneTypedCorpus,
    keyword: &str,
    base_type: &str,
    odd_type: &str,
    rng: &mut R,
) -> Result<OddOneOutTrial, DatasetError> {
    let insufficient = |message: String| DatasetError::Insufficient {
        keyword: keyword.to_string(),
        message,
    };
    if base_type == odd_type {
        return Err(insufficient(format!("base and odd type are both {base_type:?}")));
    }
    let types = corpus
        .keywords
        .get(keyword)
        .ok_or_else(|| DatasetError::UnknownKeyword(keyword.to_string()))?;
    let empty = Vec::new();
    let base_pool = types.get(base_type).unwrap_or(&empty);
    let odd_pool = types.get(odd_type).unwrap_or(&empty);
    if base_pool.len() < 4 {
        return Err(insufficient(format!(
            "scene type {base_type:?} has {} sentences, need 4",
            base_pool.len()
        )));
    }
    let odd = odd_pool
        .choose(rng)
        .ok_or_else(|| insufficient(format!("scene type {odd_type:?} has no sentences")))?;

    let mut candidates: Vec<(bool, &UsageInstance)> = base_pool
        .choose_multiple(rng, 4)
        .map(|inst| (false, inst))
        .collect();
    candidates.push((true, odd));
    candidates.shuffle(rng);
    let gold_index = candidates.iter().position(|(is_odd, _)| *is_odd).expect("odd present");

    Ok(OddOneOutTrial {
        trial_id: format!("{keyword}:{base_type}>{odd_type}"),
        keyword: keyword.to_string(),
        candidates: candidates.into_iter().map(|(_, inst)| inst.clone()).collect(),
        gold_index,
        base_scene_type: base_type.to_string(),
        odd_scene_type: odd_type.to_string(),
    })
}

/// For each keyword in sorted order, draws `trials_per_keyword` distinct
/// ordered (base, odd) type pairs and samples one trial per pair. One
/// ChaCha8 stream seeded with `seed` drives every draw.
pub fn sample_trial_set(
    corpus: &SceneTypedCorpus,
    trials_per_keyword: usize,
    seed: u64,
) -> Result<Vec<OddOneOutTrial>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(corpus.keywords.len() * trials_per_keyword);
    for (keyword, types) in &corpus.keywords {
        let pairs: Vec<(&str, &str)> = types
            .iter()
            .filter(|(_, pool)| pool.len() >= 4)
            .flat_map(|(base, _)| {
                types
                    .iter()
                    .filter(move |(odd, pool)| *odd != base && !pool.is_empty())
                    .map(move |(odd, _)| (base.as_str(), odd.as_str()))
            })
            .collect();
        if pairs.len() < trials_per_keyword {
            return Err(DatasetError::Insufficient {
                keyword: keyword.clone(),
                message: format!(
                    "{} usable (base, odd) type pairs, need {trials_per_keyword}",
                    pairs.len()
                ),
            });
        }
        let chosen: Vec<(&str, &str)> = pairs
            .choose_multiple(&mut rng, trials_per_keyword)
            .copied()
            .collect();
        for (base, odd) in chosen {
            trials.push(sample_trial(corpus, keyword, base, odd, &mut rng)?);
        }
    }
    Ok(trials)
}

pub fn trials_to_jsonl(trials: &[OddOneOutTrial]) -> String {
    trials
        .iter()
        .map(|t| serde_json::to_string(t).expect("trial serializes") + "\n")
        .collect()
}

/// Blank lines and lines starting with `#` are skipped.
pub fn trials_from_jsonl(text: &str) -> Result<Vec<OddOneOutTrial>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let trial: OddOneOutTrial =
                serde_json::from_str(l).map_err(|e| DatasetError::TrialFormat {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            trial.check().map_err(|message| DatasetError::TrialFormat {
                line: i + 1,
                message,
            })?;
            Ok(trial)
        })
        .collect()
}

pub fn save_trials(trials: &[OddOneOutTrial], path: &Path) -> Result<(), DatasetError> {
    fs::write(path, trials_to_jsonl(trials)).map_err(|e| DatasetError::io(path, e))
}

pub fn load_trials(path: &Path) -> Result<Vec<OddOneOutTrial>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    trials_from_jsonl(&text)
}
