use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datasets::OddOneOutTrial;
use crate::embedding::{build_condition_text, cosine, EmbeddingProvider, EmbeddingVector, ReprCondition};
use crate::scene::SceneRepresentation;

/// Generated scenes keyed by instance id.
pub type SceneStore = BTreeMap<String, SceneRepresentation>;

/// Mean cosine of each vector to the others.
pub fn mean_similarities(vectors: &[EmbeddingVector]) -> Result<Vec<f64>, EvalError> {
    let n = vectors.len();
    let mut sims = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = cosine(&vectors[i], &vectors[j])?;
            sims[i] += c;
            sims[j] += c;
        }
    }
    if n > 1 {
        for s in &mut sims {
            *s /= (n - 1) as f64;
        }
    }
    Ok(sims)
}

/// Index of the candidate least similar on average to the rest; ties go to
/// the lowest index.
pub fn predict_odd(vectors: &[EmbeddingVector]) -> Result<usize, EvalError> {
    if vectors.len() != 5 {
        return Err(EvalError::InvalidInput(format!(
            "expected 5 candidate vectors, got {}",
            vectors.len()
        )));
    }
    let sims = mean_similarities(vectors)?;
    Ok(argmin(&sims))
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub keyword: String,
    pub gold_index: usize,
    pub predicted: usize,
    pub correct: bool,
    pub mean_similarities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddEvalResult {
    pub condition: ReprCondition,
    pub provider_id: String,
    pub accuracy: f64,
    pub records: Vec<TrialRecord>,
}

impl OddEvalResult {
    pub fn correct(&self) -> usize {
        self.records.iter().filter(|r| r.correct).count()
    }
}

/// Embeds every candidate under `condition` and scores each trial. Each
/// distinct text is embedded once; trials are scored in parallel and
/// records keep trial order.
pub fn run_odd_eval(
    trials: &[OddOneOutTrial],
    condition: ReprCondition,
    scenes: &SceneStore,
    provider: &dyn EmbeddingProvider,
) -> Result<OddEvalResult, EvalError> {
    if condition != ReprCondition::Text {
        let missing: BTreeSet<String> = trials
            .iter()
            .flat_map(|t| &t.candidates)
            .filter(|c| !scenes.contains_key(&c.instance_id))
            .map(|c| c.instance_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(EvalError::MissingScenes(missing.into_iter().collect()));
        }
    }

    let texts: Vec<Vec<String>> = trials
        .iter()
        .map(|t| {
            t.candidates
                .iter()
                .map(|c| {
                    let profile = scenes.get(&c.instance_id).map(|s| &s.expression_profile);
                    build_condition_text(condition, c, profile)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let unique: Vec<String> = texts
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vectors = provider.embed_batch(&unique)?;
    let table: BTreeMap<&str, &EmbeddingVector> =
        unique.iter().map(String::as_str).zip(&vectors).collect();

    let records = trials
        .par_iter()
        .zip(&texts)
        .map(|(trial, texts)| {
            let vs: Vec<EmbeddingVector> = texts.iter().map(|t| table[t.as_str()].clone()).collect();
            let sims = mean_similarities(&vs)?;
            let predicted = predict_odd(&vs)?;
            Ok(TrialRecord {
                trial_id: trial.trial_id.clone(),
                keyword: trial.keyword.clone(),
                gold_index: trial.gold_index,
                predicted,
                correct: predicted == trial.gold_index,
                mean_similarities: sims,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let accuracy = if records.is_empty() {
        0.0
    } else {
        records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64
    };
    Ok(OddEvalResult {
        condition,
        provider_id: provider.id(),
        accuracy,
        records,
    })
}
