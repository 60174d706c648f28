//! Session assignments, item ordering and blinding.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scene_forge::datasets::OddOneOutTrial;
use scene_forge::evaluation::Schema;
use scene_forge::generation::AtomicProfile;
use scene_forge::scene::{ExpressionProfile, UsageInstance};
use scene_forge::Dimension;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ServiceError;

/// One (instance, dimension) comparison with both fragments pre-rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub item_id: String,
    pub instance: UsageInstance,
    pub dimension: Dimension,
    pub scene_text: String,
    pub atomic_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_id: String,
    pub annotator_id: String,
    pub group: String,
    /// Overrides the seed derived from the manifest seed and session id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub items: Vec<String>,
    #[serde(default)]
    pub trials: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    #[serde(default)]
    pub items: Vec<ManifestItem>,
    #[serde(default)]
    pub trials: Vec<OddOneOutTrial>,
    pub sessions: Vec<SessionSpec>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Manifest(format!("{}: {e}", path.display())))?;
        manifest.check()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), ServiceError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| ServiceError::io(path, e))
    }

    /// Unique ids and resolvable references.
    pub fn check(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::Manifest(m));
        let mut items = BTreeSet::new();
        for item in &self.items {
            if !items.insert(item.item_id.as_str()) {
                return bad(format!("duplicate item id {:?}", item.item_id));
            }
        }
        let mut trials = BTreeSet::new();
        for t in &self.trials {
            if !trials.insert(t.trial_id.as_str()) {
                return bad(format!("duplicate trial id {:?}", t.trial_id));
            }
            if let Err(e) = t.check() {
                return bad(format!("trial {:?}: {e}", t.trial_id));
            }
        }
        let mut sessions = BTreeSet::new();
        for s in &self.sessions {
            if !sessions.insert(s.session_id.as_str()) {
                return bad(format!("duplicate session id {:?}", s.session_id));
            }
            let mut seen = BTreeSet::new();
            for id in &s.items {
                if !items.contains(id.as_str()) {
                    return bad(format!("session {:?} lists unknown item {id:?}", s.session_id));
                }
                if !seen.insert(id) {
                    return bad(format!("session {:?} lists item {id:?} twice", s.session_id));
                }
            }
            let mut seen = BTreeSet::new();
            for id in &s.trials {
                if !trials.contains(id.as_str()) {
                    return bad(format!("session {:?} lists unknown trial {id:?}", s.session_id));
                }
                if !seen.insert(id) {
                    return bad(format!("session {:?} lists trial {id:?} twice", s.session_id));
                }
            }
        }
        Ok(())
    }

    pub fn session(&self, id: &str) -> Option<&SessionSpec> {
        self.sessions.iter().find(|s| s.session_id == id)
    }

    pub fn session_seed(&self, session: &SessionSpec) -> u64 {
        session
            .seed
            .unwrap_or_else(|| hash_u64(&format!("{}:{}", self.seed, session.session_id)))
    }

    /// Annotator id → group, for the report builders.
    pub fn groups(&self) -> BTreeMap<String, String> {
        self.sessions
            .iter()
            .map(|s| (s.annotator_id.clone(), s.group.clone()))
            .collect()
    }
}

fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

fn hash_u64(text: &str) -> u64 {
    let d = digest(text);
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

/// Which schema is displayed as "A" for this item.
pub fn blinding_for(session_seed: u64, item_id: &str) -> Schema {
    if digest(&format!("{session_seed}:{item_id}"))[0] & 1 == 0 {
        Schema::Scene
    } else {
        Schema::Atomic
    }
}

/// Seeded permutation of `ids`.
pub fn presentation_order(session_seed: u64, ids: &[String]) -> Vec<String> {
    let mut out = ids.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(session_seed));
    out
}

pub fn elicitation_prompt(dimension: Dimension, keyword: &str) -> String {
    let template = match dimension {
        Dimension::EngagedEvents => {
            "What happened with the [KEYWORD] in the situation? What did they do or what occurred to them?"
        }
        Dimension::GeneralizableProperties => {
            "What are the prominent properties of the [KEYWORD] in this situation? In your interpretation, what properties stand out as most meaningful or relevant in this context?"
        }
        Dimension::EvokedEmotions => "Which emotions or wishes does the [KEYWORD] evoke in the situation?",
    };
    template.replace("[KEYWORD]", keyword)
}

/// One profile item per line.
pub fn scene_fragment(profile: &ExpressionProfile, dimension: Dimension) -> String {
    let lines: Vec<String> = match dimension {
        Dimension::EngagedEvents => profile.engaged_events.clone(),
        Dimension::GeneralizableProperties => profile.generalizable_properties.clone(),
        Dimension::EvokedEmotions => profile
            .evoked_emotions
            .iter()
            .map(|e| match &e.explanation {
                Some(x) => format!("{}: {x}", e.emotion),
                None => e.emotion.clone(),
            })
            .collect(),
    };
    lines.join("\n")
}

pub fn atomic_fragment(profile: &AtomicProfile, dimension: Dimension) -> String {
    profile.render_fragment(dimension)
}

/// Assignment of annotators to sessions; every annotator sees every item
/// and trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotator {
    pub annotator_id: String,
    pub group: String,
}

/// Pairs scene and atomic profiles per instance into three items each.
/// Instances missing either profile are returned by id and skipped.
pub fn build_manifest(
    seed: u64,
    instances: &[UsageInstance],
    scenes: &BTreeMap<String, ExpressionProfile>,
    atomic: &BTreeMap<String, AtomicProfile>,
    trials: Vec<OddOneOutTrial>,
    annotators: &[Annotator],
) -> (Manifest, Vec<String>) {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for inst in instances {
        let (Some(s), Some(a)) = (scenes.get(&inst.instance_id), atomic.get(&inst.instance_id)) else {
            skipped.push(inst.instance_id.clone());
            continue;
        };
        for dim in Dimension::ALL {
            items.push(ManifestItem {
                item_id: format!("{}:{}", inst.instance_id, dim.key()),
                instance: inst.clone(),
                dimension: dim,
                scene_text: scene_fragment(s, dim),
                atomic_text: atomic_fragment(a, dim),
            });
        }
    }
    let item_ids: Vec<String> = items.iter().map(|i| i.item_id.clone()).collect();
    let trial_ids: Vec<String> = trials.iter().map(|t| t.trial_id.clone()).collect();
    let sessions = annotators
        .iter()
        .map(|a| SessionSpec {
            session_id: a.annotator_id.clone(),
            annotator_id: a.annotator_id.clone(),
            group: a.group.clone(),
            seed: None,
            items: item_ids.clone(),
            trials: trial_ids.clone(),
        })
        .collect();
    (
        Manifest {
            seed,
            items,
            trials,
            sessions,
        },
        skipped,
    )
}
