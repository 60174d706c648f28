use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::agreement::{full_agreement_ratio, gwet_ac1, human_accuracy, RatingsMatrix};
use super::stats::{binomial_test_one_sided, mann_whitney_u, MannWhitney, MwuMode};
use super::EvalError;
use crate::datasets::OddOneOutTrial;
use crate::dimension::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Scene,
    Atomic,
}

impl Schema {
    pub fn other(self) -> Self {
        match self {
            Schema::Scene => Schema::Atomic,
            Schema::Atomic => Schema::Scene,
        }
    }
}

/// Checklist reasons for a rating below 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    LacksInfo,
    OverInterpretation,
    FalseInfo,
    Irrelevant,
    Verbose,
    HardToUnderstand,
    NotApplicable,
    Other,
}

impl Reason {
    pub const ALL: [Reason; 8] = [
        Reason::LacksInfo,
        Reason::OverInterpretation,
        Reason::FalseInfo,
        Reason::Irrelevant,
        Reason::Verbose,
        Reason::HardToUnderstand,
        Reason::NotApplicable,
        Reason::Other,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Reason::LacksInfo => "lacks_info",
            Reason::OverInterpretation => "over_interpretation",
            Reason::FalseInfo => "false_info",
            Reason::Irrelevant => "irrelevant",
            Reason::Verbose => "verbose",
            Reason::HardToUnderstand => "hard_to_understand",
            Reason::NotApplicable => "not_applicable",
            Reason::Other => "other",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Reason::LacksInfo => "Lacks info.",
            Reason::OverInterpretation => "Over-interp.",
            Reason::FalseInfo => "False info.",
            Reason::Irrelevant => "Irrelevant",
            Reason::Verbose => "Verbose",
            Reason::HardToUnderstand => "Hard to und.",
            Reason::NotApplicable => "N/A",
            Reason::Other => "Other",
        }
    }

    /// Checklist wording shown to annotators.
    pub fn description(self) -> &'static str {
        match self {
            Reason::LacksInfo => "Lacks information",
            Reason::OverInterpretation => "Over-interpretation: adds information not supported by the text",
            Reason::FalseInfo => "False information: distorts information from the text",
            Reason::Irrelevant => "Irrelevant information: not grounded in the situation or unrelated to the keyword",
            Reason::Verbose => "Redundant or verbose",
            Reason::HardToUnderstand => "Hard to understand: unclear wording or poorly organized",
            Reason::NotApplicable => "N/A: no evoked emotion was produced for this usage",
            Reason::Other => "Other",
        }
    }

    pub fn allowed_for(self, dim: Dimension) -> bool {
        self != Reason::NotApplicable || dim == Dimension::EvokedEmotions
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Reason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Reason::ALL
            .into_iter()
            .find(|r| r.key() == s)
            .ok_or_else(|| format!("unknown reason {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceJudgment {
    pub item_id: String,
    pub dimension: Dimension,
    pub annotator_id: String,
    pub preferred: Schema,
    pub rating: u8,
    #[serde(default)]
    pub reasons: BTreeSet<Reason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_text: Option<String>,
    pub elicitation_text: String,
    /// Schema that was displayed as "A".
    pub blinding: Schema,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgmentError {
    #[error("elicitation text must be written before comparing profiles")]
    MissingElicitation,
    #[error("rating {0} is outside 1..5")]
    RatingOutOfRange(u8),
    #[error("a rating below 5 needs at least one reason")]
    ReasonsRequired,
    #[error("a rating of 5 takes no reasons")]
    ReasonsNotAllowed,
    #[error("reason `not_applicable` applies only to evoked_emotions items")]
    NotApplicableOutsideEmotions,
}

impl PreferenceJudgment {
    pub fn validate(&self) -> Result<(), JudgmentError> {
        if self.elicitation_text.trim().is_empty() {
            return Err(JudgmentError::MissingElicitation);
        }
        if !(1..=5).contains(&self.rating) {
            return Err(JudgmentError::RatingOutOfRange(self.rating));
        }
        if self.rating < 5 && self.reasons.is_empty() {
            return Err(JudgmentError::ReasonsRequired);
        }
        if self.rating == 5 && !self.reasons.is_empty() {
            return Err(JudgmentError::ReasonsNotAllowed);
        }
        if self.reasons.iter().any(|r| !r.allowed_for(self.dimension)) {
            return Err(JudgmentError::NotApplicableOutsideEmotions);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub sd: f64,
}

impl RatingSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            n: values.len(),
            mean,
            sd: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAgreement {
    pub group: String,
    pub items: usize,
    pub full_agreement: Option<f64>,
    pub ac1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: Dimension,
    pub n: usize,
    pub scene_preferred: usize,
    pub preference_rate: f64,
    /// One-sided binomial test of the scene preference count against 0.5.
    pub binomial_p: f64,
    pub scene_rating: Option<RatingSummary>,
    pub atomic_rating: Option<RatingSummary>,
    /// Scene-preferred ratings (x) against atomic-preferred ratings (y).
    pub mann_whitney: Option<MannWhitney>,
    pub atomic_preferred: usize,
    pub atomic_rate: f64,
    /// Percent of atomic-preferred judgments citing each reason.
    pub failure_breakdown: BTreeMap<Reason, f64>,
    pub groups: Vec<GroupAgreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallPreference {
    pub n: usize,
    pub scene_preferred: usize,
    pub preference_rate: f64,
    pub binomial_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceReport {
    pub dimensions: Vec<DimensionReport>,
    pub overall: Option<OverallPreference>,
}

fn group_agreement(
    judgments: &[&PreferenceJudgment],
    groups: Option<&BTreeMap<String, String>>,
) -> Vec<GroupAgreement> {
    let mut by_group: BTreeMap<String, Vec<&PreferenceJudgment>> = BTreeMap::new();
    for j in judgments {
        let g = groups
            .and_then(|m| m.get(&j.annotator_id).cloned())
            .unwrap_or_else(|| "all".to_string());
        by_group.entry(g).or_default().push(j);
    }
    by_group
        .into_iter()
        .map(|(group, js)| {
            let mut m = RatingsMatrix::new(2).expect("two categories");
            for j in &js {
                let cat = match j.preferred {
                    Schema::Scene => 0,
                    Schema::Atomic => 1,
                };
                // Duplicate (item, annotator) pairs keep the first judgment.
                let _ = m.add(&j.item_id, &j.annotator_id, cat);
            }
            GroupAgreement {
                group,
                items: m.items.len(),
                full_agreement: full_agreement_ratio(&m).ok(),
                ac1: gwet_ac1(&m).ok(),
            }
        })
        .collect()
}

/// Per-dimension preference rates, conditional ratings, significance tests,
/// failure breakdown and per-group agreement. `groups` maps annotator ids to
/// group names; without it all annotators form one group.
pub fn preference_report(
    judgments: &[PreferenceJudgment],
    groups: Option<&BTreeMap<String, String>>,
) -> PreferenceReport {
    let mut dimensions = Vec::new();
    for dim in Dimension::ALL {
        let js: Vec<&PreferenceJudgment> = judgments.iter().filter(|j| j.dimension == dim).collect();
        if js.is_empty() {
            continue;
        }
        let n = js.len();
        let rating_of = |s: Schema| -> Vec<f64> {
            js.iter()
                .filter(|j| j.preferred == s)
                .map(|j| f64::from(j.rating))
                .collect()
        };
        let scene_ratings = rating_of(Schema::Scene);
        let atomic_ratings = rating_of(Schema::Atomic);
        let scene_preferred = scene_ratings.len();
        let atomic_preferred = atomic_ratings.len();
        let failure_breakdown = if atomic_preferred == 0 {
            BTreeMap::new()
        } else {
            Reason::ALL
                .into_iter()
                .filter(|r| r.allowed_for(dim))
                .map(|r| {
                    let citing = js
                        .iter()
                        .filter(|j| j.preferred == Schema::Atomic && j.reasons.contains(&r))
                        .count();
                    (r, 100.0 * citing as f64 / atomic_preferred as f64)
                })
                .collect()
        };
        dimensions.push(DimensionReport {
            dimension: dim,
            n,
            scene_preferred,
            preference_rate: scene_preferred as f64 / n as f64,
            binomial_p: binomial_test_one_sided(scene_preferred as u64, n as u64, 0.5)
                .expect("valid binomial arguments"),
            scene_rating: RatingSummary::of(&scene_ratings),
            atomic_rating: RatingSummary::of(&atomic_ratings),
            mann_whitney: mann_whitney_u(&scene_ratings, &atomic_ratings, MwuMode::NormalApprox).ok(),
            atomic_preferred,
            atomic_rate: atomic_preferred as f64 / n as f64,
            failure_breakdown,
            groups: group_agreement(&js, groups),
        });
    }
    let overall = (!judgments.is_empty()).then(|| {
        let n = judgments.len();
        let k = judgments.iter().filter(|j| j.preferred == Schema::Scene).count();
        OverallPreference {
            n,
            scene_preferred: k,
            preference_rate: k as f64 / n as f64,
            binomial_p: binomial_test_one_sided(k as u64, n as u64, 0.5).expect("valid binomial arguments"),
        }
    });
    PreferenceReport { dimensions, overall }
}

/// One human odd-scene-out choice, as logged by the annotation service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddChoice {
    pub trial_id: String,
    pub annotator_id: String,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanGroupResult {
    pub group: String,
    pub annotators: usize,
    pub trials: usize,
    pub cells: usize,
    pub accuracy: Option<f64>,
    pub full_agreement: Option<f64>,
    pub ac1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAgreementReport {
    pub groups: Vec<HumanGroupResult>,
    pub mean_accuracy: Option<f64>,
    pub mean_full_agreement: Option<f64>,
    pub mean_ac1: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vs: Vec<f64> = values.flatten().collect();
    (!vs.is_empty()).then(|| vs.iter().sum::<f64>() / vs.len() as f64)
}

/// Accuracy, full agreement and AC1 over five-way odd-scene-out choices,
/// per annotator group, plus the unweighted mean over groups.
pub fn human_agreement_report(
    choices: &[OddChoice],
    trials: &[OddOneOutTrial],
    groups: Option<&BTreeMap<String, String>>,
) -> Result<HumanAgreementReport, EvalError> {
    let gold: BTreeMap<String, usize> = trials
        .iter()
        .map(|t| (t.trial_id.clone(), t.gold_index))
        .collect();
    let mut by_group: BTreeMap<String, RatingsMatrix> = BTreeMap::new();
    let mut annotators: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for c in choices {
        let g = groups
            .and_then(|m| m.get(&c.annotator_id).cloned())
            .unwrap_or_else(|| "all".to_string());
        let m = match by_group.entry(g.clone()) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(RatingsMatrix::new(5)?),
        };
        m.add(&c.trial_id, &c.annotator_id, c.choice)?;
        annotators.entry(g).or_default().insert(&c.annotator_id);
    }
    let groups: Vec<HumanGroupResult> = by_group
        .into_iter()
        .map(|(group, m)| HumanGroupResult {
            annotators: annotators[&group].len(),
            trials: m.items.len(),
            cells: m.cells(),
            accuracy: human_accuracy(&m, &gold).ok(),
            full_agreement: full_agreement_ratio(&m).ok(),
            ac1: gwet_ac1(&m).ok(),
            group,
        })
        .collect();
    Ok(HumanAgreementReport {
        mean_accuracy: mean_of(groups.iter().map(|g| g.accuracy)),
        mean_full_agreement: mean_of(groups.iter().map(|g| g.full_agreement)),
        mean_ac1: mean_of(groups.iter().map(|g| g.ac1)),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgment(dim: Dimension, who: &str, item: &str, preferred: Schema, rating: u8, reasons: &[Reason]) -> PreferenceJudgment {
        PreferenceJudgment {
            item_id: item.into(),
            dimension: dim,
            annotator_id: who.into(),
            preferred,
            rating,
            reasons: reasons.iter().copied().collect(),
            other_text: None,
            elicitation_text: "my reading".into(),
            blinding: Schema::Scene,
        }
    }

    #[test]
    fn validation_rules() {
        let ok = judgment(Dimension::EngagedEvents, "a", "i", Schema::Scene, 5, &[]);
        assert!(ok.validate().is_ok());
        let j = judgment(Dimension::EngagedEvents, "a", "i", Schema::Scene, 4, &[]);
        assert_eq!(j.validate(), Err(JudgmentError::ReasonsRequired));
        let j = judgment(Dimension::EngagedEvents, "a", "i", Schema::Scene, 3, &[Reason::NotApplicable]);
        assert_eq!(j.validate(), Err(JudgmentError::NotApplicableOutsideEmotions));
        let j = judgment(Dimension::EvokedEmotions, "a", "i", Schema::Atomic, 3, &[Reason::NotApplicable]);
        assert!(j.validate().is_ok());
        let j = judgment(Dimension::EvokedEmotions, "a", "i", Schema::Atomic, 6, &[Reason::Other]);
        assert_eq!(j.validate(), Err(JudgmentError::RatingOutOfRange(6)));
        let mut j = ok.clone();
        j.elicitation_text = "  ".into();
        assert_eq!(j.validate(), Err(JudgmentError::MissingElicitation));
    }

    #[test]
    fn all_scene_fives() {
        let js: Vec<_> = (0..6)
            .map(|i| judgment(Dimension::EngagedEvents, "a", &format!("i{i}"), Schema::Scene, 5, &[]))
            .collect();
        let r = preference_report(&js, None);
        let d = &r.dimensions[0];
        assert_eq!(d.preference_rate, 1.0);
        let s = d.scene_rating.unwrap();
        assert_eq!((s.mean, s.sd), (5.0, 0.0));
        assert!(d.atomic_rating.is_none());
        assert!(d.failure_breakdown.is_empty());
        assert!(preference_report(&[], None).dimensions.is_empty());
    }

    #[test]
    fn seven_of_ten() {
        let js: Vec<_> = (0..10)
            .map(|i| {
                if i < 7 {
                    judgment(Dimension::EvokedEmotions, "a", &format!("i{i}"), Schema::Scene, 5, &[])
                } else {
                    judgment(Dimension::EvokedEmotions, "a", &format!("i{i}"), Schema::Atomic, 3, &[Reason::LacksInfo, Reason::NotApplicable])
                }
            })
            .collect();
        let r = preference_report(&js, None);
        let d = &r.dimensions[0];
        assert_eq!(d.preference_rate, 0.7);
        assert!((d.binomial_p - 0.171875).abs() < 1e-12);
        assert_eq!(d.failure_breakdown[&Reason::LacksInfo], 100.0);
        assert_eq!(d.failure_breakdown[&Reason::Verbose], 0.0);
        assert_eq!(d.failure_breakdown.len(), 8);
    }
}
