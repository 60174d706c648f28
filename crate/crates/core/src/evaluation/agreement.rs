use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Categorical ratings: item → rater → category index in `0..categories`.
/// Raters may skip items.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RatingsMatrix {
    pub categories: usize,
    pub items: BTreeMap<String, BTreeMap<String, usize>>,
}

impl RatingsMatrix {
    pub fn new(categories: usize) -> Result<Self, EvalError> {
        if categories < 2 {
            return Err(EvalError::InvalidInput(format!(
                "need at least 2 categories, got {categories}"
            )));
        }
        Ok(Self {
            categories,
            items: BTreeMap::new(),
        })
    }

    pub fn add(&mut self, item: &str, rater: &str, category: usize) -> Result<(), EvalError> {
        if category >= self.categories {
            return Err(EvalError::InvalidInput(format!(
                "category {category} outside 0..{}",
                self.categories
            )));
        }
        let row = self.items.entry(item.to_string()).or_default();
        if row.contains_key(rater) {
            return Err(EvalError::InvalidInput(format!(
                "rater {rater:?} already rated item {item:?}"
            )));
        }
        row.insert(rater.to_string(), category);
        Ok(())
    }

    /// Builds a matrix from per-item category counts, inventing rater names.
    pub fn from_counts(categories: usize, counts: &[Vec<usize>]) -> Result<Self, EvalError> {
        let mut m = Self::new(categories)?;
        for (i, row) in counts.iter().enumerate() {
            if row.len() != categories {
                return Err(EvalError::InvalidInput(format!(
                    "item {i}: {} counts for {categories} categories",
                    row.len()
                )));
            }
            let mut r = 0;
            for (q, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    m.add(&format!("item{i}"), &format!("r{r}"), q)?;
                    r += 1;
                }
            }
        }
        Ok(m)
    }

    pub fn cells(&self) -> usize {
        self.items.values().map(BTreeMap::len).sum()
    }

    /// Category counts of items rated at least twice.
    fn multi_rated_counts(&self) -> Vec<Vec<usize>> {
        self.items
            .values()
            .filter(|row| row.len() >= 2)
            .map(|row| {
                let mut counts = vec![0; self.categories];
                for &c in row.values() {
                    counts[c] += 1;
                }
                counts
            })
            .collect()
    }
}

/// Gwet's AC1 over items with at least two ratings.
pub fn gwet_ac1(ratings: &RatingsMatrix) -> Result<f64, EvalError> {
    let counts = ratings.multi_rated_counts();
    if counts.is_empty() {
        return Err(EvalError::NoMultiRatedItems);
    }
    let q = ratings.categories;
    let items = counts.len() as f64;
    let mut pa = 0.0;
    let mut pi = vec![0.0; q];
    for row in &counts {
        let n: usize = row.iter().sum();
        let pairs = (n * (n - 1)) as f64;
        pa += row.iter().map(|&r| (r * r.saturating_sub(1)) as f64).sum::<f64>() / pairs;
        for (k, &r) in row.iter().enumerate() {
            pi[k] += r as f64 / n as f64;
        }
    }
    pa /= items;
    let pe = pi
        .iter()
        .map(|p| p / items)
        .map(|p| p * (1.0 - p))
        .sum::<f64>()
        / (q - 1) as f64;
    Ok((pa - pe) / (1.0 - pe))
}

/// Share of multi-rated items on which every rater chose the same category.
pub fn full_agreement_ratio(ratings: &RatingsMatrix) -> Result<f64, EvalError> {
    let counts = ratings.multi_rated_counts();
    if counts.is_empty() {
        return Err(EvalError::NoMultiRatedItems);
    }
    let unanimous = counts
        .iter()
        .filter(|row| row.iter().filter(|&&c| c > 0).count() == 1)
        .count();
    Ok(unanimous as f64 / counts.len() as f64)
}

/// Mean over all (item, rater) cells of `label == gold[item]`.
pub fn human_accuracy(
    ratings: &RatingsMatrix,
    gold: &BTreeMap<String, usize>,
) -> Result<f64, EvalError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (item, row) in &ratings.items {
        let g = gold
            .get(item)
            .ok_or_else(|| EvalError::InvalidInput(format!("no gold label for item {item:?}")))?;
        total += row.len();
        correct += row.values().filter(|&&c| c == *g).count();
    }
    if total == 0 {
        return Err(EvalError::InvalidInput("no ratings".into()));
    }
    Ok(correct as f64 / total as f64)
}
