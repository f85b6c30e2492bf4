//! Rashomon set selection by relative AUC margin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SplitTag;
use crate::zoo::{auc, ScoreMatrix, ZooError};

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RashomonError {
    #[error("epsilon {0} must lie in (0, 1)")]
    InvalidEpsilon(f64),
    #[error("score matrix has no models")]
    NoModels,
    #[error("{labels} labels for {instances} instances")]
    LabelCount { labels: usize, instances: usize },
    #[error("Rashomon member `{0}` is not in the score matrix")]
    MissingMember(String),
    #[error(transparent)]
    Auc(#[from] ZooError),
}

pub type Result<T> = std::result::Result<T, RashomonError>;

/// Near-optimal models: every candidate whose AUC is at least
/// `best_auc * (1 - epsilon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RashomonSet {
    /// Members in candidate order.
    pub member_ids: Vec<String>,
    pub best_id: String,
    pub epsilon: f64,
    /// AUC of each member, parallel to `member_ids`.
    pub aucs: Vec<f64>,
    pub best_auc: f64,
    /// Membership cut-off, `best_auc * (1 - epsilon)`.
    pub threshold: f64,
    /// AUC of every candidate, parallel to the scored matrix rows.
    pub candidate_aucs: Vec<f64>,
    pub selection_split: SplitTag,
}

impl RashomonSet {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.member_ids.iter().any(|m| m == id)
    }
}

pub fn build(scores: &ScoreMatrix, labels: &[u8], epsilon: f64) -> Result<RashomonSet> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(RashomonError::InvalidEpsilon(epsilon));
    }
    if scores.n_models() == 0 {
        return Err(RashomonError::NoModels);
    }
    if labels.len() != scores.n_instances() {
        return Err(RashomonError::LabelCount { labels: labels.len(), instances: scores.n_instances() });
    }
    let candidate_aucs = scores
        .scores
        .iter()
        .map(|row| auc(row, labels))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    // strict comparison keeps the lowest index on ties
    let mut best = 0;
    for (k, &a) in candidate_aucs.iter().enumerate() {
        if a > candidate_aucs[best] {
            best = k;
        }
    }
    let best_auc = candidate_aucs[best];
    let threshold = best_auc * (1.0 - epsilon);
    let (member_ids, aucs) = scores
        .model_ids
        .iter()
        .zip(&candidate_aucs)
        .enumerate()
        .filter(|&(k, (_, &a))| k == best || a >= threshold)
        .map(|(_, (id, &a))| (id.clone(), a))
        .unzip();

    Ok(RashomonSet {
        member_ids,
        best_id: scores.model_ids[best].clone(),
        epsilon,
        aucs,
        best_auc,
        threshold,
        candidate_aucs,
        selection_split: scores.split,
    })
}

/// A score matrix cut down to Rashomon members, with the best model's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedScores {
    pub matrix: ScoreMatrix,
    pub best_row: usize,
}

/// Keep only the rows of Rashomon members, in membership order.
pub fn restrict(scores: &ScoreMatrix, set: &RashomonSet) -> Result<RestrictedScores> {
    let mut rows = Vec::with_capacity(set.len());
    for id in &set.member_ids {
        let row = scores.row(id).ok_or_else(|| RashomonError::MissingMember(id.clone()))?;
        rows.push(row.to_vec());
    }
    let best_row = set
        .member_ids
        .iter()
        .position(|m| *m == set.best_id)
        .ok_or_else(|| RashomonError::MissingMember(set.best_id.clone()))?;
    let matrix = ScoreMatrix::new(set.member_ids.clone(), scores.instance_ids.clone(), rows, scores.split)?;
    Ok(RestrictedScores { matrix, best_row })
}
