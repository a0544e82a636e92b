//! Scoring back-ends: cosine, PCA/LDA projections, whitening with length
//! normalization, and PLDA.

mod plda;
mod projection;
mod system;

pub use plda::{
    conditioned_covariance, fit_plda, fit_plda_from, plda_score_pair, plda_score_trials,
    PldaBackend, PldaModel,
};
pub use projection::{
    class_scatter, fit_lda, fit_pca, fit_whitener, mean_and_covariance, project, Projection,
    ProjectionKind,
};
pub use system::{BackendKind, ScoringSystem, SystemConfig};

use crate::data::{EmbeddingSet, TrialList};
use crate::error::{Error, Result};
use crate::linalg;

/// Per-trial scores aligned with a [`TrialList`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::DegenerateData("non-finite score".into()));
        }
        Ok(ScoreSet { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

pub fn length_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let n = linalg::norm(x);
    if !(n > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

pub fn cosine_score(e: &[f64], t: &[f64]) -> Result<f64> {
    if e.len() != t.len() {
        return Err(Error::shape(e.len(), t.len()));
    }
    let (ne, nt) = (linalg::norm(e), linalg::norm(t));
    if !(ne > 0.0 && nt > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok((linalg::dot(e, t) / (ne * nt)).clamp(-1.0, 1.0))
}

pub fn cosine_score_trials(
    enroll: &EmbeddingSet,
    test: &EmbeddingSet,
    trials: &TrialList,
) -> Result<ScoreSet> {
    score_trials(enroll, test, trials, cosine_score)
}

/// Applies `score` to each trial in order.
pub fn score_trials(
    enroll: &EmbeddingSet,
    test: &EmbeddingSet,
    trials: &TrialList,
    mut score: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<ScoreSet> {
    let mut out = Vec::with_capacity(trials.len());
    for t in trials {
        let e = enroll
            .get(&t.enroll)
            .ok_or_else(|| Error::UnknownTrialId(t.enroll.clone()))?;
        let x = test
            .get(&t.test)
            .ok_or_else(|| Error::UnknownTrialId(t.test.clone()))?;
        out.push(score(&e.vector, &x.vector)?);
    }
    ScoreSet::new(out)
}
