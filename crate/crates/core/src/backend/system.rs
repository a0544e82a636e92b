use std::fmt;
use std::str::FromStr;

use super::plda::PldaBackend;
use super::projection::{fit_lda, fit_pca, Projection};
use super::{cosine_score, length_normalize, score_trials, ScoreSet};
use crate::data::{EmbeddingSet, TrialList};
use crate::error::{Error, Result};

/// The five back-end columns of the results grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Cosine,
    Pca,
    Plda,
    LPlda,
    PPlda,
}

impl BackendKind {
    pub const ALL: [BackendKind; 5] = [
        BackendKind::Cosine,
        BackendKind::Pca,
        BackendKind::Plda,
        BackendKind::LPlda,
        BackendKind::PPlda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Cosine => "cosine",
            BackendKind::Pca => "pca",
            BackendKind::Plda => "plda",
            BackendKind::LPlda => "l-plda",
            BackendKind::PPlda => "p-plda",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackendKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown back-end `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Output dim of the PCA/LDA projections; `None` means `min(D − 1, 8)`.
    pub proj_dim: Option<usize>,
    /// PLDA speaker-subspace rank; `None` means the full input dim.
    pub plda_rank: Option<usize>,
    pub plda_iters: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            proj_dim: None,
            plda_rank: None,
            plda_iters: 10,
        }
    }
}

impl SystemConfig {
    fn proj_dim(&self, dim: usize, n_speakers: usize, lda: bool) -> usize {
        let mut d = self.proj_dim.unwrap_or(dim.saturating_sub(1).clamp(1, 8));
        if lda && self.proj_dim.is_none() {
            d = d.min(n_speakers.saturating_sub(1)).max(1);
        }
        d
    }

    fn rank(&self, dim: usize, n_speakers: usize) -> usize {
        self.plda_rank
            .unwrap_or(dim)
            .min(dim)
            .min(n_speakers.saturating_sub(1).max(1))
    }
}

/// A fitted back-end ready to score trials.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoringSystem {
    Cosine,
    Pca(Projection),
    Plda(PldaBackend),
    /// Projection, length normalization, then PLDA.
    Projected(Projection, PldaBackend),
}

impl ScoringSystem {
    pub fn fit(kind: BackendKind, train: &EmbeddingSet, cfg: &SystemConfig) -> Result<Self> {
        let n_spk = train.speakers().len();
        let plda = |data: &EmbeddingSet| {
            PldaBackend::fit(data, cfg.rank(data.dim(), n_spk), cfg.plda_iters)
        };
        let projected = |p: Projection| -> Result<Self> {
            let reduced = train.map_vectors(p.output_dim(), |v| length_normalize(&p.apply(v)?))?;
            let b = plda(&reduced)?;
            Ok(ScoringSystem::Projected(p, b))
        };
        match kind {
            BackendKind::Cosine => Ok(ScoringSystem::Cosine),
            BackendKind::Pca => Ok(ScoringSystem::Pca(fit_pca(
                train,
                cfg.proj_dim(train.dim(), n_spk, false),
            )?)),
            BackendKind::Plda => Ok(ScoringSystem::Plda(plda(train)?)),
            BackendKind::LPlda => {
                projected(fit_lda(train, cfg.proj_dim(train.dim(), n_spk, true))?)
            }
            BackendKind::PPlda => {
                projected(fit_pca(train, cfg.proj_dim(train.dim(), n_spk, false))?)
            }
        }
    }

    pub fn score_pair(&self, e: &[f64], t: &[f64]) -> Result<f64> {
        match self {
            ScoringSystem::Cosine => cosine_score(e, t),
            ScoringSystem::Pca(p) => cosine_score(&p.apply(e)?, &p.apply(t)?),
            ScoringSystem::Plda(b) => b.score_pair(e, t),
            ScoringSystem::Projected(p, b) => b.score_pair(
                &length_normalize(&p.apply(e)?)?,
                &length_normalize(&p.apply(t)?)?,
            ),
        }
    }

    pub fn score_trials(
        &self,
        enroll: &EmbeddingSet,
        test: &EmbeddingSet,
        trials: &TrialList,
    ) -> Result<ScoreSet> {
        score_trials(enroll, test, trials, |e, t| self.score_pair(e, t))
    }
}
