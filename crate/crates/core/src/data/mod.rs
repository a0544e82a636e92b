//! Labeled embedding collections, trial lists, their file formats, and the
//! synthetic generator used in place of real speaker corpora.

mod io;
mod synth;
mod trials;

use std::collections::HashMap;

pub use io::{
    load_embeddings, load_scores, load_trials, save_embeddings, save_scores, save_trials,
    EmbeddingFormat,
};
pub(crate) use io::{read_file, read_text, write_file};
pub use synth::{generate_synthetic, GroundTruth, SynthConfig, Warp};
pub use trials::make_trials;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utt: String,
    pub spk: String,
    pub vector: Vec<f64>,
}

/// Ordered, dimension-consistent embeddings with unique utterance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    records: Vec<Embedding>,
    index: HashMap<String, usize>,
}

pub(crate) fn check_token(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| c == ',' || c.is_whitespace()) {
        return Err(Error::InvalidConfig(format!(
            "id `{id}` must be nonempty without commas or whitespace"
        )));
    }
    Ok(())
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Self {
        EmbeddingSet {
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(
        &mut self,
        utt: impl Into<String>,
        spk: impl Into<String>,
        vector: Vec<f64>,
    ) -> Result<()> {
        let (utt, spk) = (utt.into(), spk.into());
        check_token(&utt)?;
        check_token(&spk)?;
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "non-finite value in `{utt}`"
            )));
        }
        if self.index.contains_key(&utt) {
            return Err(Error::DuplicateUtteranceId(utt));
        }
        self.index.insert(utt.clone(), self.records.len());
        self.records.push(Embedding { utt, spk, vector });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Embedding] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Embedding> {
        self.records.iter()
    }

    pub fn get(&self, utt: &str) -> Option<&Embedding> {
        self.index.get(utt).map(|&i| &self.records[i])
    }

    /// All vectors stacked as rows.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.dim);
        for r in &self.records {
            data.extend_from_slice(&r.vector);
        }
        Matrix::from_vec(self.len(), self.dim, data).expect("consistent dims")
    }

    /// Speaker ids in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.spk.as_str()))
            .map(|r| r.spk.as_str())
            .collect()
    }

    /// Record indices grouped per speaker, speakers in first-appearance order.
    pub fn speaker_groups(&self) -> Vec<(&str, Vec<usize>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups
                .entry(r.spk.as_str())
                .or_insert_with(|| {
                    order.push(r.spk.as_str());
                    Vec::new()
                })
                .push(i);
        }
        order
            .into_iter()
            .map(|s| (s, groups.remove(s).unwrap()))
            .collect()
    }

    /// New set with the same ids and order and vectors replaced by `f`.
    pub fn map_vectors(
        &self,
        out_dim: usize,
        mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<EmbeddingSet> {
        let mut out = EmbeddingSet::new(out_dim);
        for r in &self.records {
            out.push(r.utt.clone(), r.spk.clone(), f(&r.vector)?)?;
        }
        Ok(out)
    }

    /// Same ids and order, vectors taken from the rows of `m`.
    pub fn with_vectors(&self, m: &Matrix) -> Result<EmbeddingSet> {
        if m.rows() != self.len() {
            return Err(Error::shape(format!("{} rows", self.len()), m.rows()));
        }
        let mut out = EmbeddingSet::new(m.cols());
        for (i, r) in self.records.iter().enumerate() {
            out.push(r.utt.clone(), r.spk.clone(), m.row(i).to_vec())?;
        }
        Ok(out)
    }

    /// Records whose speaker satisfies `keep`, order preserved.
    pub fn filter_speakers(&self, mut keep: impl FnMut(&str) -> bool) -> EmbeddingSet {
        let mut out = EmbeddingSet::new(self.dim);
        for r in self.records.iter().filter(|r| keep(&r.spk)) {
            out.push(r.utt.clone(), r.spk.clone(), r.vector.clone())
                .expect("already validated");
        }
        out
    }

    /// Splits into (first `n` speakers, remaining speakers) by first appearance.
    pub fn split_speakers(&self, n: usize) -> (EmbeddingSet, EmbeddingSet) {
        let first: std::collections::HashSet<String> = self
            .speakers()
            .into_iter()
            .take(n)
            .map(str::to_owned)
            .collect();
        (
            self.filter_speakers(|s| first.contains(s)),
            self.filter_speakers(|s| !first.contains(s)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub target: bool,
}

/// Ordered trials, no duplicate `(enroll, test)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialList {
    trials: Vec<Trial>,
    seen: std::collections::HashSet<(String, String)>,
}

impl TrialList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        enroll: impl Into<String>,
        test: impl Into<String>,
        target: bool,
    ) -> Result<()> {
        let (enroll, test) = (enroll.into(), test.into());
        check_token(&enroll)?;
        check_token(&test)?;
        if !self.seen.insert((enroll.clone(), test.clone())) {
            return Err(Error::DuplicatePair(enroll, test));
        }
        self.trials.push(Trial {
            enroll,
            test,
            target,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trial> {
        self.trials.iter()
    }

    pub fn n_targets(&self) -> usize {
        self.trials.iter().filter(|t| t.target).count()
    }

    pub fn n_nontargets(&self) -> usize {
        self.len() - self.n_targets()
    }
}

impl<'a> IntoIterator for &'a TrialList {
    type Item = &'a Trial;
    type IntoIter = std::slice::Iter<'a, Trial>;
    fn into_iter(self) -> Self::IntoIter {
        self.trials.iter()
    }
}
