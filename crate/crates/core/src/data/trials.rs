use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingSet, TrialList};
use crate::error::{Error, Result};

/// Samples target and nontarget pairs uniformly without replacement.
///
/// Pairs are unordered (`i < j` in record order), so `(a, b)` and `(b, a)`
/// never both appear. Same-utterance pairs are only produced as targets and
/// only with `allow_self`. The returned list is shuffled.
pub fn make_trials(
    data: &EmbeddingSet,
    n_target: usize,
    n_nontarget: usize,
    seed: u64,
    allow_self: bool,
) -> Result<TrialList> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recs = data.records();
    let n = recs.len();

    let mut target_pairs = Vec::new();
    for (_, idx) in data.speaker_groups() {
        for (a, &i) in idx.iter().enumerate() {
            if allow_self {
                target_pairs.push((i, i));
            }
            for &j in &idx[a + 1..] {
                target_pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    if n_target > target_pairs.len() {
        return Err(Error::InsufficientPairs {
            requested: n_target,
            available: target_pairs.len(),
        });
    }
    let same_pairs = target_pairs.len() - if allow_self { n } else { 0 };
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available_non = total_pairs - same_pairs;
    if n_nontarget > available_non {
        return Err(Error::InsufficientPairs {
            requested: n_nontarget,
            available: available_non,
        });
    }

    let mut chosen: Vec<(usize, usize, bool)> =
        index::sample(&mut rng, target_pairs.len(), n_target)
            .into_iter()
            .map(|k| (target_pairs[k].0, target_pairs[k].1, true))
            .collect();

    if available_non <= 4 * n_nontarget {
        let mut non = Vec::with_capacity(available_non);
        for i in 0..n {
            for j in i + 1..n {
                if recs[i].spk != recs[j].spk {
                    non.push((i, j));
                }
            }
        }
        chosen.extend(
            index::sample(&mut rng, non.len(), n_nontarget)
                .into_iter()
                .map(|k| (non[k].0, non[k].1, false)),
        );
    } else {
        let mut seen = HashSet::with_capacity(n_nontarget);
        while seen.len() < n_nontarget {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || recs[i].spk == recs[j].spk {
                continue;
            }
            let pair = (i.min(j), i.max(j));
            if seen.insert(pair) {
                chosen.push((pair.0, pair.1, false));
            }
        }
    }

    chosen.shuffle(&mut rng);
    let mut list = TrialList::new();
    for (i, j, target) in chosen {
        list.push(recs[i].utt.clone(), recs[j].utt.clone(), target)?;
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    fn small() -> EmbeddingSet {
        generate_synthetic(&SynthConfig {
            n_speakers: 6,
            utts_per_speaker: 4,
            obs_dim: 3,
            latent_dim: 1,
            ..SynthConfig::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn labels_match_speakers_and_no_self_pairs() {
        let data = small();
        let t = make_trials(&data, 30, 100, 1, false).unwrap();
        assert_eq!(t.n_targets(), 30);
        assert_eq!(t.n_nontargets(), 100);
        for tr in &t {
            let e = data.get(&tr.enroll).unwrap();
            let s = data.get(&tr.test).unwrap();
            assert_eq!(tr.target, e.spk == s.spk);
            assert_ne!(tr.enroll, tr.test);
        }
    }

    #[test]
    fn insufficient_pairs() {
        let data = small();
        // 6 speakers × C(4,2) = 36 target pairs
        assert!(matches!(
            make_trials(&data, 37, 0, 1, false),
            Err(Error::InsufficientPairs { available: 36, .. })
        ));
        // 276 - 36 = 240 nontarget pairs
        assert!(make_trials(&data, 0, 240, 1, false).is_ok());
        assert!(make_trials(&data, 0, 241, 1, false).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let data = small();
        let a = make_trials(&data, 10, 20, 5, false).unwrap();
        let b = make_trials(&data, 10, 20, 5, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_pairs_only_with_flag() {
        let data = small();
        let t = make_trials(&data, 60, 0, 2, true).unwrap();
        assert!(t.iter().any(|tr| tr.enroll == tr.test));
    }
}
