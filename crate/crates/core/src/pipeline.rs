//! The synthetic results grid: four front-ends (raw vectors, auto-encoder,
//! VAE and cohesive VAE codes) crossed with the five scoring back-ends,
//! plus Gaussianity diagnostics of each front-end.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::backend::{BackendKind, ScoreSet, ScoringSystem, SystemConfig};
use crate::data::{generate_synthetic, make_trials, EmbeddingSet, SynthConfig, TrialList};
use crate::error::{Error, Result};
use crate::metrics::{compute_eer, moments_report, MomentLevel, MomentReport};
use crate::vae::{
    extract_codes, train_autoencoder, train_vae, train_vae_from, Architecture, CodeModel,
    TrainHistory, VaeTrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrontEnd {
    /// The input vectors themselves.
    Raw,
    /// Deterministic auto-encoder codes.
    A,
    /// VAE codes.
    V,
    /// Cohesive VAE codes.
    C,
}

impl FrontEnd {
    pub const ALL: [FrontEnd; 4] = [FrontEnd::Raw, FrontEnd::A, FrontEnd::V, FrontEnd::C];

    pub fn name(self) -> &'static str {
        match self {
            FrontEnd::Raw => "raw",
            FrontEnd::A => "a",
            FrontEnd::V => "v",
            FrontEnd::C => "c",
        }
    }

    fn index(self) -> usize {
        FrontEnd::ALL.iter().position(|f| *f == self).unwrap()
    }
}

impl fmt::Display for FrontEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrontEnd {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrontEnd::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown front-end `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Generates train and eval speakers together; `n_speakers` must cover
    /// both.
    pub synth: SynthConfig,
    pub train_speakers: usize,
    pub n_target: usize,
    pub n_nontarget: usize,
    pub arch: Architecture,
    /// Plain VAE; also the starting point of the cohesive run.
    pub vae: VaeTrainConfig,
    /// Epochs of cohesive training on top of the plain VAE.
    pub cohesive_epochs: usize,
    pub cohesive_weight: f64,
    pub ae: VaeTrainConfig,
    pub backend: SystemConfig,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            synth: SynthConfig {
                n_speakers: 250,
                ..SynthConfig::default()
            },
            train_speakers: 200,
            n_target: 2000,
            n_nontarget: 2000,
            arch: Architecture::desk(),
            vae: VaeTrainConfig {
                epochs: 60,
                ..VaeTrainConfig::default()
            },
            cohesive_epochs: 30,
            cohesive_weight: 10.0,
            ae: VaeTrainConfig {
                epochs: 60,
                ..VaeTrainConfig::default()
            },
            backend: SystemConfig::default(),
            seed: 0,
        }
    }
}

impl GridConfig {
    /// Copy with every seed derived from `seed`.
    pub fn with_seed(&self, seed: u64) -> GridConfig {
        let mut c = self.clone();
        c.seed = seed;
        c.synth.seed = seed;
        c.vae.seed = seed.wrapping_add(1);
        c.ae.seed = seed.wrapping_add(2);
        c
    }

    fn cohesive(&self) -> VaeTrainConfig {
        VaeTrainConfig {
            cohesive_weight: self.cohesive_weight,
            epochs: self.cohesive_epochs,
            seed: self.vae.seed.wrapping_add(1),
            ..self.vae.clone()
        }
    }
}

/// One scored cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub front: FrontEnd,
    pub back: BackendKind,
    pub eer: f64,
    pub scores: ScoreSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndRun {
    pub front: FrontEnd,
    /// `VAE1` container, absent for raw vectors.
    pub model: Option<Vec<u8>>,
    pub history: Option<TrainHistory>,
    /// Diagnostics on the training set.
    pub utterance: MomentReport,
    pub speaker: MomentReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub trials: TrialList,
    pub front_ends: Vec<FrontEndRun>,
    /// Front-end major, back-end minor.
    pub cells: Vec<Cell>,
}

impl GridResult {
    pub fn eer(&self, front: FrontEnd, back: BackendKind) -> f64 {
        self.cell(front, back).eer
    }

    pub fn cell(&self, front: FrontEnd, back: BackendKind) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.front == front && c.back == back)
            .expect("complete grid")
    }

    pub fn front_end(&self, front: FrontEnd) -> &FrontEndRun {
        &self.front_ends[front.index()]
    }

    /// EER table in percent, one row per front-end.
    pub fn eer_table(&self) -> String {
        let mut s = String::from("front");
        for b in BackendKind::ALL {
            write!(s, ",{b}").unwrap();
        }
        s.push('\n');
        for f in FrontEnd::ALL {
            s.push_str(f.name());
            for b in BackendKind::ALL {
                write!(s, ",{:.2}", 100.0 * self.eer(f, b)).unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Pooled moments per front-end and level.
    pub fn moments_table(&self) -> String {
        let mut s = String::from("front,level,skew,kurt,abs_skew,abs_kurt\n");
        for fe in &self.front_ends {
            for r in [&fe.utterance, &fe.speaker] {
                writeln!(
                    s,
                    "{},{},{:.4},{:.4},{:.4},{:.4}",
                    fe.front,
                    r.level,
                    r.pooled_skew,
                    r.pooled_kurt,
                    r.pooled_abs_skew,
                    r.pooled_abs_kurt
                )
                .unwrap();
            }
        }
        s
    }
}

/// Train/eval split and trial list shared by every cell.
pub fn grid_data(cfg: &GridConfig) -> Result<(EmbeddingSet, EmbeddingSet, TrialList)> {
    if cfg.train_speakers == 0 || cfg.train_speakers >= cfg.synth.n_speakers {
        return Err(Error::InvalidConfig(format!(
            "train_speakers must be in 1..{}",
            cfg.synth.n_speakers
        )));
    }
    let (all, _) = generate_synthetic(&cfg.synth)?;
    let (train, eval) = all.split_speakers(cfg.train_speakers);
    let trials = make_trials(&eval, cfg.n_target, cfg.n_nontarget, cfg.seed, false)?;
    Ok((train, eval, trials))
}

/// Runs the whole grid. Deterministic in `cfg`.
pub fn run_grid(cfg: &GridConfig) -> Result<GridResult> {
    let (train, eval, trials) = grid_data(cfg)?;

    let (ae, ae_hist) = train_autoencoder(&train, &cfg.arch, &cfg.ae)?;
    let (vae, vae_hist) = train_vae(&train, &cfg.arch, &cfg.vae)?;
    let (coh, coh_hist) = train_vae_from(&train, vae.clone(), &cfg.cohesive())?;
    let models: [(FrontEnd, Option<(CodeModel, TrainHistory)>); 4] = [
        (FrontEnd::Raw, None),
        (FrontEnd::A, Some((ae.into(), ae_hist))),
        (FrontEnd::V, Some((vae.into(), vae_hist))),
        (FrontEnd::C, Some((coh.into(), coh_hist))),
    ];

    let mut front_ends = Vec::new();
    let mut cells = Vec::new();
    for (front, model) in models {
        let (tr, ev) = match &model {
            Some((m, _)) => (extract_codes(m, &train)?, extract_codes(m, &eval)?),
            None => (train.clone(), eval.clone()),
        };
        for back in BackendKind::ALL {
            let sys = ScoringSystem::fit(back, &tr, &cfg.backend)?;
            let scores = sys.score_trials(&ev, &ev, &trials)?;
            let eer = compute_eer(&scores, &trials)?.eer;
            cells.push(Cell {
                front,
                back,
                eer,
                scores,
            });
        }
        let (bytes, history) = match model {
            Some((m, h)) => (Some(m.to_bytes()), Some(h)),
            None => (None, None),
        };
        front_ends.push(FrontEndRun {
            front,
            model: bytes,
            history,
            utterance: moments_report(&tr, MomentLevel::Utterance)?,
            speaker: moments_report(&tr, MomentLevel::Speaker)?,
        });
    }
    Ok(GridResult {
        trials,
        front_ends,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in FrontEnd::ALL {
            assert_eq!(f.name().parse::<FrontEnd>().unwrap(), f);
        }
    }

    #[test]
    fn tiny_grid_has_every_cell() {
        let cfg = GridConfig {
            synth: SynthConfig {
                n_speakers: 30,
                utts_per_speaker: 5,
                obs_dim: 6,
                latent_dim: 2,
                ..SynthConfig::default()
            },
            train_speakers: 20,
            n_target: 40,
            n_nontarget: 40,
            arch: Architecture {
                hidden_width: 8,
                code_dim: 3,
                ..Architecture::desk()
            },
            vae: VaeTrainConfig {
                epochs: 2,
                ..VaeTrainConfig::default()
            },
            cohesive_epochs: 1,
            ae: VaeTrainConfig {
                epochs: 2,
                ..VaeTrainConfig::default()
            },
            ..GridConfig::default()
        };
        let r = run_grid(&cfg).unwrap();
        assert_eq!(r.cells.len(), 20);
        assert_eq!(r.eer_table().lines().count(), 5);
        assert_eq!(r.front_ends.len(), 4);
        assert!(r.front_end(FrontEnd::Raw).model.is_none());
        assert_eq!(run_grid(&cfg).unwrap(), r);
    }
}
