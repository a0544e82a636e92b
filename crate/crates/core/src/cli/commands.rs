use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::{key, Kind, RunConfig, Schema};
use crate::backend::{
    cosine_score, fit_lda, fit_pca, fit_whitener, length_normalize, score_trials, PldaBackend,
    Projection, ScoreSet,
};
use crate::data::{
    generate_synthetic, load_embeddings, load_scores, load_trials, make_trials, read_file,
    save_embeddings, save_scores, save_trials, write_file, EmbeddingFormat, EmbeddingSet,
    SynthConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_eer, moments_report, MomentLevel, MomentReport};
use crate::nn::AdamConfig;
use crate::pipeline::{run_grid, GridConfig};
use crate::vae::{
    extract_codes, train_autoencoder, train_vae, train_vae_from, Architecture, CodeModel,
    TrainHistory, VaeTrainConfig,
};

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub schema: Schema,
    pub run: fn(&RunConfig, u64) -> Result<String>,
}

pub static SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "synth",
        about: "Generate warped synthetic embeddings with known PLDA parameters",
        schema: SYNTH,
        run: synth,
    },
    Subcommand {
        name: "train-vae",
        about: "Train a VAE (cohesive when cohesive_weight > 0) on labeled embeddings",
        schema: TRAIN_VAE,
        run: train_vae_cmd,
    },
    Subcommand {
        name: "train-ae",
        about: "Train a deterministic auto-encoder with the same architecture",
        schema: TRAIN_AE,
        run: train_ae_cmd,
    },
    Subcommand {
        name: "extract",
        about: "Map embeddings to codes with a trained model",
        schema: EXTRACT,
        run: extract,
    },
    Subcommand {
        name: "fit-backend",
        about: "Fit a pca, lda, whiten or plda back-end on training embeddings",
        schema: FIT_BACKEND,
        run: fit_backend,
    },
    Subcommand {
        name: "score",
        about: "Score a trial list with cosine or PLDA, optionally after a projection",
        schema: SCORE,
        run: score,
    },
    Subcommand {
        name: "eval",
        about: "Compute the EER (and optionally DET points) of a score file",
        schema: EVAL,
        run: eval,
    },
    Subcommand {
        name: "moments",
        about: "Per-dimension and pooled skewness and excess kurtosis",
        schema: MOMENTS,
        run: moments,
    },
    Subcommand {
        name: "pipeline",
        about: "Run a named experiment preset end to end",
        schema: PIPELINE,
        run: pipeline,
    },
];

const SYNTH: Schema = &[
    key(
        "out",
        Kind::Path,
        None,
        "embedding file (.csv for CSV, else binary)",
    ),
    key(
        "truth",
        Kind::Path,
        Some(""),
        "ground-truth parameters as text",
    ),
    key(
        "eval_out",
        Kind::Path,
        Some(""),
        "file for the held-out speakers",
    ),
    key(
        "eval_speakers",
        Kind::Int,
        Some("0"),
        "speakers moved to eval_out",
    ),
    key(
        "trials",
        Kind::Path,
        Some(""),
        "trial list over the eval speakers",
    ),
    key("n_target", Kind::Int, Some("2000"), "target trials"),
    key("n_nontarget", Kind::Int, Some("2000"), "nontarget trials"),
    key("n_speakers", Kind::Int, Some("200"), "speakers in total"),
    key(
        "utts_per_speaker",
        Kind::Int,
        Some("10"),
        "utterances per speaker",
    ),
    key("obs_dim", Kind::Int, Some("20"), "embedding dimension"),
    key("latent_dim", Kind::Int, Some("5"), "speaker subspace rank"),
    key(
        "within_scale",
        Kind::Real,
        Some("1"),
        "multiplier on the within-speaker covariance",
    ),
    key(
        "mean_scale",
        Kind::Real,
        Some("1"),
        "scale of the global mean",
    ),
    key("warp", Kind::Str, Some("cubic"), "identity, cubic or exp"),
    key("warp_strength", Kind::Real, Some("0.2"), "warp gamma"),
];

const ARCH_AND_TRAINING: [super::config::Key; 12] = [
    key(
        "hidden_width",
        Kind::Int,
        Some("64"),
        "units per hidden layer",
    ),
    key(
        "encoder_hidden",
        Kind::Int,
        Some("3"),
        "hidden layers in the encoder",
    ),
    key(
        "decoder_hidden",
        Kind::Int,
        Some("2"),
        "hidden layers in the decoder",
    ),
    key("code_dim", Kind::Int, Some("8"), "code dimension"),
    key(
        "activation",
        Kind::Str,
        Some("tanh"),
        "tanh, relu or linear",
    ),
    key("recon_weight", Kind::Real, Some("1"), "alpha"),
    key("epochs", Kind::Int, Some("50"), "passes over the data"),
    key("batch_size", Kind::Int, Some("32"), "minibatch size"),
    key("lr", Kind::Real, Some("0.001"), "Adam step size"),
    key(
        "center_inputs",
        Kind::Bool,
        Some("false"),
        "train on mean-removed inputs",
    ),
    key("train", Kind::Path, None, "labeled training embeddings"),
    key("out", Kind::Path, None, "model file"),
];

const TRAIN_VAE: Schema = &{
    let a = ARCH_AND_TRAINING;
    [
        a[10],
        a[11],
        key("history", Kind::Path, Some(""), "per-epoch loss CSV"),
        key(
            "init",
            Kind::Path,
            Some(""),
            "VAE to continue training from",
        ),
        a[0],
        a[1],
        a[2],
        a[3],
        a[4],
        key("kl_weight", Kind::Real, Some("1"), "beta"),
        a[5],
        key("cohesive_weight", Kind::Real, Some("0"), "lambda"),
        key(
            "samples_per_input",
            Kind::Int,
            Some("1"),
            "reparameterized draws per input",
        ),
        a[6],
        a[7],
        a[8],
        a[9],
    ]
};

const TRAIN_AE: Schema = &{
    let a = ARCH_AND_TRAINING;
    [
        a[10],
        a[11],
        key("history", Kind::Path, Some(""), "per-epoch loss CSV"),
        a[0],
        a[1],
        a[2],
        a[3],
        a[4],
        a[5],
        a[6],
        a[7],
        a[8],
        a[9],
    ]
};

const EXTRACT: Schema = &[
    key("model", Kind::Path, None, "VAE or auto-encoder file"),
    key("input", Kind::Path, None, "embeddings to encode"),
    key("out", Kind::Path, None, "code file"),
];

const FIT_BACKEND: Schema = &[
    key("kind", Kind::Str, None, "pca, lda, whiten or plda"),
    key("train", Kind::Path, None, "labeled training embeddings"),
    key("out", Kind::Path, None, "back-end file"),
    key(
        "projection",
        Kind::Path,
        Some(""),
        "plda only: project and length-normalize first",
    ),
    key(
        "dim",
        Kind::Int,
        Some("0"),
        "pca/lda output dim, 0 = min(D-1, 8)",
    ),
    key(
        "plda_rank",
        Kind::Int,
        Some("0"),
        "speaker subspace rank, 0 = full",
    ),
    key("plda_iters", Kind::Int, Some("10"), "EM iterations"),
];

const SCORE: Schema = &[
    key("method", Kind::Str, None, "cosine or plda"),
    key("enroll", Kind::Path, None, "enrollment embeddings"),
    key(
        "test",
        Kind::Path,
        Some(""),
        "test embeddings, default enroll",
    ),
    key("trials", Kind::Path, None, "trial list"),
    key("out", Kind::Path, None, "score file"),
    key("model", Kind::Path, Some(""), "PLDA back-end file"),
    key(
        "projection",
        Kind::Path,
        Some(""),
        "projection applied before scoring",
    ),
];

const EVAL: Schema = &[
    key("scores", Kind::Path, None, "score file"),
    key("trials", Kind::Path, None, "trial list with labels"),
    key("out", Kind::Path, None, "result CSV"),
    key("det", Kind::Path, Some(""), "DET points CSV"),
];

const MOMENTS: Schema = &[
    key("input", Kind::Path, None, "labeled embeddings"),
    key("out", Kind::Path, None, "report CSV"),
    key(
        "level",
        Kind::Str,
        Some("both"),
        "utterance, speaker or both",
    ),
];

const PIPELINE: Schema = &[
    key(
        "preset",
        Kind::Str,
        Some("table1-synthetic"),
        "experiment preset",
    ),
    key("out_dir", Kind::Path, None, "directory for every artifact"),
    key(
        "n_speakers",
        Kind::Int,
        Some("250"),
        "train plus eval speakers",
    ),
    key(
        "train_speakers",
        Kind::Int,
        Some("200"),
        "speakers used for training",
    ),
    key(
        "utts_per_speaker",
        Kind::Int,
        Some("10"),
        "utterances per speaker",
    ),
    key("obs_dim", Kind::Int, Some("20"), "embedding dimension"),
    key("latent_dim", Kind::Int, Some("5"), "speaker subspace rank"),
    key("warp", Kind::Str, Some("cubic"), "identity, cubic or exp"),
    key("warp_strength", Kind::Real, Some("0.2"), "warp gamma"),
    key("n_target", Kind::Int, Some("2000"), "target trials"),
    key("n_nontarget", Kind::Int, Some("2000"), "nontarget trials"),
    key(
        "hidden_width",
        Kind::Int,
        Some("64"),
        "units per hidden layer",
    ),
    key("code_dim", Kind::Int, Some("8"), "code dimension"),
    key(
        "epochs",
        Kind::Int,
        Some("60"),
        "VAE and auto-encoder epochs",
    ),
    key(
        "cohesive_epochs",
        Kind::Int,
        Some("30"),
        "cohesive epochs on top of the VAE",
    ),
    key("cohesive_weight", Kind::Real, Some("10"), "lambda"),
    key(
        "proj_dim",
        Kind::Int,
        Some("0"),
        "pca/lda dim, 0 = min(D-1, 8)",
    ),
    key("plda_iters", Kind::Int, Some("10"), "EM iterations"),
];

fn load(path: &Path) -> Result<EmbeddingSet> {
    load_embeddings(path, EmbeddingFormat::from_path(path))
}

fn save(set: &EmbeddingSet, path: &Path) -> Result<()> {
    save_embeddings(set, path, EmbeddingFormat::from_path(path))
}

fn synth(c: &RunConfig, seed: u64) -> Result<String> {
    let cfg = SynthConfig {
        n_speakers: c.usize("n_speakers"),
        utts_per_speaker: c.usize("utts_per_speaker"),
        obs_dim: c.usize("obs_dim"),
        latent_dim: c.usize("latent_dim"),
        within_scale: c.f64("within_scale"),
        warp: c.parsed("warp")?,
        warp_strength: c.f64("warp_strength"),
        mean_scale: c.f64("mean_scale"),
        seed,
    };
    let (all, truth) = generate_synthetic(&cfg)?;
    let n_eval = c.usize("eval_speakers");
    let (train, eval) = match (n_eval, c.opt_path("eval_out")) {
        (0, None) => (all, None),
        (n, Some(_)) if n > 0 && n < cfg.n_speakers => {
            let (tr, ev) = all.split_speakers(cfg.n_speakers - n);
            (tr, Some(ev))
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "eval_out needs eval_speakers in 1..{}",
                cfg.n_speakers
            )))
        }
    };
    save(&train, &c.path("out"))?;
    if let Some(path) = c.opt_path("truth") {
        write_file(&path, truth.to_text().as_bytes())?;
    }
    let mut summary = format!("synth: {} utterances, dim {}", train.len(), train.dim());
    if let Some(ev) = &eval {
        save(ev, &c.path("eval_out"))?;
        write!(summary, ", {} held out", ev.len()).unwrap();
    }
    if let Some(path) = c.opt_path("trials") {
        let pool = eval.as_ref().unwrap_or(&train);
        let trials = make_trials(
            pool,
            c.usize("n_target"),
            c.usize("n_nontarget"),
            seed,
            false,
        )?;
        save_trials(&trials, &path)?;
        write!(summary, ", {} trials", trials.len()).unwrap();
    }
    Ok(summary)
}

fn architecture(c: &RunConfig) -> Result<Architecture> {
    Ok(Architecture {
        hidden_width: c.usize("hidden_width"),
        encoder_hidden: c.usize("encoder_hidden"),
        decoder_hidden: c.usize("decoder_hidden"),
        code_dim: c.usize("code_dim"),
        activation: c.parsed("activation")?,
    })
}

fn training(c: &RunConfig, seed: u64) -> VaeTrainConfig {
    VaeTrainConfig {
        recon_weight: c.f64("recon_weight"),
        epochs: c.usize("epochs"),
        batch_size: c.usize("batch_size"),
        center_inputs: c.bool("center_inputs"),
        seed,
        adam: AdamConfig {
            lr: c.f64("lr"),
            ..AdamConfig::default()
        },
        ..VaeTrainConfig::default()
    }
}

fn finish_training(
    c: &RunConfig,
    model: CodeModel,
    hist: &TrainHistory,
    what: &str,
) -> Result<String> {
    write_file(&c.path("out"), &model.to_bytes())?;
    if let Some(path) = c.opt_path("history") {
        write_file(&path, hist.to_csv().as_bytes())?;
    }
    let last = hist.epochs.last().map_or(f64::NAN, |e| e.loss.total);
    Ok(format!(
        "{what}: {} epochs, final loss {last:.4}, code dim {}",
        hist.epochs.len(),
        model.code_dim()
    ))
}

fn train_vae_cmd(c: &RunConfig, seed: u64) -> Result<String> {
    let data = load(&c.path("train"))?;
    let cfg = VaeTrainConfig {
        kl_weight: c.f64("kl_weight"),
        cohesive_weight: c.f64("cohesive_weight"),
        samples_per_input: c.usize("samples_per_input"),
        ..training(c, seed)
    };
    let (model, hist) = match c.opt_path("init") {
        Some(path) => match CodeModel::from_bytes(&read_file(&path)?)? {
            CodeModel::Vae(init) => train_vae_from(&data, init, &cfg)?,
            CodeModel::Ae(_) => {
                return Err(Error::InvalidConfig(format!(
                    "{} holds an auto-encoder, not a VAE",
                    path.display()
                )))
            }
        },
        None => train_vae(&data, &architecture(c)?, &cfg)?,
    };
    finish_training(c, model.into(), &hist, "train-vae")
}

fn train_ae_cmd(c: &RunConfig, seed: u64) -> Result<String> {
    let data = load(&c.path("train"))?;
    let (model, hist) = train_autoencoder(&data, &architecture(c)?, &training(c, seed))?;
    finish_training(c, model.into(), &hist, "train-ae")
}

fn extract(c: &RunConfig, _seed: u64) -> Result<String> {
    let model = CodeModel::from_bytes(&read_file(&c.path("model"))?)?;
    let codes = extract_codes(&model, &load(&c.path("input"))?)?;
    save(&codes, &c.path("out"))?;
    Ok(format!(
        "extract: {} codes of dim {}",
        codes.len(),
        codes.dim()
    ))
}

fn fit_backend(c: &RunConfig, _seed: u64) -> Result<String> {
    let train = load(&c.path("train"))?;
    let n_spk = train.speakers().len();
    let kind = c.str("kind");
    let auto_dim = |lda: bool| {
        c.auto("dim").unwrap_or_else(|| {
            let d = train.dim().saturating_sub(1).clamp(1, 8);
            if lda {
                d.min(n_spk.saturating_sub(1)).max(1)
            } else {
                d
            }
        })
    };
    let (bytes, detail) = match kind {
        "pca" | "lda" | "whiten" => {
            if c.opt_path("projection").is_some() {
                return Err(Error::InvalidConfig(
                    "projection applies to plda only".into(),
                ));
            }
            let p = match kind {
                "pca" => fit_pca(&train, auto_dim(false))?,
                "lda" => fit_lda(&train, auto_dim(true))?,
                _ => fit_whitener(&train)?,
            };
            let detail = format!("{} -> {}", p.input_dim(), p.output_dim());
            (p.to_bytes(), detail)
        }
        "plda" => {
            let data = match c.opt_path("projection") {
                Some(path) => {
                    let p = Projection::from_bytes(&read_file(&path)?)?;
                    train.map_vectors(p.output_dim(), |v| length_normalize(&p.apply(v)?))?
                }
                None => train,
            };
            let rank = c
                .auto("plda_rank")
                .unwrap_or(data.dim())
                .min(data.dim())
                .min(n_spk.saturating_sub(1).max(1));
            let b = PldaBackend::fit(&data, rank, c.usize("plda_iters"))?;
            (b.to_bytes(), format!("dim {}, rank {rank}", data.dim()))
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown back-end kind `{other}` (pca, lda, whiten, plda)"
            )))
        }
    };
    write_file(&c.path("out"), &bytes)?;
    Ok(format!("fit-backend: {kind}, {detail}"))
}

fn score(c: &RunConfig, _seed: u64) -> Result<String> {
    let enroll = load(&c.path("enroll"))?;
    let test = match c.opt_path("test") {
        Some(p) => load(&p)?,
        None => enroll.clone(),
    };
    let trials = load_trials(&c.path("trials"))?;
    let projection = match c.opt_path("projection") {
        Some(p) => Some(Projection::from_bytes(&read_file(&p)?)?),
        None => None,
    };
    let project = |v: &[f64]| -> Result<Vec<f64>> {
        match &projection {
            Some(p) => p.apply(v),
            None => Ok(v.to_vec()),
        }
    };
    let method = c.str("method");
    let scores: ScoreSet = match method {
        "cosine" => score_trials(&enroll, &test, &trials, |e, t| {
            cosine_score(&project(e)?, &project(t)?)
        })?,
        "plda" => {
            let path = c
                .opt_path("model")
                .ok_or_else(|| Error::InvalidConfig("method plda needs a `model` file".into()))?;
            let b = PldaBackend::from_bytes(&read_file(&path)?)?;
            let prep = |v: &[f64]| -> Result<Vec<f64>> {
                match projection {
                    Some(_) => length_normalize(&project(v)?),
                    None => Ok(v.to_vec()),
                }
            };
            score_trials(&enroll, &test, &trials, |e, t| {
                b.score_pair(&prep(e)?, &prep(t)?)
            })?
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown scoring method `{other}` (cosine, plda)"
            )))
        }
    };
    save_scores(&trials, scores.as_slice(), &c.path("out"))?;
    Ok(format!("score: {method}, {} trials", scores.len()))
}

fn eval(c: &RunConfig, _seed: u64) -> Result<String> {
    let lines = load_scores(&c.path("scores"))?;
    let trials = load_trials(&c.path("trials"))?;
    let by_pair: HashMap<(&str, &str), f64> = lines
        .iter()
        .map(|(e, t, s)| ((e.as_str(), t.as_str()), *s))
        .collect();
    let scores = trials
        .iter()
        .map(|t| {
            by_pair
                .get(&(t.enroll.as_str(), t.test.as_str()))
                .copied()
                .ok_or_else(|| Error::UnknownTrialId(format!("{} {}", t.enroll, t.test)))
        })
        .collect::<Result<Vec<_>>>()?;
    let r = compute_eer(&ScoreSet::new(scores)?, &trials)?;
    let out = format!("eer,threshold\n{},{}\n", r.eer, r.threshold_at_eer);
    write_file(&c.path("out"), out.as_bytes())?;
    if let Some(path) = c.opt_path("det") {
        write_file(&path, r.det_csv().as_bytes())?;
    }
    Ok(format!(
        "eval: {} over {} trials",
        r.report_line(),
        trials.len()
    ))
}

fn moments_csv(reports: &[MomentReport]) -> String {
    let mut s = String::from("level,dim,skew,kurt\n");
    for r in reports {
        for (d, (sk, ku)) in r.skew.iter().zip(&r.kurt).enumerate() {
            let f = |v: &Option<f64>| v.map_or("nan".to_owned(), |x| format!("{x:.6}"));
            writeln!(s, "{},{d},{},{}", r.level, f(sk), f(ku)).unwrap();
        }
        writeln!(
            s,
            "{},mean,{:.6},{:.6}",
            r.level, r.pooled_skew, r.pooled_kurt
        )
        .unwrap();
        writeln!(
            s,
            "{},mean_abs,{:.6},{:.6}",
            r.level, r.pooled_abs_skew, r.pooled_abs_kurt
        )
        .unwrap();
    }
    s
}

fn moments(c: &RunConfig, _seed: u64) -> Result<String> {
    let data = load(&c.path("input"))?;
    let levels: &[MomentLevel] = match c.str("level") {
        "utterance" => &[MomentLevel::Utterance],
        "speaker" => &[MomentLevel::Speaker],
        "both" => &[MomentLevel::Utterance, MomentLevel::Speaker],
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown level `{other}` (utterance, speaker, both)"
            )))
        }
    };
    let reports = levels
        .iter()
        .map(|&l| moments_report(&data, l))
        .collect::<Result<Vec<_>>>()?;
    write_file(&c.path("out"), moments_csv(&reports).as_bytes())?;
    let u = &reports[0];
    Ok(format!(
        "moments: {} |skew| {:.4}, |kurt| {:.4}",
        u.level, u.pooled_abs_skew, u.pooled_abs_kurt
    ))
}

fn grid_config(c: &RunConfig, seed: u64) -> Result<GridConfig> {
    let mut g = GridConfig::default();
    g.synth.n_speakers = c.usize("n_speakers");
    g.synth.utts_per_speaker = c.usize("utts_per_speaker");
    g.synth.obs_dim = c.usize("obs_dim");
    g.synth.latent_dim = c.usize("latent_dim");
    g.synth.warp = c.parsed("warp")?;
    g.synth.warp_strength = c.f64("warp_strength");
    g.train_speakers = c.usize("train_speakers");
    g.n_target = c.usize("n_target");
    g.n_nontarget = c.usize("n_nontarget");
    g.arch.hidden_width = c.usize("hidden_width");
    g.arch.code_dim = c.usize("code_dim");
    g.vae.epochs = c.usize("epochs");
    g.ae.epochs = c.usize("epochs");
    g.cohesive_epochs = c.usize("cohesive_epochs");
    g.cohesive_weight = c.f64("cohesive_weight");
    g.backend.proj_dim = c.auto("proj_dim");
    g.backend.plda_iters = c.usize("plda_iters");
    Ok(g.with_seed(seed))
}

fn pipeline(c: &RunConfig, seed: u64) -> Result<String> {
    match c.str("preset") {
        "table1-synthetic" => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset `{other}` (table1-synthetic)"
            )))
        }
    }
    let dir = c.path("out_dir");
    let r = run_grid(&grid_config(c, seed)?)?;
    save_trials(&r.trials, &dir.join("trials.txt"))?;
    for cell in &r.cells {
        let path = dir
            .join("scores")
            .join(format!("{}-{}.txt", cell.front, cell.back));
        save_scores(&r.trials, cell.scores.as_slice(), &path)?;
    }
    for fe in &r.front_ends {
        if let Some(bytes) = &fe.model {
            write_file(&dir.join("models").join(format!("{}.vae", fe.front)), bytes)?;
        }
        if let Some(h) = &fe.history {
            write_file(
                &dir.join("history").join(format!("{}.csv", fe.front)),
                h.to_csv().as_bytes(),
            )?;
        }
    }
    write_file(&dir.join("eer_grid.csv"), r.eer_table().as_bytes())?;
    write_file(&dir.join("moments.csv"), r.moments_table().as_bytes())?;
    Ok(format!(
        "pipeline: table1-synthetic, {} cells, {} trials, written to {}",
        r.cells.len(),
        r.trials.len(),
        dir.display()
    ))
}
