//! Variational auto-encoder front-ends.
//!
//! The encoder maps an embedding `x` to `[μ(x), log σ²(x)]`, the decoder maps
//! a code `z` back to the embedding space, and `μ(x)` is used as the
//! regularized code. The cohesive variant adds a Gaussian log-density of
//! `μ(x)` around its speaker's mean code. A deterministic auto-encoder with
//! the same layout serves as the unregularized baseline.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::codec::{Reader, Writer};
use crate::data::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::nn::{adam_step, init_mlp_with, Activation, AdamConfig, AdamState, GradientSet, Mlp};

/// Layer layout shared by the VAE and the auto-encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub hidden_width: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub code_dim: usize,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::desk()
    }
}

impl Architecture {
    /// 7 layers: 3 hidden + code head in the encoder, 2 hidden + output in
    /// the decoder; hidden width 64, code dim 8.
    pub fn desk() -> Self {
        Architecture {
            hidden_width: 64,
            encoder_hidden: 3,
            decoder_hidden: 2,
            code_dim: 8,
            activation: Activation::Tanh,
        }
    }

    /// Same layout at hidden width 1800 and code dim 200, sized for
    /// 512-dimensional embeddings.
    pub fn full_size() -> Self {
        Architecture {
            hidden_width: 1800,
            code_dim: 200,
            ..Architecture::desk()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.code_dim == 0 {
            return Err(Error::InvalidArchitecture(
                "hidden width and code dim must be positive".into(),
            ));
        }
        Ok(())
    }

    fn widths(&self, from: usize, hidden: usize, to: usize) -> (Vec<usize>, Vec<Activation>) {
        let mut widths = vec![from];
        widths.extend(std::iter::repeat_n(self.hidden_width, hidden));
        widths.push(to);
        let mut acts = vec![self.activation; hidden];
        acts.push(Activation::Linear);
        (widths, acts)
    }

    fn init(
        &self,
        input_dim: usize,
        encoder_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Mlp, Mlp)> {
        self.validate()?;
        let (w, a) = self.widths(input_dim, self.encoder_hidden, encoder_out);
        let encoder = init_mlp_with(&w, &a, rng)?;
        let (w, a) = self.widths(self.code_dim, self.decoder_hidden, input_dim);
        let decoder = init_mlp_with(&w, &a, rng)?;
        Ok((encoder, decoder))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    encoder: Mlp,
    decoder: Mlp,
    input_dim: usize,
    code_dim: usize,
}

impl VaeModel {
    pub fn new(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let (input_dim, code_dim) = check_pair(&encoder, &decoder, 2)?;
        Ok(VaeModel {
            encoder,
            decoder,
            input_dim,
            code_dim,
        })
    }

    pub fn init(input_dim: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, d) = arch.init(input_dim, 2 * arch.code_dim, &mut rng)?;
        VaeModel::new(e, d)
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn num_parameters(&self) -> usize {
        self.encoder.num_parameters() + self.decoder.num_parameters()
    }

    /// Encoder then decoder parameters, flattened.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.encoder.parameters();
        p.extend(self.decoder.parameters());
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let n = self.encoder.num_parameters();
        if params.len() != self.num_parameters() {
            return Err(Error::shape(self.num_parameters(), params.len()));
        }
        self.encoder.set_parameters(&params[..n])?;
        self.decoder.set_parameters(&params[n..])
    }

    /// `(μ, log σ²)` for every row of `x`.
    pub fn encode_batch(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let out = self.encoder.predict(x)?;
        let d = self.code_dim;
        Ok((out.col_range(0, d), out.col_range(d, 2 * d)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container_bytes(&self.encoder, &self.decoder, self.input_dim, self.code_dim)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match CodeModel::from_bytes(bytes)? {
            CodeModel::Vae(m) => Ok(m),
            CodeModel::Ae(_) => Err(Error::Format("container holds an auto-encoder".into())),
        }
    }
}

/// Deterministic auto-encoder: the encoder emits the code directly.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    encoder: Mlp,
    decoder: Mlp,
    input_dim: usize,
    code_dim: usize,
}

impl AutoEncoder {
    pub fn new(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let (input_dim, code_dim) = check_pair(&encoder, &decoder, 1)?;
        Ok(AutoEncoder {
            encoder,
            decoder,
            input_dim,
            code_dim,
        })
    }

    pub fn init(input_dim: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, d) = arch.init(input_dim, arch.code_dim, &mut rng)?;
        AutoEncoder::new(e, d)
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim, x.len())?;
        Ok(self.encoder.predict(&Matrix::from_rows(&[x]))?.into_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container_bytes(&self.encoder, &self.decoder, self.input_dim, self.code_dim)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match CodeModel::from_bytes(bytes)? {
            CodeModel::Ae(m) => Ok(m),
            CodeModel::Vae(_) => Err(Error::Format("container holds a VAE".into())),
        }
    }
}

/// Either kind of front-end, as read from a `VAE1` container.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeModel {
    Vae(VaeModel),
    Ae(AutoEncoder),
}

impl CodeModel {
    pub fn input_dim(&self) -> usize {
        match self {
            CodeModel::Vae(m) => m.input_dim,
            CodeModel::Ae(m) => m.input_dim,
        }
    }

    pub fn code_dim(&self) -> usize {
        match self {
            CodeModel::Vae(m) => m.code_dim,
            CodeModel::Ae(m) => m.code_dim,
        }
    }

    fn encoder(&self) -> &Mlp {
        match self {
            CodeModel::Vae(m) => &m.encoder,
            CodeModel::Ae(m) => &m.encoder,
        }
    }

    /// Codes for every row: `μ(x)` for a VAE, the encoder output for an AE.
    pub fn codes(&self, x: &Matrix) -> Result<Matrix> {
        let out = self.encoder().predict(x)?;
        Ok(out.col_range(0, self.code_dim()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            CodeModel::Vae(m) => m.to_bytes(),
            CodeModel::Ae(m) => m.to_bytes(),
        }
    }

    /// `VAE1`: u32 input dim, u32 code dim, then length-prefixed `MLP1`
    /// encoder and decoder. The encoder width tells the two kinds apart.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, b"VAE1")?;
        let input_dim = r.u32()?;
        let code_dim = r.u32()?;
        let encoder = Mlp::from_bytes(r.blob()?)?;
        let decoder = Mlp::from_bytes(r.blob()?)?;
        r.finish()?;
        let model = if encoder.output_width() == 2 * code_dim {
            CodeModel::Vae(
                VaeModel::new(encoder, decoder).map_err(|e| Error::Format(e.to_string()))?,
            )
        } else {
            CodeModel::Ae(
                AutoEncoder::new(encoder, decoder).map_err(|e| Error::Format(e.to_string()))?,
            )
        };
        if model.input_dim() != input_dim || model.code_dim() != code_dim {
            return Err(Error::Format("header does not match networks".into()));
        }
        Ok(model)
    }
}

impl From<VaeModel> for CodeModel {
    fn from(m: VaeModel) -> Self {
        CodeModel::Vae(m)
    }
}

impl From<AutoEncoder> for CodeModel {
    fn from(m: AutoEncoder) -> Self {
        CodeModel::Ae(m)
    }
}

fn container_bytes(encoder: &Mlp, decoder: &Mlp, input_dim: usize, code_dim: usize) -> Vec<u8> {
    let mut w = Writer::new(b"VAE1");
    w.u32(input_dim);
    w.u32(code_dim);
    w.blob(&encoder.to_bytes());
    w.blob(&decoder.to_bytes());
    w.finish()
}

/// Returns `(input_dim, code_dim)` after checking that the encoder emits
/// `heads × code_dim` values and the decoder maps back to the input.
fn check_pair(encoder: &Mlp, decoder: &Mlp, heads: usize) -> Result<(usize, usize)> {
    let d = decoder.input_width();
    if encoder.output_width() != heads * d || decoder.output_width() != encoder.input_width() {
        return Err(Error::InvalidArchitecture(format!(
            "encoder {}→{} does not pair with decoder {}→{}",
            encoder.input_width(),
            encoder.output_width(),
            d,
            decoder.output_width()
        )));
    }
    Ok((encoder.input_width(), d))
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::shape(format!("vector of dim {expected}"), got));
    }
    Ok(())
}

pub fn encode(model: &VaeModel, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(model.input_dim, x.len())?;
    let (mu, lv) = model.encode_batch(&Matrix::from_rows(&[x]))?;
    Ok((mu.into_vec(), lv.into_vec()))
}

/// `z = μ + exp(logvar/2) ⊙ ε`
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    check_len(mu.len(), logvar.len())?;
    check_len(mu.len(), eps.len())?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, l), e)| m + (0.5 * l).exp() * e)
        .collect())
}

pub fn decode(model: &VaeModel, z: &[f64]) -> Result<Vec<f64>> {
    check_len(model.code_dim, z.len())?;
    Ok(model.decoder.predict(&Matrix::from_rows(&[z]))?.into_vec())
}

/// `KL(N(μ, diag e^{logvar}) ‖ N(0, I))`
pub fn kl_term(mu: &[f64], logvar: &[f64]) -> Result<f64> {
    check_len(mu.len(), logvar.len())?;
    Ok(0.5
        * mu.iter()
            .zip(logvar)
            .map(|(m, l)| m * m + l.exp() - 1.0 - l)
            .sum::<f64>())
}

/// `ln N(x; x̂, I)`
pub fn recon_term(x: &[f64], xhat: &[f64]) -> Result<f64> {
    check_len(x.len(), xhat.len())?;
    Ok(gauss_log_density(x, xhat))
}

/// `ln N(μ; s, I)`
pub fn cohesive_term(mu: &[f64], speaker_mean: &[f64]) -> Result<f64> {
    check_len(mu.len(), speaker_mean.len())?;
    Ok(gauss_log_density(mu, speaker_mean))
}

fn gauss_log_density(x: &[f64], mean: &[f64]) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq - 0.5 * x.len() as f64 * (2.0 * PI).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeTrainConfig {
    /// β
    pub kl_weight: f64,
    /// α
    pub recon_weight: f64,
    /// λ
    pub cohesive_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub samples_per_input: usize,
    /// Train on mean-removed inputs; the mean is folded back into the
    /// returned model so it still consumes raw embeddings.
    pub center_inputs: bool,
    pub adam: AdamConfig,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            kl_weight: 1.0,
            recon_weight: 1.0,
            cohesive_weight: 0.0,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            samples_per_input: 1,
            center_inputs: false,
            adam: AdamConfig::default(),
        }
    }
}

impl VaeTrainConfig {
    fn validate(&self) -> Result<()> {
        let weights = [self.kl_weight, self.recon_weight, self.cohesive_weight];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "loss weights must be finite and ≥ 0".into(),
            ));
        }
        if self.kl_weight == 0.0 && self.recon_weight == 0.0 {
            return Err(Error::InvalidConfig(
                "kl_weight and recon_weight are both zero".into(),
            ));
        }
        if self.batch_size == 0 || self.samples_per_input == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and samples_per_input must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// Mean `μ(x)` per speaker under the current encoder.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeakerMeanTable {
    means: BTreeMap<String, Vec<f64>>,
    counts: BTreeMap<String, usize>,
}

impl SpeakerMeanTable {
    pub fn compute(model: &VaeModel, data: &EmbeddingSet) -> Result<Self> {
        let mu = encode_all(model, data)?;
        Ok(SpeakerMeanTable::from_codes(data, &mu))
    }

    /// Means of the rows of `codes`, grouped by the speakers of `data`.
    pub fn from_codes(data: &EmbeddingSet, codes: &Matrix) -> Self {
        let mut table = SpeakerMeanTable::default();
        for (spk, idx) in data.speaker_groups() {
            let mut m = vec![0.0; codes.cols()];
            for &i in &idx {
                linalg::axpy(1.0, codes.row(i), &mut m);
            }
            let n = idx.len();
            m.iter_mut().for_each(|v| *v /= n as f64);
            table.means.insert(spk.to_owned(), m);
            table.counts.insert(spk.to_owned(), n);
        }
        table
    }

    pub fn get(&self, speaker: &str) -> Option<&[f64]> {
        self.means.get(speaker).map(Vec::as_slice)
    }

    pub fn count(&self, speaker: &str) -> Option<usize> {
        self.counts.get(speaker).copied()
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Loss value with its unweighted, batch-summed components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossComponents {
    pub total: f64,
    pub kl: f64,
    pub recon: f64,
    pub cohesive: f64,
}

impl LossComponents {
    fn add(&mut self, o: &LossComponents) {
        self.total += o.total;
        self.kl += o.kl;
        self.recon += o.recon;
        self.cohesive += o.cohesive;
    }

    fn scaled(&self, s: f64) -> LossComponents {
        LossComponents {
            total: self.total * s,
            kl: self.kl * s,
            recon: self.recon * s,
            cohesive: self.cohesive * s,
        }
    }

    fn is_finite(&self) -> bool {
        [self.total, self.kl, self.recon, self.cohesive]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub encoder: GradientSet,
    pub decoder: GradientSet,
}

impl VaeGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut g = self.encoder.flatten();
        g.extend(self.decoder.flatten());
        g
    }

    fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.decoder.is_finite()
    }
}

/// Per-row speaker means, or `None` when λ = 0 and a speaker is absent.
fn speaker_targets(
    speakers: &[&str],
    means: &SpeakerMeanTable,
    lambda: f64,
    d: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    speakers
        .iter()
        .map(|s| match means.get(s) {
            Some(m) if m.len() == d => Ok(Some(m.to_vec())),
            Some(m) => Err(Error::shape(format!("speaker mean of dim {d}"), m.len())),
            None if lambda > 0.0 => Err(Error::UnknownSpeaker((*s).to_owned())),
            None => Ok(None),
        })
        .collect()
}

/// `Σ_batch [β·kl − α·recon − λ·cohesive]` for rows of `x` with noise `eps`.
pub fn batch_loss(
    model: &VaeModel,
    x: &Matrix,
    speakers: &[&str],
    means: &SpeakerMeanTable,
    cfg: &VaeTrainConfig,
    eps: &Matrix,
) -> Result<LossComponents> {
    Ok(vae_loss(model, x, speakers, means, cfg, eps, false)?.0)
}

/// [`batch_loss`] together with its gradient; speaker means are constants.
pub fn batch_loss_and_grad(
    model: &VaeModel,
    x: &Matrix,
    speakers: &[&str],
    means: &SpeakerMeanTable,
    cfg: &VaeTrainConfig,
    eps: &Matrix,
) -> Result<(LossComponents, VaeGradients)> {
    let (loss, grads) = vae_loss(model, x, speakers, means, cfg, eps, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

fn vae_loss(
    model: &VaeModel,
    x: &Matrix,
    speakers: &[&str],
    means: &SpeakerMeanTable,
    cfg: &VaeTrainConfig,
    eps: &Matrix,
    want_grad: bool,
) -> Result<(LossComponents, Option<VaeGradients>)> {
    let (n, d) = (x.rows(), model.code_dim);
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if speakers.len() != n || eps.shape() != (n, d) {
        return Err(Error::shape(
            format!("{n} speaker ids and {n}x{d} noise"),
            format!(
                "{} ids and {}x{} noise",
                speakers.len(),
                eps.rows(),
                eps.cols()
            ),
        ));
    }
    let (alpha, beta, lambda) = (cfg.recon_weight, cfg.kl_weight, cfg.cohesive_weight);
    let targets = speaker_targets(speakers, means, lambda, d)?;

    let enc = model.encoder.forward(x)?;
    let out = enc.output();
    let mut z = Matrix::zeros(n, d);
    for i in 0..n {
        let row = out.row(i);
        let zr = reparameterize(&row[..d], &row[d..], eps.row(i))?;
        z.row_mut(i).copy_from_slice(&zr);
    }
    let dec = model.decoder.forward(&z)?;
    let xhat = dec.output();

    let mut loss = LossComponents::default();
    for i in 0..n {
        let row = out.row(i);
        let (mu, lv) = (&row[..d], &row[d..]);
        let kl = kl_term(mu, lv)?;
        let rec = recon_term(x.row(i), xhat.row(i))?;
        let coh = match &targets[i] {
            Some(s) => cohesive_term(mu, s)?,
            None => 0.0,
        };
        loss.kl += kl;
        loss.recon += rec;
        loss.cohesive += coh;
        loss.total += beta * kl - alpha * rec - lambda * coh;
    }
    if !want_grad {
        return Ok((loss, None));
    }

    let mut d_xhat = xhat.sub(x)?;
    d_xhat = d_xhat.scale(alpha);
    let (dec_grad, dz) = model.decoder.backward(&dec, &d_xhat)?;
    let mut d_out = Matrix::zeros(n, 2 * d);
    for i in 0..n {
        let row = out.row(i);
        let g = d_out.row_mut(i);
        for j in 0..d {
            let (mu, lv, e) = (row[j], row[d + j], eps[(i, j)]);
            let mut g_mu = dz[(i, j)] + beta * mu;
            if let Some(s) = &targets[i] {
                g_mu += lambda * (mu - s[j]);
            }
            g[j] = g_mu;
            g[d + j] = dz[(i, j)] * 0.5 * (0.5 * lv).exp() * e + 0.5 * beta * (lv.exp() - 1.0);
        }
    }
    let (enc_grad, _) = model.encoder.backward(&enc, &d_out)?;
    Ok((
        loss,
        Some(VaeGradients {
            encoder: enc_grad,
            decoder: dec_grad,
        }),
    ))
}

/// Reconstruction loss `−α·Σ recon` of the auto-encoder and its gradient.
pub fn ae_loss_and_grad(
    model: &AutoEncoder,
    x: &Matrix,
    alpha: f64,
) -> Result<(LossComponents, VaeGradients)> {
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let enc = model.encoder.forward(x)?;
    let dec = model.decoder.forward(enc.output())?;
    let xhat = dec.output();
    let mut loss = LossComponents::default();
    for i in 0..x.rows() {
        loss.recon += recon_term(x.row(i), xhat.row(i))?;
    }
    loss.total = -alpha * loss.recon;
    let (dec_grad, dz) = model.decoder.backward(&dec, &xhat.sub(x)?.scale(alpha))?;
    let (enc_grad, _) = model.encoder.backward(&enc, &dz)?;
    Ok((
        loss,
        VaeGradients {
            encoder: enc_grad,
            decoder: dec_grad,
        },
    ))
}

/// Epoch-mean loss components (per input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: LossComponents,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    /// `epoch,total,kl,recon,cohesive`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,total,kl,recon,cohesive\n");
        for e in &self.epochs {
            let l = &e.loss;
            writeln!(
                s,
                "{},{},{},{},{}",
                e.epoch, l.total, l.kl, l.recon, l.cohesive
            )
            .unwrap();
        }
        s
    }

    pub fn totals(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss.total).collect()
    }
}

/// μ(x) for every record, in order.
fn encode_all(model: &VaeModel, data: &EmbeddingSet) -> Result<Matrix> {
    check_len(model.input_dim, data.dim())?;
    Ok(model.encode_batch(&data.to_matrix())?.0)
}

/// Replaces each record's vector by its code.
pub fn extract_codes(model: &CodeModel, data: &EmbeddingSet) -> Result<EmbeddingSet> {
    check_len(model.input_dim(), data.dim())?;
    const CHUNK: usize = 512;
    let x = data.to_matrix();
    let mut codes = Matrix::zeros(data.len(), model.code_dim());
    for start in (0..data.len()).step_by(CHUNK) {
        let idx: Vec<usize> = (start..(start + CHUNK).min(data.len())).collect();
        let c = model.codes(&x.select_rows(&idx))?;
        for (k, &i) in idx.iter().enumerate() {
            codes.row_mut(i).copy_from_slice(c.row(k));
        }
    }
    data.with_vectors(&codes)
}

fn check_dataset(data: &EmbeddingSet, input_dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != input_dim {
        return Err(Error::DimMismatch {
            expected: input_dim,
            got: data.dim(),
        });
    }
    Ok(())
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        linalg::axpy(1.0, x.row(r), &mut m);
    }
    m.iter_mut().for_each(|v| *v /= x.rows() as f64);
    m
}

fn subtract_row(x: &mut Matrix, v: &[f64]) {
    for r in 0..x.rows() {
        for (a, b) in x.row_mut(r).iter_mut().zip(v) {
            *a -= b;
        }
    }
}

/// Moves an input offset into the networks: the encoder sees `x − c` and
/// the decoder output is shifted by `+c`.
fn fold_center(encoder: &mut Mlp, decoder: &mut Mlp, c: &[f64], sign: f64) -> Result<()> {
    let first = &mut encoder.layers_mut()[0];
    let shift = first.weight.matvec(c)?;
    linalg::axpy(-sign, &shift, &mut first.bias);
    let last = decoder.layers_mut().last_mut().expect("non-empty");
    linalg::axpy(sign, c, &mut last.bias);
    Ok(())
}

/// Trains a VAE from a fresh initialization.
pub fn train_vae(
    data: &EmbeddingSet,
    arch: &Architecture,
    cfg: &VaeTrainConfig,
) -> Result<(VaeModel, TrainHistory)> {
    check_dataset(data, data.dim())?;
    let init = VaeModel::init(data.dim(), arch, cfg.seed)?;
    fit_vae(data, init, cfg, false)
}

/// Continues training from `init` (e.g. a cohesive run started from a plain
/// VAE).
pub fn train_vae_from(
    data: &EmbeddingSet,
    init: VaeModel,
    cfg: &VaeTrainConfig,
) -> Result<(VaeModel, TrainHistory)> {
    fit_vae(data, init, cfg, true)
}

/// `init_takes_raw` says whether `init` consumes raw inputs (a trained
/// model) or already lives in the centered space (a fresh initialization).
fn fit_vae(
    data: &EmbeddingSet,
    init: VaeModel,
    cfg: &VaeTrainConfig,
    init_takes_raw: bool,
) -> Result<(VaeModel, TrainHistory)> {
    cfg.validate()?;
    check_dataset(data, init.input_dim)?;
    let mut model = init;
    let mut x_all = data.to_matrix();
    let center = cfg.center_inputs.then(|| column_means(&x_all));
    if let Some(c) = &center {
        subtract_row(&mut x_all, c);
        if init_takes_raw {
            fold_center(&mut model.encoder, &mut model.decoder, c, -1.0)?;
        }
    }
    let speakers: Vec<&str> = data.iter().map(|r| r.spk.as_str()).collect();
    let k = cfg.samples_per_input;
    let d = model.code_dim;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1e);
    let mut enc_state = AdamState::new(&model.encoder, cfg.adam)?;
    let mut dec_state = AdamState::new(&model.decoder, cfg.adam)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut means = SpeakerMeanTable::default();

    for epoch in 0..cfg.epochs {
        if cfg.cohesive_weight > 0.0 {
            means = SpeakerMeanTable::from_codes(data, &model.encode_batch(&x_all)?.0);
        }
        order.shuffle(&mut rng);
        let mut sum = LossComponents::default();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let idx: Vec<usize> = chunk
                .iter()
                .flat_map(|&i| std::iter::repeat_n(i, k))
                .collect();
            let x = x_all.select_rows(&idx);
            let spk: Vec<&str> = idx.iter().map(|&i| speakers[i]).collect();
            let eps_data = (0..idx.len() * d)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let eps = Matrix::from_vec(idx.len(), d, eps_data)?;
            let (loss, grads) = batch_loss_and_grad(&model, &x, &spk, &means, cfg, &eps)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sum.add(&loss.scaled(1.0 / k as f64));
            let scale = 1.0 / k as f64;
            adam_step(
                &mut model.encoder,
                &scale_grads(grads.encoder, scale),
                &mut enc_state,
            )?;
            adam_step(
                &mut model.decoder,
                &scale_grads(grads.decoder, scale),
                &mut dec_state,
            )?;
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: sum.scaled(1.0 / data.len() as f64),
        });
    }
    if let Some(c) = &center {
        fold_center(&mut model.encoder, &mut model.decoder, c, 1.0)?;
    }
    Ok((model, history))
}

fn scale_grads(mut g: GradientSet, s: f64) -> GradientSet {
    if s != 1.0 {
        for l in &mut g.layers {
            l.weight = l.weight.scale(s);
            l.bias.iter_mut().for_each(|v| *v *= s);
        }
    }
    g
}

/// Trains the deterministic auto-encoder on reconstruction alone; the KL
/// and cohesive weights of `cfg` are ignored.
pub fn train_autoencoder(
    data: &EmbeddingSet,
    arch: &Architecture,
    cfg: &VaeTrainConfig,
) -> Result<(AutoEncoder, TrainHistory)> {
    let cfg = VaeTrainConfig {
        kl_weight: 0.0,
        cohesive_weight: 0.0,
        recon_weight: if cfg.recon_weight > 0.0 {
            cfg.recon_weight
        } else {
            1.0
        },
        ..cfg.clone()
    };
    cfg.validate()?;
    check_dataset(data, data.dim())?;
    let mut model = AutoEncoder::init(data.dim(), arch, cfg.seed)?;
    let mut x_all = data.to_matrix();
    let center = cfg.center_inputs.then(|| column_means(&x_all));
    if let Some(c) = &center {
        subtract_row(&mut x_all, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7a1e);
    let mut enc_state = AdamState::new(&model.encoder, cfg.adam)?;
    let mut dec_state = AdamState::new(&model.decoder, cfg.adam)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossComponents::default();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let x = x_all.select_rows(chunk);
            let (loss, grads) = ae_loss_and_grad(&model, &x, cfg.recon_weight)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sum.add(&loss);
            adam_step(&mut model.encoder, &grads.encoder, &mut enc_state)?;
            adam_step(&mut model.decoder, &grads.decoder, &mut dec_state)?;
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: sum.scaled(1.0 / data.len() as f64),
        });
    }
    if let Some(c) = &center {
        fold_center(&mut model.encoder, &mut model.decoder, c, 1.0)?;
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};
    use crate::nn::DenseLayer;

    fn small_arch() -> Architecture {
        Architecture {
            hidden_width: 6,
            encoder_hidden: 2,
            decoder_hidden: 2,
            code_dim: 3,
            activation: Activation::Tanh,
        }
    }

    fn zero_model(input: usize, code: usize) -> VaeModel {
        let mut m = VaeModel::init(input, &small_arch_with(code), 0).unwrap();
        let zeros = vec![0.0; m.num_parameters()];
        m.set_parameters(&zeros).unwrap();
        m
    }

    fn small_arch_with(code: usize) -> Architecture {
        Architecture {
            code_dim: code,
            ..small_arch()
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.sample(StandardNormal))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_encoder_gives_prior() {
        let m = zero_model(4, 2);
        let (mu, lv) = encode(&m, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(mu, vec![0.0, 0.0]);
        assert_eq!(lv, vec![0.0, 0.0]);
        assert_eq!(decode(&m, &[0.3, 0.1]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn mu_is_first_half_of_encoder_output() {
        let m = VaeModel::init(5, &small_arch(), 3).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, 1.0];
        let out = m.encoder().predict(&Matrix::from_rows(&[&x[..]])).unwrap();
        let (mu, lv) = encode(&m, &x).unwrap();
        assert_eq!(mu, out.row(0)[..3].to_vec());
        assert_eq!(lv, out.row(0)[3..].to_vec());
        assert_eq!(encode(&m, &x).unwrap(), (mu, lv));
        assert!(matches!(
            encode(&m, &[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn decode_matches_manual_chain() {
        let m = VaeModel::init(4, &small_arch(), 5).unwrap();
        let z = [0.3, -0.7, 1.2];
        let mut h = z.to_vec();
        for DenseLayer {
            weight,
            bias,
            activation,
        } in m.decoder().layers()
        {
            h = weight
                .matvec(&h)
                .unwrap()
                .iter()
                .zip(bias)
                .map(|(a, b)| activation.apply(a + b))
                .collect();
        }
        let got = decode(&m, &z).unwrap();
        for (a, b) in got.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(
            reparameterize(&[1.0, 2.0], &[0.3, -1.0], &[0.0, 0.0]).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(reparameterize(&[0.0], &[0.0], &[0.7]).unwrap(), vec![0.7]);
        assert!(reparameterize(&[0.0], &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn reparameterize_moments() {
        let (mu, lv) = (0.7, -0.4_f64);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let zs: Vec<f64> = (0..n)
            .map(|_| reparameterize(&[mu], &[lv], &[rng.sample(StandardNormal)]).unwrap()[0])
            .collect();
        let mean = zs.iter().sum::<f64>() / n as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
        let s2 = lv.exp();
        assert!((mean - mu).abs() < 3.0 * (s2 / n as f64).sqrt());
        // Var of the sample variance of a Gaussian is 2σ⁴/n.
        assert!((var - s2).abs() < 3.0 * (2.0 * s2 * s2 / n as f64).sqrt());
    }

    #[test]
    fn term_examples() {
        assert_eq!(kl_term(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!((kl_term(&[1.0], &[0.0]).unwrap() - 0.5).abs() < 1e-15);
        let ln2pi = (2.0 * PI).ln();
        assert!((recon_term(&[1.0, 2.0], &[1.0, 2.0]).unwrap() + ln2pi).abs() < 1e-12);
        assert!((recon_term(&[1.0, 0.0], &[0.0, 0.0]).unwrap() + 0.5 + ln2pi).abs() < 1e-12);
        assert!((cohesive_term(&[0.4, 0.1], &[0.4, 0.1]).unwrap() + ln2pi).abs() < 1e-12);
        let a = [0.5, -1.0];
        let s = [0.0, 0.0];
        let want = -0.5 * 1.25 - ln2pi;
        assert!((cohesive_term(&a, &s).unwrap() - want).abs() < 1e-12);
        assert!((cohesive_term(&[-0.5, 1.0], &s).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn recon_decreases_with_residual() {
        let x = [1.0, -1.0];
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let r = recon_term(&x, &[1.0 + 0.3 * k as f64, -1.0]).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    proptest::proptest! {
        #[test]
        fn kl_nonnegative(v in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..6)) {
            let mu: Vec<f64> = v.iter().map(|p| p.0).collect();
            let lv: Vec<f64> = v.iter().map(|p| p.1).collect();
            proptest::prop_assert!(kl_term(&mu, &lv).unwrap() >= 0.0);
        }
    }

    fn toy_batch(seed: u64) -> (VaeModel, Matrix, Vec<String>, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = VaeModel::init(4, &small_arch(), seed).unwrap();
        let x = random_matrix(6, 4, &mut rng);
        let spk = (0..6).map(|i| format!("s{}", i % 3)).collect();
        let eps = random_matrix(6, 3, &mut rng);
        (m, x, spk, eps)
    }

    fn table_for(m: &VaeModel, x: &Matrix, spk: &[String]) -> SpeakerMeanTable {
        let mut set = EmbeddingSet::new(x.cols());
        for (i, s) in spk.iter().enumerate() {
            set.push(format!("u{i}"), s.clone(), x.row(i).to_vec())
                .unwrap();
        }
        SpeakerMeanTable::compute(m, &set).unwrap()
    }

    #[test]
    fn batch_loss_is_sum_of_components() {
        let (m, x, spk, eps) = toy_batch(1);
        let ids: Vec<&str> = spk.iter().map(String::as_str).collect();
        let means = table_for(&m, &x, &spk);
        let cfg = VaeTrainConfig {
            kl_weight: 0.7,
            recon_weight: 1.3,
            cohesive_weight: 2.0,
            ..VaeTrainConfig::default()
        };
        let got = batch_loss(&m, &x, &ids, &means, &cfg, &eps).unwrap();
        let mut want = 0.0;
        for i in 0..x.rows() {
            let (mu, lv) = encode(&m, x.row(i)).unwrap();
            let z = reparameterize(&mu, &lv, eps.row(i)).unwrap();
            let xh = decode(&m, &z).unwrap();
            want += 0.7 * kl_term(&mu, &lv).unwrap()
                - 1.3 * recon_term(x.row(i), &xh).unwrap()
                - 2.0 * cohesive_term(&mu, means.get(ids[i]).unwrap()).unwrap();
        }
        assert!((got.total - want).abs() < 1e-10);

        let plain = VaeTrainConfig::default();
        let l = batch_loss(&m, &x, &ids, &means, &plain, &eps).unwrap();
        assert!((l.total - (l.kl - l.recon)).abs() < 1e-10);
    }

    #[test]
    fn unknown_speaker_only_matters_with_cohesion() {
        let (m, x, spk, eps) = toy_batch(2);
        let ids: Vec<&str> = spk.iter().map(String::as_str).collect();
        let empty = SpeakerMeanTable::default();
        assert!(batch_loss(&m, &x, &ids, &empty, &VaeTrainConfig::default(), &eps).is_ok());
        let cfg = VaeTrainConfig {
            cohesive_weight: 1.0,
            ..VaeTrainConfig::default()
        };
        assert!(matches!(
            batch_loss(&m, &x, &ids, &empty, &cfg, &eps),
            Err(Error::UnknownSpeaker(_))
        ));
    }

    #[test]
    fn single_utterance_speaker_has_constant_cohesion() {
        let (m, x, _, _) = toy_batch(3);
        let spk: Vec<String> = (0..6).map(|i| format!("solo{i}")).collect();
        let t = table_for(&m, &x, &spk);
        for (i, s) in spk.iter().enumerate() {
            let (mu, _) = encode(&m, x.row(i)).unwrap();
            let c = cohesive_term(&mu, t.get(s).unwrap()).unwrap();
            assert!((c + 1.5 * (2.0 * PI).ln()).abs() < 1e-12);
        }
    }

    fn fd_check(cfg: &VaeTrainConfig, seed: u64) {
        let (mut m, x, spk, eps) = toy_batch(seed);
        let ids: Vec<&str> = spk.iter().map(String::as_str).collect();
        let means = table_for(&m, &x, &spk);
        let (_, g) = batch_loss_and_grad(&m, &x, &ids, &means, cfg, &eps).unwrap();
        let g = g.flatten();
        let p0 = m.parameters();
        let h = 1e-5;
        for k in 0..p0.len() {
            let mut p = p0.clone();
            p[k] += h;
            m.set_parameters(&p).unwrap();
            let up = batch_loss(&m, &x, &ids, &means, cfg, &eps).unwrap().total;
            p[k] -= 2.0 * h;
            m.set_parameters(&p).unwrap();
            let down = batch_loss(&m, &x, &ids, &means, cfg, &eps).unwrap().total;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: fd {fd} vs {}", g[k]);
        }
        m.set_parameters(&p0).unwrap();
    }

    #[test]
    fn gradient_matches_finite_differences() {
        fd_check(&VaeTrainConfig::default(), 4);
        fd_check(
            &VaeTrainConfig {
                kl_weight: 1.0,
                recon_weight: 1.0,
                cohesive_weight: 10.0,
                ..VaeTrainConfig::default()
            },
            5,
        );
        fd_check(
            &VaeTrainConfig {
                kl_weight: 0.0,
                recon_weight: 2.0,
                ..VaeTrainConfig::default()
            },
            6,
        );
    }

    fn gaussian_1d(n: usize, seed: u64) -> EmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = EmbeddingSet::new(1);
        for i in 0..n {
            s.push(
                format!("u{i}"),
                format!("s{}", i / 5),
                vec![rng.sample(StandardNormal)],
            )
            .unwrap();
        }
        s
    }

    #[test]
    fn linear_vae_training_curve_settles() {
        let data = gaussian_1d(400, 1);
        let arch = Architecture {
            hidden_width: 4,
            encoder_hidden: 1,
            decoder_hidden: 1,
            code_dim: 1,
            activation: Activation::Linear,
        };
        let cfg = VaeTrainConfig {
            epochs: 60,
            batch_size: 20,
            seed: 3,
            adam: AdamConfig {
                lr: 5e-3,
                ..AdamConfig::default()
            },
            ..VaeTrainConfig::default()
        };
        let (_, hist) = train_vae(&data, &arch, &cfg).unwrap();
        let t = hist.totals();
        assert_eq!(t.len(), 60);
        let half = &t[30..];
        for w in half.windows(2) {
            assert!(w[1] <= w[0] + 0.05 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        assert!(t[59] < t[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let data = gaussian_1d(60, 2);
        let cfg = VaeTrainConfig {
            epochs: 3,
            batch_size: 7,
            seed: 9,
            cohesive_weight: 1.0,
            ..VaeTrainConfig::default()
        };
        let (a, ha) = train_vae(&data, &small_arch(), &cfg).unwrap();
        let (b, hb) = train_vae(&data, &small_arch(), &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(ha, hb);
        let (c, _) = train_autoencoder(&data, &small_arch(), &cfg).unwrap();
        let (d, _) = train_autoencoder(&data, &small_arch(), &cfg).unwrap();
        assert_eq!(c.to_bytes(), d.to_bytes());
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = EmbeddingSet::new(3);
        assert!(matches!(
            train_vae(&data, &small_arch(), &VaeTrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            train_autoencoder(&data, &small_arch(), &VaeTrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn exploding_training_reports_epoch_and_batch() {
        let data = gaussian_1d(40, 3)
            .map_vectors(1, |v| Ok(vec![v[0] * 1e200]))
            .unwrap();
        let err = train_vae(&data, &small_arch(), &VaeTrainConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::NonFiniteLoss { epoch: 0, batch: 0 }),
            "{err}"
        );
    }

    fn within_scatter(codes: &EmbeddingSet) -> f64 {
        let mut total = 0.0;
        for (_, idx) in codes.speaker_groups() {
            let d = codes.dim();
            let mut m = vec![0.0; d];
            for &i in &idx {
                linalg::axpy(1.0 / idx.len() as f64, &codes.records()[i].vector, &mut m);
            }
            for &i in &idx {
                let r = linalg::sub(&codes.records()[i].vector, &m);
                total += linalg::dot(&r, &r);
            }
        }
        total / codes.len() as f64
    }

    #[test]
    fn cohesive_training_tightens_speakers() {
        let (data, _) = generate_synthetic(&SynthConfig {
            n_speakers: 30,
            utts_per_speaker: 6,
            obs_dim: 6,
            latent_dim: 2,
            seed: 4,
            ..SynthConfig::default()
        })
        .unwrap();
        let arch = small_arch();
        let base_cfg = VaeTrainConfig {
            epochs: 10,
            seed: 1,
            ..VaeTrainConfig::default()
        };
        let (base, _) = train_vae(&data, &arch, &base_cfg).unwrap();
        let coh_cfg = VaeTrainConfig {
            cohesive_weight: 10.0,
            ..base_cfg
        };
        let (coh, _) = train_vae_from(&data, base.clone(), &coh_cfg).unwrap();
        let before = within_scatter(&extract_codes(&base.into(), &data).unwrap());
        let after = within_scatter(&extract_codes(&coh.into(), &data).unwrap());
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn extraction_ignores_batching() {
        let data = gaussian_1d(1100, 5);
        let m: CodeModel = VaeModel::init(1, &small_arch(), 2).unwrap().into();
        let all = extract_codes(&m, &data).unwrap();
        for (i, r) in all.iter().enumerate() {
            assert_eq!(r.utt, data.records()[i].utt);
            let single = m
                .codes(&Matrix::from_rows(&[&data.records()[i].vector[..]]))
                .unwrap();
            assert_eq!(r.vector, single.row(0));
        }
    }

    #[test]
    fn centering_is_folded_into_model() {
        let data = gaussian_1d(50, 6)
            .map_vectors(1, |v| Ok(vec![v[0] + 5.0]))
            .unwrap();
        let cfg = VaeTrainConfig {
            epochs: 0,
            center_inputs: true,
            ..VaeTrainConfig::default()
        };
        let init = VaeModel::init(1, &small_arch(), 1).unwrap();
        let (m, _) = train_vae_from(&data, init.clone(), &cfg).unwrap();
        for r in data.iter() {
            let (a, _) = encode(&m, &r.vector).unwrap();
            let (b, _) = encode(&init, &r.vector).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn container_round_trip_and_kind() {
        let v = VaeModel::init(4, &small_arch(), 1).unwrap();
        let a = AutoEncoder::init(4, &small_arch(), 1).unwrap();
        assert_eq!(a.encoder().output_width(), 3);
        assert_eq!(VaeModel::from_bytes(&v.to_bytes()).unwrap(), v);
        assert_eq!(AutoEncoder::from_bytes(&a.to_bytes()).unwrap(), a);
        assert!(VaeModel::from_bytes(&a.to_bytes()).is_err());
        assert!(matches!(
            CodeModel::from_bytes(&a.to_bytes()).unwrap(),
            CodeModel::Ae(_)
        ));
        let mut bad = v.to_bytes();
        bad[0] = b'X';
        assert!(CodeModel::from_bytes(&bad).is_err());
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![EpochStats {
                epoch: 0,
                loss: LossComponents {
                    total: 1.5,
                    kl: 0.5,
                    recon: -1.0,
                    cohesive: 0.0,
                },
            }],
        };
        assert_eq!(
            h.to_csv(),
            "epoch,total,kl,recon,cohesive\n0,1.5,0.5,-1,0\n"
        );
    }
}
