//! Synthetic speaker embeddings drawn from a linear-Gaussian speaker model,
//! then pushed through an elementwise monotone warp and a fixed rotation.
//!
//! The warp makes both the speaker prior and the within-speaker
//! distribution non-Gaussian, which is what the regularizers are meant to
//! undo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warp {
    Identity,
    /// `t + γt³`
    Cubic,
    /// `sign(t)(e^{γ|t|} − 1)/γ`
    Exp,
}

impl std::str::FromStr for Warp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Warp::Identity),
            "cubic" => Ok(Warp::Cubic),
            "exp" => Ok(Warp::Exp),
            _ => Err(Error::InvalidConfig(format!("unknown warp `{s}`"))),
        }
    }
}

impl Warp {
    pub fn apply(self, t: f64, gamma: f64) -> f64 {
        match self {
            Warp::Identity => t,
            Warp::Cubic => t + gamma * t * t * t,
            Warp::Exp if gamma == 0.0 => t,
            Warp::Exp => t.signum() * (gamma * t.abs()).exp_m1() / gamma,
        }
    }

    /// Inverse of [`Warp::apply`]; both warps are odd and strictly increasing
    /// for `γ ≥ 0`.
    pub fn invert(self, x: f64, gamma: f64) -> f64 {
        match self {
            Warp::Identity => x,
            Warp::Exp if gamma == 0.0 => x,
            Warp::Exp => x.signum() * (gamma * x.abs()).ln_1p() / gamma,
            Warp::Cubic if gamma == 0.0 => x,
            Warp::Cubic => {
                // Newton on t + γt³ − x, starting from a point on the correct
                // side of the root; the function is convex for t > 0.
                let a = x.abs();
                let mut t = a.min((a / gamma).cbrt());
                for _ in 0..100 {
                    let f = t + gamma * t * t * t - a;
                    let step = f / (1.0 + 3.0 * gamma * t * t);
                    t -= step;
                    if step.abs() <= 1e-16 * t.abs().max(1.0) {
                        break;
                    }
                }
                x.signum() * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub obs_dim: usize,
    pub latent_dim: usize,
    /// Multiplies the within-speaker covariance `A·Aᵀ/D + 0.1·I`.
    pub within_scale: f64,
    pub warp: Warp,
    pub warp_strength: f64,
    /// Standard deviation of the global mean's entries.
    pub mean_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 200,
            utts_per_speaker: 10,
            obs_dim: 20,
            latent_dim: 5,
            within_scale: 1.0,
            warp: Warp::Cubic,
            warp_strength: 0.2,
            mean_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.n_speakers == 0
            || self.utts_per_speaker == 0
            || self.obs_dim == 0
            || self.latent_dim == 0
        {
            return bad("counts must be at least 1");
        }
        if self.latent_dim > self.obs_dim {
            return bad("latent_dim must not exceed obs_dim");
        }
        if !(self.within_scale > 0.0) || !self.within_scale.is_finite() {
            return bad("within_scale must be positive");
        }
        if !(self.warp_strength >= 0.0) || !self.warp_strength.is_finite() {
            return bad("warp_strength must be non-negative");
        }
        if !(self.mean_scale >= 0.0) {
            return bad("mean_scale must be non-negative");
        }
        Ok(())
    }
}

/// Parameters behind a synthetic set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mean: Vec<f64>,
    /// `D × r` speaker loading.
    pub loading: Matrix,
    /// Within-speaker covariance.
    pub within: Matrix,
    /// Speaker codes, one per speaker in output order.
    pub speaker_codes: Vec<Vec<f64>>,
    /// `D × D` orthogonal matrix applied after the warp.
    pub rotation: Matrix,
}

impl GroundTruth {
    /// `U·Uᵀ`
    pub fn between(&self) -> Matrix {
        self.loading.matmul_t(&self.loading).unwrap()
    }

    /// Between-speaker covariance realized by the drawn speaker codes,
    /// `U·Cov(y)·Uᵀ` with the sample covariance of `y`.
    pub fn realized_between(&self) -> Matrix {
        let r = self.loading.cols();
        let n = self.speaker_codes.len() as f64;
        let mut mean = vec![0.0; r];
        for y in &self.speaker_codes {
            crate::linalg::axpy(1.0 / n, y, &mut mean);
        }
        let mut cov = Matrix::zeros(r, r);
        for y in &self.speaker_codes {
            let d = crate::linalg::sub(y, &mean);
            cov.add_outer(1.0 / n, &d, &d);
        }
        self.loading
            .matmul(&cov)
            .unwrap()
            .matmul_t(&self.loading)
            .unwrap()
    }

    /// Plain-text dump: a `name rows cols` header per block followed by
    /// one whitespace-separated row per line.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let mut block =
            |name: &str, rows: usize, cols: usize, data: &mut dyn Iterator<Item = f64>| {
                writeln!(s, "{name} {rows} {cols}").unwrap();
                for _ in 0..rows {
                    let row: Vec<String> = data.take(cols).map(|v| v.to_string()).collect();
                    writeln!(s, "{}", row.join(" ")).unwrap();
                }
            };
        let d = self.mean.len();
        let r = self.loading.cols();
        block("mean", 1, d, &mut self.mean.iter().copied());
        block(
            "loading",
            d,
            r,
            &mut self.loading.as_slice().iter().copied(),
        );
        block("within", d, d, &mut self.within.as_slice().iter().copied());
        block(
            "rotation",
            d,
            d,
            &mut self.rotation.as_slice().iter().copied(),
        );
        block(
            "speaker_codes",
            self.speaker_codes.len(),
            r,
            &mut self.speaker_codes.iter().flatten().copied(),
        );
        s
    }

    /// `R·M·Rᵀ`: a covariance expressed in the emitted coordinates.
    pub fn rotate_cov(&self, m: &Matrix) -> Matrix {
        self.rotation
            .matmul(m)
            .unwrap()
            .matmul_t(&self.rotation)
            .unwrap()
    }
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt on a Gaussian matrix.
fn random_rotation(n: usize, rng: &mut impl Rng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&v, c);
                crate::linalg::axpy(-p, c, &mut v);
            }
        }
        let nv = crate::linalg::norm(&v);
        if nv > 1e-8 {
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    let mut r = Matrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            r[(i, j)] = v;
        }
    }
    r
}

/// Draws `φ = m + U·y + ε` per utterance and emits `x = R·h(φ)`.
///
/// Speakers are `s0000, s0001, …`, utterances `s0000-u000, …`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(EmbeddingSet, GroundTruth)> {
    cfg.validate()?;
    let (d, r) = (cfg.obs_dim, cfg.latent_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let mean: Vec<f64> = (0..d).map(|_| cfg.mean_scale * normal(&mut rng)).collect();
    let loading_scale = (1.0 / r as f64).sqrt();
    let loading = Matrix::from_vec(
        d,
        r,
        (0..d * r)
            .map(|_| loading_scale * normal(&mut rng))
            .collect(),
    )?;
    let a = Matrix::from_vec(d, d, (0..d * d).map(|_| normal(&mut rng)).collect())?;
    let mut within = a.matmul_t(&a)?.scale(1.0 / d as f64);
    within.add_diag(0.1);
    let within = within.scale(cfg.within_scale).symmetrized();
    let rotation = random_rotation(d, &mut rng);
    let chol = Cholesky::new(&within)?;

    let mut set = EmbeddingSet::new(d);
    let mut codes = Vec::with_capacity(cfg.n_speakers);
    let mut phi = vec![0.0; d];
    let mut warped = vec![0.0; d];
    for s in 0..cfg.n_speakers {
        let y: Vec<f64> = (0..r).map(|_| normal(&mut rng)).collect();
        let speaker_point = {
            let mut p = mean.clone();
            for (pi, row) in p.iter_mut().zip(0..d) {
                *pi += dot(loading.row(row), &y);
            }
            p
        };
        let spk = format!("s{s:04}");
        for u in 0..cfg.utts_per_speaker {
            let z: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let l = chol.factor();
            for i in 0..d {
                phi[i] = speaker_point[i] + dot(&l.row(i)[..=i], &z[..=i]);
            }
            for (w, &p) in warped.iter_mut().zip(&phi) {
                *w = cfg.warp.apply(p, cfg.warp_strength);
            }
            let x = rotation.matvec(&warped)?;
            set.push(format!("{spk}-u{u:03}"), spk.clone(), x)?;
        }
        codes.push(y);
    }
    Ok((
        set,
        GroundTruth {
            mean,
            loading,
            within,
            speaker_codes: codes,
            rotation,
        },
    ))
}
