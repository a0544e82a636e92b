//! Linear-Gaussian PLDA: `φ = m + U·y + ε`, `y ~ N(0, I_r)`, `ε ~ N(0, W)`.
//!
//! Training is EM over the speaker codes with the mean and loading updated
//! jointly. Scoring is the closed-form same-speaker / different-speaker
//! log-likelihood ratio.

use std::f64::consts::PI;

use super::projection::{add_ridge, class_scatter, fit_whitener, mean_and_covariance, Projection};
use super::{length_normalize, ScoreSet};
use crate::codec::{Reader, Writer};
use crate::data::{EmbeddingSet, TrialList};
use crate::error::{Error, Result};
use crate::linalg::{self, sym_eig, Cholesky, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    mean: Vec<f64>,
    /// `D × r`
    loading: Matrix,
    within: Matrix,
    between: Matrix,
    scorer: Scorer,
}

/// `score(e, t) = ½eᵀQe + ½tᵀQt + eᵀPt + c` on mean-removed inputs.
#[derive(Debug, Clone, PartialEq)]
struct Scorer {
    q: Matrix,
    p: Matrix,
    c: f64,
}

impl Scorer {
    /// With `T = B + W`, the pair `(e, t)` under the same-speaker hypothesis
    /// splits into independent `(e+t)/√2 ~ N(0, W + 2B)` and
    /// `(e−t)/√2 ~ N(0, W)`; under the alternative both are `N(0, T)`.
    fn new(between: &Matrix, within: &Matrix) -> Result<Self> {
        let total = between.add(within)?;
        let mut plus = between.scale(2.0).add(within)?;
        plus = plus.symmetrized();
        let ct = Cholesky::new(&total)?;
        let cw = Cholesky::new(within)?;
        let cp = Cholesky::new(&plus)?;
        let (ti, wi, pi) = (ct.inverse(), cw.inverse(), cp.inverse());
        let q = ti.sub(&pi.scale(0.5))?.sub(&wi.scale(0.5))?;
        let p = wi.scale(0.5).sub(&pi.scale(0.5))?;
        let c = ct.log_det() - 0.5 * cp.log_det() - 0.5 * cw.log_det();
        Ok(Scorer { q, p, c })
    }
}

impl PldaModel {
    pub fn new(mean: Vec<f64>, loading: Matrix, within: Matrix) -> Result<Self> {
        let d = mean.len();
        if loading.rows() != d || within.shape() != (d, d) || loading.cols() > d {
            return Err(Error::shape(
                format!("loading {d}×r (r ≤ {d}) and within {d}×{d}"),
                format!(
                    "loading {}×{}, within {}×{}",
                    loading.rows(),
                    loading.cols(),
                    within.rows(),
                    within.cols()
                ),
            ));
        }
        let within = within.symmetrized();
        let between = loading.matmul_t(&loading)?.symmetrized();
        let scorer = Scorer::new(&between, &within)?;
        Ok(PldaModel {
            mean,
            loading,
            within,
            between,
            scorer,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.loading.cols()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn loading(&self) -> &Matrix {
        &self.loading
    }

    pub fn within(&self) -> &Matrix {
        &self.within
    }

    /// `B = U·Uᵀ`
    pub fn between(&self) -> &Matrix {
        &self.between
    }

    /// Log-likelihood ratio of "same speaker" against "different speakers".
    pub fn score_pair(&self, e: &[f64], t: &[f64]) -> Result<f64> {
        plda_score_pair(self, e, t)
    }

    /// Marginal log-likelihood of labeled data under the model.
    pub fn log_likelihood(&self, data: &EmbeddingSet) -> Result<f64> {
        let stats = SpeakerStats::collect(data)?;
        let cw = Cholesky::new(&self.within)?;
        let (_, ll) = e_step(&stats, &self.mean, &self.loading, &cw, true)?;
        Ok(ll)
    }
}

pub fn plda_score_pair(model: &PldaModel, e: &[f64], t: &[f64]) -> Result<f64> {
    let d = model.dim();
    if e.len() != d || t.len() != d {
        return Err(Error::shape(
            format!("vectors of dim {d}"),
            format!("{} and {}", e.len(), t.len()),
        ));
    }
    let ec = linalg::sub(e, &model.mean);
    let tc = linalg::sub(t, &model.mean);
    let s = &model.scorer;
    let qe = s.q.matvec(&ec)?;
    let qt = s.q.matvec(&tc)?;
    let pt = s.p.matvec(&tc)?;
    Ok(0.5 * linalg::dot(&ec, &qe) + 0.5 * linalg::dot(&tc, &qt) + linalg::dot(&ec, &pt) + s.c)
}

/// Sufficient statistics per speaker.
struct SpeakerStats {
    dim: usize,
    total: usize,
    /// `(n_s, Σ_u φ_su)`
    speakers: Vec<(usize, Vec<f64>)>,
    /// `Σ φφᵀ` over all utterances
    scatter: Matrix,
    sum: Vec<f64>,
}

impl SpeakerStats {
    fn collect(data: &EmbeddingSet) -> Result<Self> {
        let d = data.dim();
        let mut scatter = Matrix::zeros(d, d);
        let mut sum = vec![0.0; d];
        let mut speakers = Vec::new();
        for (_, idx) in data.speaker_groups() {
            let mut s = vec![0.0; d];
            for &i in &idx {
                let v = &data.records()[i].vector;
                linalg::axpy(1.0, v, &mut s);
                scatter.add_outer(1.0, v, v);
            }
            linalg::axpy(1.0, &s, &mut sum);
            speakers.push((idx.len(), s));
        }
        Ok(SpeakerStats {
            dim: d,
            total: data.len(),
            speakers,
            scatter: scatter.symmetrized(),
            sum,
        })
    }
}

/// Posterior moments of the augmented code `[y; 1]`, accumulated as
/// `Σ_s S_s·E[ỹ]ᵀ` and `Σ_s n_s·E[ỹỹᵀ]`.
struct Posterior {
    cross: Matrix,
    second: Matrix,
}

/// E-step. Returns accumulated posterior moments and, when requested, the
/// marginal log-likelihood of the current parameters.
fn e_step(
    stats: &SpeakerStats,
    mean: &[f64],
    loading: &Matrix,
    cw: &Cholesky,
    want_ll: bool,
) -> Result<(Posterior, f64)> {
    let d = stats.dim;
    let r = loading.cols();
    let wi_u = cw.solve_matrix(loading)?;
    let ut_wi_u = loading.t_matmul(&wi_u)?.symmetrized();

    let mut cross = Matrix::zeros(d, r + 1);
    let mut second = Matrix::zeros(r + 1, r + 1);
    let mut ll = 0.0;
    if want_ll {
        // Σ (φ−m)(φ−m)ᵀ = Σφφᵀ − m sᵀ − s mᵀ + N m mᵀ
        let n = stats.total as f64;
        let mut c = stats.scatter.clone();
        c.add_outer(-1.0, mean, &stats.sum);
        c.add_outer(-1.0, &stats.sum, mean);
        c.add_outer(n, mean, mean);
        let wi = cw.inverse();
        let quad: f64 = wi
            .as_slice()
            .iter()
            .zip(c.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        ll = -0.5 * n * d as f64 * (2.0 * PI).ln() - 0.5 * n * cw.log_det() - 0.5 * quad;
    }

    for (n_s, s) in &stats.speakers {
        let n_s = *n_s as f64;
        let mut prec = ut_wi_u.scale(n_s);
        prec.add_diag(1.0);
        let cp = Cholesky::new(&prec)?;
        let f: Vec<f64> = s.iter().zip(mean).map(|(a, m)| a - n_s * m).collect();
        let b = wi_u.t_matvec(&f)?;
        let y = cp.solve(&b)?;
        let mut eyy = cp.inverse();
        eyy.add_outer(1.0, &y, &y);
        if want_ll {
            ll += -0.5 * cp.log_det() + 0.5 * linalg::dot(&b, &y);
        }
        let mut ey = y.clone();
        ey.push(1.0);
        cross.add_outer(1.0, s, &ey);
        for i in 0..r {
            for j in 0..r {
                second[(i, j)] += n_s * eyy[(i, j)];
            }
            second[(i, r)] += n_s * y[i];
            second[(r, i)] += n_s * y[i];
        }
        second[(r, r)] += n_s;
    }
    Ok((Posterior { cross, second }, ll))
}

/// M-step: `[U m] = (Σ S_s E[ỹ]ᵀ)(Σ n_s E[ỹỹᵀ])⁻¹`,
/// `W = (Σφφᵀ − [U m]·(Σ S_s E[ỹ]ᵀ)ᵀ)/N`.
fn m_step(stats: &SpeakerStats, post: &Posterior) -> Result<(Vec<f64>, Matrix, Matrix)> {
    let d = stats.dim;
    let r = post.second.rows() - 1;
    let cs = Cholesky::new(&post.second.symmetrized())?;
    // Ũ = cross · second⁻¹  ⇔  second · Ũᵀ = crossᵀ
    let aug = cs.solve_matrix(&post.cross.transpose())?.transpose();
    let loading = aug.col_range(0, r);
    let mean = aug.col(r);
    let explained = aug.matmul_t(&post.cross)?;
    let mut within = stats
        .scatter
        .sub(&explained)?
        .scale(1.0 / stats.total as f64)
        .symmetrized();
    if Cholesky::new(&within).is_err() {
        add_ridge(&mut within);
        Cholesky::new(&within)
            .map_err(|_| Error::DegenerateData("within covariance collapsed during EM".into()))?;
    }
    debug_assert_eq!(within.rows(), d);
    Ok((mean, loading, within))
}

/// Deterministic starting point: sample mean, principal directions of the
/// between-speaker scatter scaled by the square roots of their eigenvalues,
/// and the ridged within-speaker covariance.
fn initial_parameters(data: &EmbeddingSet, r: usize) -> Result<(Vec<f64>, Matrix, Matrix)> {
    let (mean, mut within, between) = class_scatter(data);
    add_ridge(&mut within);
    if Cholesky::new(&within).is_err() {
        return Err(Error::DegenerateData(
            "within-speaker covariance not positive definite".into(),
        ));
    }
    let eig = sym_eig(&between)?;
    let d = data.dim();
    let mut loading = Matrix::zeros(d, r);
    for k in 0..r {
        let s = eig.values[k].max(0.0).sqrt();
        for i in 0..d {
            loading[(i, k)] = s * eig.vectors[(i, k)];
        }
    }
    Ok((mean, loading, within))
}

fn check_plda_input(data: &EmbeddingSet, r: usize) -> Result<()> {
    let n_spk = data.speakers().len();
    if n_spk < 2 {
        return Err(Error::DegenerateData(format!(
            "PLDA needs at least 2 speakers, got {n_spk}"
        )));
    }
    if r == 0 || r > data.dim() {
        return Err(Error::InvalidDim(format!(
            "PLDA latent dim {r} must be in 1..={}",
            data.dim()
        )));
    }
    Ok(())
}

/// EM training. The history holds the log-likelihood of the starting point
/// followed by the value after each iteration (`iters + 1` entries).
pub fn fit_plda(
    data: &EmbeddingSet,
    latent_dim: usize,
    iters: usize,
) -> Result<(PldaModel, Vec<f64>)> {
    check_plda_input(data, latent_dim)?;
    let (mean, loading, within) = initial_parameters(data, latent_dim)?;
    fit_plda_from(data, PldaModel::new(mean, loading, within)?, iters)
}

/// EM starting from an existing model.
pub fn fit_plda_from(
    data: &EmbeddingSet,
    init: PldaModel,
    iters: usize,
) -> Result<(PldaModel, Vec<f64>)> {
    check_plda_input(data, init.latent_dim())?;
    if data.dim() != init.dim() {
        return Err(Error::DimMismatch {
            expected: init.dim(),
            got: data.dim(),
        });
    }
    let stats = SpeakerStats::collect(data)?;
    let (mut mean, mut loading, mut within) = (init.mean, init.loading, init.within);
    let mut history = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let cw = Cholesky::new(&within)?;
        let (post, ll) = e_step(&stats, &mean, &loading, &cw, true)?;
        history.push(ll);
        (mean, loading, within) = m_step(&stats, &post)?;
    }
    let cw = Cholesky::new(&within)?;
    let (_, ll) = e_step(&stats, &mean, &loading, &cw, true)?;
    history.push(ll);
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(
            "non-finite PLDA log-likelihood".into(),
        ));
    }
    Ok((PldaModel::new(mean, loading, within)?, history))
}

/// PLDA with its input conditioning: center, whiten, length-normalize.
#[derive(Debug, Clone, PartialEq)]
pub struct PldaBackend {
    pub whitener: Option<Projection>,
    pub model: PldaModel,
}

impl PldaBackend {
    /// Fits the whitener on `data`, conditions it, then runs EM.
    pub fn fit(data: &EmbeddingSet, latent_dim: usize, iters: usize) -> Result<Self> {
        let whitener = fit_whitener(data)?;
        let conditioned =
            data.map_vectors(data.dim(), |v| length_normalize(&whitener.apply(v)?))?;
        let (model, _) = fit_plda(&conditioned, latent_dim, iters)?;
        Ok(PldaBackend {
            whitener: Some(whitener),
            model,
        })
    }

    pub fn condition(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.whitener {
            Some(w) => length_normalize(&w.apply(x)?),
            None => Ok(x.to_vec()),
        }
    }

    pub fn score_pair(&self, e: &[f64], t: &[f64]) -> Result<f64> {
        plda_score_pair(&self.model, &self.condition(e)?, &self.condition(t)?)
    }

    /// `PLD1`: u32 D, u32 r, mean, loading (D×r), within (D×D), then a u8
    /// flag and, when set, a length-prefixed `PRJ1` whitener.
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut w = Writer::new(b"PLD1");
        w.u32(m.dim());
        w.u32(m.latent_dim());
        w.f64s(&m.mean);
        w.f64s(m.loading.as_slice());
        w.f64s(m.within.as_slice());
        match &self.whitener {
            Some(p) => {
                w.u8(1);
                w.blob(&p.to_bytes());
            }
            None => w.u8(0),
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, b"PLD1")?;
        let d = r.u32()?;
        let rank = r.u32()?;
        let mean = r.f64s(d)?;
        let loading = Matrix::from_vec(d, rank, r.f64s(d * rank)?)?;
        let within = Matrix::from_vec(d, d, r.f64s(d * d)?)?;
        let whitener = match r.u8()? {
            0 => None,
            1 => Some(Projection::from_bytes(r.blob()?)?),
            f => return Err(Error::Format(format!("bad whitener flag {f}"))),
        };
        r.finish()?;
        Ok(PldaBackend {
            whitener,
            model: PldaModel::new(mean, loading, within)?,
        })
    }
}

impl From<PldaModel> for PldaBackend {
    fn from(model: PldaModel) -> Self {
        PldaBackend {
            whitener: None,
            model,
        }
    }
}

/// Scores every trial; enrollment ids resolve in `enroll`, test ids in `test`.
pub fn plda_score_trials(
    backend: &PldaBackend,
    enroll: &EmbeddingSet,
    test: &EmbeddingSet,
    trials: &TrialList,
) -> Result<ScoreSet> {
    super::score_trials(enroll, test, trials, |e, t| backend.score_pair(e, t))
}

/// Total covariance of conditioned training data; handy for diagnostics.
pub fn conditioned_covariance(backend: &PldaBackend, data: &EmbeddingSet) -> Result<Matrix> {
    let c = data.map_vectors(backend.model.dim(), |v| backend.condition(v))?;
    Ok(mean_and_covariance(&c).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig, Warp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(d: usize, r: usize, seed: u64) -> PldaModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = Matrix::from_vec(
            d,
            r,
            (0..d * r).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let a = Matrix::from_vec(
            d,
            d,
            (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut w = a.matmul_t(&a).unwrap();
        w.add_diag(0.3);
        PldaModel::new(mean, u, w).unwrap()
    }

    #[test]
    fn zero_loading_scores_zero() {
        let mut m = random_model(3, 1, 1);
        m = PldaModel::new(m.mean.clone(), Matrix::zeros(3, 1), m.within.clone()).unwrap();
        let s = m.score_pair(&[1.0, 2.0, 3.0], &[-1.0, 0.5, 0.0]).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn score_is_symmetric() {
        let m = random_model(4, 2, 2);
        let e = [0.3, -1.0, 2.0, 0.1];
        let t = [1.3, 0.2, -0.4, 0.9];
        assert!((m.score_pair(&e, &t).unwrap() - m.score_pair(&t, &e).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn score_matches_direct_gaussian_densities() {
        // ln N([e;t]; [m;m], [[T,B],[B,T]]) − ln N(e; m, T) − ln N(t; m, T)
        let m = random_model(3, 2, 3);
        let d = 3;
        let t_cov = m.between.add(&m.within).unwrap();
        let mut joint = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                joint[(i, j)] = t_cov[(i, j)];
                joint[(i + d, j + d)] = t_cov[(i, j)];
                joint[(i, j + d)] = m.between[(i, j)];
                joint[(i + d, j)] = m.between[(i, j)];
            }
        }
        let log_n = |x: &[f64], mu: &[f64], cov: &Matrix| {
            let c = Cholesky::new(cov).unwrap();
            let r = linalg::sub(x, mu);
            -0.5 * (x.len() as f64 * (2.0 * PI).ln() + c.log_det() + c.inv_quad(&r))
        };
        let e = [0.5, -0.2, 1.1];
        let t = [0.1, 0.4, 0.9];
        let et: Vec<f64> = e.iter().chain(&t).copied().collect();
        let mm: Vec<f64> = m.mean.iter().chain(&m.mean).copied().collect();
        let direct =
            log_n(&et, &mm, &joint) - log_n(&e, &m.mean, &t_cov) - log_n(&t, &m.mean, &t_cov);
        assert!((m.score_pair(&e, &t).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn score_invariant_under_rotation() {
        let m = random_model(4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a =
            Matrix::from_vec(4, 4, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let rot = sym_eig(&a.symmetrized()).unwrap().vectors;
        let rm = PldaModel::new(
            rot.matvec(&m.mean).unwrap(),
            rot.matmul(&m.loading).unwrap(),
            rot.matmul(&m.within).unwrap().matmul_t(&rot).unwrap(),
        )
        .unwrap();
        let e = [0.2, 1.0, -0.5, 0.3];
        let t = [-0.7, 0.4, 0.1, 1.2];
        let s1 = m.score_pair(&e, &t).unwrap();
        let s2 = rm
            .score_pair(&rot.matvec(&e).unwrap(), &rot.matvec(&t).unwrap())
            .unwrap();
        assert!((s1 - s2).abs() < 1e-8);
    }

    #[test]
    fn score_shape_mismatch() {
        let m = random_model(3, 1, 6);
        assert!(matches!(
            m.score_pair(&[1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    fn identity_data(seed: u64, n_spk: usize) -> (EmbeddingSet, crate::data::GroundTruth) {
        generate_synthetic(&SynthConfig {
            n_speakers: n_spk,
            utts_per_speaker: 10,
            obs_dim: 8,
            latent_dim: 3,
            warp: Warp::Identity,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn em_history_monotone() {
        let (data, _) = identity_data(1, 60);
        let (_, hist) = fit_plda(&data, 3, 25).unwrap();
        assert_eq!(hist.len(), 26);
        for w in hist.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn em_monotone_with_unequal_counts() {
        let (full, _) = identity_data(2, 40);
        // drop a varying number of utterances per speaker
        let mut data = EmbeddingSet::new(full.dim());
        for (k, (_, idx)) in full.speaker_groups().into_iter().enumerate() {
            for &i in idx.iter().take(1 + k % 7) {
                let r = &full.records()[i];
                data.push(r.utt.clone(), r.spk.clone(), r.vector.clone())
                    .unwrap();
            }
        }
        let (m, hist) = fit_plda(&data, 2, 20).unwrap();
        for w in hist.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        assert!(
            (m.log_likelihood(&data).unwrap() - hist[hist.len() - 1]).abs() < 1e-8 * hist[0].abs()
        );
    }

    #[test]
    fn one_iteration_from_truth_barely_moves() {
        let (data, gt) = identity_data(3, 200);
        let truth = PldaModel::new(
            gt.rotation.matvec(&gt.mean).unwrap(),
            gt.rotation.matmul(&gt.loading).unwrap(),
            gt.rotate_cov(&gt.within),
        )
        .unwrap();
        let (m, _) = fit_plda_from(&data, truth.clone(), 1).unwrap();
        assert!(m.between().rel_frobenius_error(truth.between()) < 0.1);
        assert!(m.within().rel_frobenius_error(truth.within()) < 0.1);
        let dm = linalg::norm(&linalg::sub(m.mean(), truth.mean())) / linalg::norm(truth.mean());
        assert!(dm < 0.1);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let (data, _) = identity_data(4, 5);
        assert!(matches!(fit_plda(&data, 0, 1), Err(Error::InvalidDim(_))));
        assert!(matches!(fit_plda(&data, 9, 1), Err(Error::InvalidDim(_))));
        let one = data.filter_speakers(|s| s == "s0000");
        assert!(matches!(
            fit_plda(&one, 1, 1),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn pld1_round_trip() {
        let (data, _) = identity_data(5, 30);
        let b = PldaBackend::fit(&data, 2, 5).unwrap();
        let back = PldaBackend::from_bytes(&b.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), b.to_bytes());
        let e = &data.records()[0].vector;
        let t = &data.records()[1].vector;
        assert_eq!(back.score_pair(e, t).unwrap(), b.score_pair(e, t).unwrap());
    }
}
