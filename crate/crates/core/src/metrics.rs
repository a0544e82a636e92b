//! Equal error rate and Gaussianity diagnostics (skewness, excess kurtosis).

use std::fmt::Write as _;

use crate::backend::ScoreSet;
use crate::data::{EmbeddingSet, TrialList};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Fraction in `[0, 1]`.
    pub eer: f64,
    pub threshold_at_eer: f64,
    /// `(far, frr)` per swept threshold, thresholds ascending.
    pub det_points: Vec<(f64, f64)>,
}

impl EvalResult {
    /// `EER <percent>` with two decimals.
    pub fn report_line(&self) -> String {
        format!("EER {:.2}", 100.0 * self.eer)
    }

    /// One `far,frr` line per DET point.
    pub fn det_csv(&self) -> String {
        let mut out = String::from("far,frr\n");
        for (far, frr) in &self.det_points {
            writeln!(out, "{far},{frr}").unwrap();
        }
        out
    }
}

/// EER of trial scores; see [`eer_from_scores`].
pub fn compute_eer(scores: &ScoreSet, trials: &TrialList) -> Result<EvalResult> {
    if scores.len() != trials.len() {
        return Err(Error::shape(trials.len(), scores.len()));
    }
    let mut tar = Vec::new();
    let mut non = Vec::new();
    for (t, &s) in trials.iter().zip(scores.as_slice()) {
        if t.target {
            tar.push(s);
        } else {
            non.push(s);
        }
    }
    eer_from_scores(&tar, &non)
}

/// Sweeps every distinct score as a threshold θ with
/// `FAR(θ) = #{nontarget ≥ θ}/N_non` and `FRR(θ) = #{target < θ}/N_tar`,
/// plus a final point above all scores. The EER is the FAR/FRR crossing,
/// linearly interpolated between the two operating points that bracket it.
pub fn eer_from_scores(targets: &[f64], nontargets: &[f64]) -> Result<EvalResult> {
    if targets.is_empty() || nontargets.is_empty() {
        return Err(Error::DegenerateTrials);
    }
    if targets.iter().chain(nontargets).any(|s| !s.is_finite()) {
        return Err(Error::DegenerateData("non-finite score".into()));
    }
    let mut tar = targets.to_vec();
    let mut non = nontargets.to_vec();
    tar.sort_by(f64::total_cmp);
    non.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = tar.iter().chain(&non).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (nt, nn) = (tar.len() as f64, non.len() as f64);
    let mut points: Vec<(f64, f64, f64)> = thresholds
        .iter()
        .map(|&th| {
            let far = (non.len() - non.partition_point(|&s| s < th)) as f64 / nn;
            let frr = tar.partition_point(|&s| s < th) as f64 / nt;
            (th, far, frr)
        })
        .collect();
    points.push((f64::INFINITY, 0.0, 1.0));

    // FAR − FRR starts at 1 (lowest threshold: FRR = 0, FAR = 1) and ends at −1.
    let (mut eer, mut threshold) = (points[0].1, points[0].0);
    for w in points.windows(2) {
        let (t0, far0, frr0) = w[0];
        let (t1, far1, frr1) = w[1];
        let d0 = far0 - frr0;
        let d1 = far1 - frr1;
        if d0 >= 0.0 && d1 <= 0.0 {
            if d0 == d1 {
                eer = far0;
                threshold = t0;
            } else {
                let a = d0 / (d0 - d1);
                eer = far0 + a * (far1 - far0);
                threshold = if t1.is_finite() {
                    t0 + a * (t1 - t0)
                } else {
                    t0
                };
            }
            break;
        }
    }
    Ok(EvalResult {
        eer,
        threshold_at_eer: threshold,
        det_points: points.iter().map(|&(_, far, frr)| (far, frr)).collect(),
    })
}

/// Population mean and central moments `(μ, m2, m3, m4)`.
fn central_moments(samples: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            have: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 1e-300) || m2 <= 1e-24 * mean * mean {
        return Err(Error::ZeroVariance);
    }
    Ok((mean, m2, m3, m4))
}

/// `E[(x−μ)³]/σ³` with population moments.
pub fn skewness(samples: &[f64]) -> Result<f64> {
    let (_, m2, m3, _) = central_moments(samples)?;
    Ok(m3 / m2.powf(1.5))
}

/// Excess kurtosis `E[(x−μ)⁴]/σ⁴ − 3` with population moments.
pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    let (_, m2, _, m4) = central_moments(samples)?;
    Ok(m4 / (m2 * m2) - 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentLevel {
    Utterance,
    /// Statistics of the per-speaker mean vectors.
    Speaker,
}

impl std::fmt::Display for MomentLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MomentLevel::Utterance => "utterance",
            MomentLevel::Speaker => "speaker",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub level: MomentLevel,
    /// Per dimension; `None` where the dimension has zero variance.
    pub skew: Vec<Option<f64>>,
    pub kurt: Vec<Option<f64>>,
    /// Mean of the per-dimension values.
    pub pooled_skew: f64,
    pub pooled_kurt: f64,
    /// Mean of the per-dimension magnitudes.
    pub pooled_abs_skew: f64,
    pub pooled_abs_kurt: f64,
}

pub fn moments_report(data: &EmbeddingSet, level: MomentLevel) -> Result<MomentReport> {
    let rows: Vec<Vec<f64>> = match level {
        MomentLevel::Utterance => data.iter().map(|r| r.vector.clone()).collect(),
        MomentLevel::Speaker => data
            .speaker_groups()
            .into_iter()
            .map(|(_, idx)| {
                let mut m = vec![0.0; data.dim()];
                for &i in &idx {
                    crate::linalg::axpy(1.0 / idx.len() as f64, &data.records()[i].vector, &mut m);
                }
                m
            })
            .collect(),
    };
    if rows.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            have: rows.len(),
        });
    }
    let mut skew = Vec::with_capacity(data.dim());
    let mut kurt = Vec::with_capacity(data.dim());
    let mut column = vec![0.0; rows.len()];
    for d in 0..data.dim() {
        for (c, r) in column.iter_mut().zip(&rows) {
            *c = r[d];
        }
        match central_moments(&column) {
            Ok((_, m2, m3, m4)) => {
                skew.push(Some(m3 / m2.powf(1.5)));
                kurt.push(Some(m4 / (m2 * m2) - 3.0));
            }
            Err(Error::ZeroVariance) => {
                skew.push(None);
                kurt.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let pool = |v: &[Option<f64>], f: fn(f64) -> f64| -> f64 {
        let present: Vec<f64> = v.iter().flatten().map(|&x| f(x)).collect();
        if present.is_empty() {
            f64::NAN
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    };
    Ok(MomentReport {
        level,
        pooled_skew: pool(&skew, |x| x),
        pooled_kurt: pool(&kurt, |x| x),
        pooled_abs_skew: pool(&skew, f64::abs),
        pooled_abs_kurt: pool(&kurt, f64::abs),
        skew,
        kurt,
    })
}
