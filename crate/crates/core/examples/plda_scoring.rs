//! Fits PLDA by EM on unwarped data, checks the recovered covariances
//! against the generator and scores held-out trials.

use spkreg::backend::{fit_plda, plda_score_trials, PldaBackend};
use spkreg::data::{generate_synthetic, make_trials, SynthConfig, Warp};
use spkreg::metrics::compute_eer;

fn main() -> spkreg::Result<()> {
    let (all, truth) = generate_synthetic(&SynthConfig {
        n_speakers: 250,
        warp: Warp::Identity,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let (train, eval) = all.split_speakers(200);

    let (model, loglik) = fit_plda(&train, 5, 20)?;
    println!(
        "log-likelihood: first {:.2}, last {:.2}",
        loglik[0],
        loglik[loglik.len() - 1]
    );
    let b = truth.rotate_cov(&truth.between());
    let w = truth.rotate_cov(&truth.within);
    println!(
        "relative error: B {:.3}, W {:.3}",
        model.between().rel_frobenius_error(&b),
        model.within().rel_frobenius_error(&w)
    );

    let trials = make_trials(&eval, 1000, 1000, 1, false)?;
    let scores = plda_score_trials(&PldaBackend::from(model), &eval, &eval, &trials)?;
    println!("held-out {}", compute_eer(&scores, &trials)?.report_line());
    Ok(())
}
