//! Trains a VAE on cubic-warped embeddings and compares the Gaussianity of
//! its codes with that of the inputs.

use spkreg::data::{generate_synthetic, SynthConfig};
use spkreg::metrics::{moments_report, MomentLevel};
use spkreg::vae::{extract_codes, train_vae, Architecture, VaeTrainConfig};

fn main() -> spkreg::Result<()> {
    let (data, _) = generate_synthetic(&SynthConfig::default())?;
    let cfg = VaeTrainConfig {
        epochs: 40,
        ..VaeTrainConfig::default()
    };
    let (model, history) = train_vae(&data, &Architecture::desk(), &cfg)?;
    for e in history.epochs.iter().step_by(10) {
        let l = &e.loss;
        println!(
            "epoch {:3}  loss {:9.3}  kl {:7.3}  recon {:9.3}",
            e.epoch, l.total, l.kl, l.recon
        );
    }

    let codes = extract_codes(&model.into(), &data)?;
    for (name, set) in [("inputs", &data), ("codes", &codes)] {
        let m = moments_report(set, MomentLevel::Utterance)?;
        println!(
            "{name:6}  |skew| {:.3}  |kurt| {:.3}",
            m.pooled_abs_skew, m.pooled_abs_kurt
        );
    }
    Ok(())
}
