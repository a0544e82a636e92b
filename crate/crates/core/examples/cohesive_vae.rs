//! Continues a plain VAE with the cohesive term and measures how much
//! tighter each speaker's codes become.

use spkreg::backend::class_scatter;
use spkreg::data::{generate_synthetic, EmbeddingSet, SynthConfig};
use spkreg::vae::{extract_codes, train_vae, train_vae_from, Architecture, VaeTrainConfig};

/// Within-speaker over total scatter.
fn within_ratio(codes: &EmbeddingSet) -> f64 {
    let (_, within, between) = class_scatter(codes);
    within.trace() / (within.trace() + between.trace())
}

fn main() -> spkreg::Result<()> {
    let (data, _) = generate_synthetic(&SynthConfig::default())?;
    let base = VaeTrainConfig {
        epochs: 40,
        ..VaeTrainConfig::default()
    };
    let (vae, _) = train_vae(&data, &Architecture::desk(), &base)?;
    let cohesive = VaeTrainConfig {
        cohesive_weight: 10.0,
        epochs: 20,
        seed: 1,
        ..base
    };
    let (coh, hist) = train_vae_from(&data, vae.clone(), &cohesive)?;
    let last = &hist.epochs.last().unwrap().loss;
    println!(
        "cohesive training: final loss {:.3}, cohesive term {:.3}",
        last.total, last.cohesive
    );

    for (name, model) in [("vae", vae), ("cohesive", coh)] {
        let codes = extract_codes(&model.into(), &data)?;
        println!("{name:9} within/total scatter {:.3}", within_ratio(&codes));
    }
    Ok(())
}
