//! Compares the analytic gradient of the cohesive VAE loss with central
//! finite differences, parameter by parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spkreg::data::EmbeddingSet;
use spkreg::linalg::Matrix;
use spkreg::vae::{
    batch_loss, batch_loss_and_grad, Architecture, SpeakerMeanTable, VaeModel, VaeTrainConfig,
};

fn main() -> spkreg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arch = Architecture {
        hidden_width: 6,
        encoder_hidden: 3,
        decoder_hidden: 3,
        code_dim: 2,
        ..Architecture::desk()
    };
    let mut model = VaeModel::init(4, &arch, 5)?;
    let mut data = EmbeddingSet::new(4);
    for i in 0..6 {
        let v: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        data.push(format!("u{i}"), format!("s{}", i % 2), v)?;
    }
    let x = data.to_matrix();
    let speakers: Vec<&str> = data.iter().map(|r| r.spk.as_str()).collect();
    let eps = Matrix::from_vec(6, 2, (0..12).map(|_| rng.sample(StandardNormal)).collect())?;
    let means = SpeakerMeanTable::compute(&model, &data)?;
    let cfg = VaeTrainConfig {
        cohesive_weight: 10.0,
        ..VaeTrainConfig::default()
    };

    let (_, grads) = batch_loss_and_grad(&model, &x, &speakers, &means, &cfg, &eps)?;
    let analytic = grads.flatten();
    let p0 = model.parameters();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..p0.len() {
        let mut p = p0.clone();
        p[k] = p0[k] + h;
        model.set_parameters(&p)?;
        let up = batch_loss(&model, &x, &speakers, &means, &cfg, &eps)?.total;
        p[k] = p0[k] - h;
        model.set_parameters(&p)?;
        let down = batch_loss(&model, &x, &speakers, &means, &cfg, &eps)?.total;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    println!("{} parameters, worst relative error {worst:.2e}", p0.len());
    Ok(())
}
