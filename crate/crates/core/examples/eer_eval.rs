//! Equal error rate on hand-made score sets, plus a DET curve.

use spkreg::metrics::eer_from_scores;

fn main() -> spkreg::Result<()> {
    let cases: [(&str, &[f64], &[f64]); 3] = [
        ("separated", &[0.9, 0.8, 0.7], &[0.3, 0.2, 0.1]),
        ("identical", &[0.5, 0.5], &[0.5, 0.5]),
        ("one swap", &[0.9, 0.6, 0.2], &[0.7, 0.3, 0.1]),
    ];
    for (name, tar, non) in cases {
        let r = eer_from_scores(tar, non)?;
        println!(
            "{name:10} eer {:.4} at threshold {:.3}",
            r.eer, r.threshold_at_eer
        );
    }
    let r = eer_from_scores(&[0.9, 0.6, 0.2], &[0.7, 0.3, 0.1])?;
    print!("{}", r.det_csv());
    Ok(())
}
