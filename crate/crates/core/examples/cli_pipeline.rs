//! Drives the command-line stages in-process: synthesize, train a VAE,
//! extract codes, fit PLDA, score and evaluate.

use spkreg::cli::run;

fn main() {
    let dir = std::env::temp_dir().join("spkreg-cli-example");
    let p = |f: &str| dir.join(f).display().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "synth".into(),
            format!("out={}", p("train.emb")),
            format!("eval_out={}", p("eval.emb")),
            "n_speakers=250".into(),
            "eval_speakers=50".into(),
            format!("trials={}", p("trials.txt")),
        ],
        vec![
            "train-vae".into(),
            format!("train={}", p("train.emb")),
            format!("out={}", p("v.vae")),
            "epochs=30".into(),
        ],
        vec![
            "extract".into(),
            format!("model={}", p("v.vae")),
            format!("input={}", p("train.emb")),
            format!("out={}", p("v_train.emb")),
        ],
        vec![
            "extract".into(),
            format!("model={}", p("v.vae")),
            format!("input={}", p("eval.emb")),
            format!("out={}", p("v_eval.emb")),
        ],
        vec![
            "fit-backend".into(),
            "kind=plda".into(),
            format!("train={}", p("v_train.emb")),
            format!("out={}", p("v.pld")),
        ],
        vec![
            "score".into(),
            "method=plda".into(),
            format!("model={}", p("v.pld")),
            format!("enroll={}", p("v_eval.emb")),
            format!("trials={}", p("trials.txt")),
            format!("out={}", p("scores.txt")),
        ],
        vec![
            "eval".into(),
            format!("scores={}", p("scores.txt")),
            format!("trials={}", p("trials.txt")),
            format!("out={}", p("eer.csv")),
        ],
    ];
    for step in steps {
        let code = run(std::iter::once("spkreg".to_owned()).chain(step));
        if code != 0 {
            std::process::exit(code);
        }
    }
}
