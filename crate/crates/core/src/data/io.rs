use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EmbeddingSet, TrialList};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// Header `utt,spk,d0,...`, one record per line.
    Csv,
    /// `EMB1` container.
    Binary,
}

impl EmbeddingFormat {
    /// `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let bytes = match format {
        EmbeddingFormat::Csv => embeddings_to_csv(set).into_bytes(),
        EmbeddingFormat::Binary => embeddings_to_binary(set),
    };
    write_file(path, &bytes)
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    match format {
        EmbeddingFormat::Csv => embeddings_from_csv(&read_text(path)?),
        EmbeddingFormat::Binary => embeddings_from_binary(&read_file(path)?),
    }
}

pub(crate) fn embeddings_to_csv(set: &EmbeddingSet) -> String {
    let mut out = String::from("utt,spk");
    for d in 0..set.dim() {
        write!(out, ",d{d}").unwrap();
    }
    out.push('\n');
    for r in set.iter() {
        out.push_str(&r.utt);
        out.push(',');
        out.push_str(&r.spk);
        for v in &r.vector {
            // `Display` for f64 is the shortest string that round-trips.
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub(crate) fn embeddings_from_csv(text: &str) -> Result<EmbeddingSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::EmptySet);
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "utt" || cols[1] != "spk" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `utt,spk,d0,...`".into(),
        });
    }
    let dim = cols.len() - 2;
    let mut set = EmbeddingSet::new(dim);
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        let vector = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid number `{f}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        set.push(fields[0], fields[1], vector)
            .map_err(|e| match e {
                Error::InvalidConfig(msg) | Error::DegenerateData(msg) => {
                    Error::Parse { line: lineno, msg }
                }
                other => other,
            })?;
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(set)
}

/// `EMB1`: u32 count, u32 dim, then per record length-prefixed utt and spk
/// ids followed by `dim` f64 values.
pub(crate) fn embeddings_to_binary(set: &EmbeddingSet) -> Vec<u8> {
    let mut w = Writer::new(b"EMB1");
    w.u32(set.len());
    w.u32(set.dim());
    for r in set.iter() {
        w.str(&r.utt);
        w.str(&r.spk);
        w.f64s(&r.vector);
    }
    w.finish()
}

pub(crate) fn embeddings_from_binary(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut r = Reader::new(bytes, b"EMB1")?;
    let count = r.u32()?;
    let dim = r.u32()?;
    let mut set = EmbeddingSet::new(dim);
    for _ in 0..count {
        let utt = r.str()?;
        let spk = r.str()?;
        let v = r.f64s(dim)?;
        set.push(utt, spk, v)?;
    }
    r.finish()?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(set)
}

pub(crate) fn parse_trials(text: &str) -> Result<TrialList> {
    let mut list = TrialList::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        if f.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", f.len())));
        }
        let target = match f[2] {
            "target" => true,
            "nontarget" => false,
            other => {
                return Err(parse_err(format!(
                    "label must be target|nontarget, got `{other}`"
                )))
            }
        };
        list.push(f[0], f[1], target)?;
    }
    Ok(list)
}

/// Lines `enroll test target|nontarget`.
pub fn load_trials(path: &Path) -> Result<TrialList> {
    parse_trials(&read_text(path)?)
}

pub fn save_trials(trials: &TrialList, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in trials {
        let label = if t.target { "target" } else { "nontarget" };
        writeln!(out, "{} {} {}", t.enroll, t.test, label).unwrap();
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn scores_to_text(trials: &TrialList, scores: &[f64]) -> String {
    let mut out = String::new();
    for (t, s) in trials.iter().zip(scores) {
        writeln!(out, "{} {} {:.6}", t.enroll, t.test, s).unwrap();
    }
    out
}

/// Lines `enroll test score`, score with 6 decimals.
pub fn save_scores(trials: &TrialList, scores: &[f64], path: &Path) -> Result<()> {
    if trials.len() != scores.len() {
        return Err(Error::shape(trials.len(), scores.len()));
    }
    write_file(path, scores_to_text(trials, scores).as_bytes())
}

pub fn load_scores(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 3 fields, found {}", f.len()),
            });
        }
        let score = f[2].parse::<f64>().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("invalid score `{}`", f[2]),
        })?;
        out.push((f[0].to_owned(), f[1].to_owned(), score));
    }
    Ok(out)
}
