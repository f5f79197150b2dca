//! CommonsenseQA-style JSONL datasets.
//!
//! One object per line:
//!
//! ```json
//! {"id": "q1", "answerKey": "B",
//!  "question": {"stem": "...", "choices": [{"label": "A", "text": "..."}, ...]}}
//! ```
//!
//! `answerKey` is absent for unlabeled (test) data.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub candidates: Vec<String>,
    /// Choice letters as given in the file, parallel to `candidates`.
    pub labels: Vec<String>,
    pub label: Option<usize>,
}

impl QAExample {
    pub fn label_letter(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

#[derive(Deserialize, Serialize)]
struct RawChoice {
    label: String,
    text: String,
}

#[derive(Deserialize, Serialize)]
struct RawQuestion {
    stem: String,
    choices: Vec<RawChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_concept: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct RawExample {
    id: String,
    #[serde(rename = "answerKey", default, skip_serializing_if = "Option::is_none")]
    answer_key: Option<String>,
    question: RawQuestion,
}

fn convert(raw: RawExample, line: usize) -> Result<QAExample> {
    let bad = |message: String| Error::Dataset { line, message };
    if raw.question.choices.len() < 2 {
        return Err(bad(format!(
            "question {} has {} choice(s), need at least 2",
            raw.id,
            raw.question.choices.len()
        )));
    }
    let labels: Vec<String> = raw.question.choices.iter().map(|c| c.label.clone()).collect();
    let label = match &raw.answer_key {
        None => None,
        Some(key) => Some(
            labels
                .iter()
                .position(|l| l == key)
                .ok_or_else(|| bad(format!("answerKey {key:?} is not a choice label")))?,
        ),
    };
    Ok(QAExample {
        id: raw.id,
        question: raw.question.stem,
        candidates: raw.question.choices.into_iter().map(|c| c.text).collect(),
        labels,
        label,
    })
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Vec<QAExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(convert(raw, line_no)?);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QAExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file))
}

pub fn write_dataset<W: Write>(w: &mut W, examples: &[QAExample]) -> Result<()> {
    for ex in examples {
        let raw = RawExample {
            id: ex.id.clone(),
            answer_key: ex.label.map(|l| ex.labels[l].clone()),
            question: RawQuestion {
                stem: ex.question.clone(),
                choices: ex
                    .labels
                    .iter()
                    .zip(&ex.candidates)
                    .map(|(label, text)| RawChoice {
                        label: label.clone(),
                        text: text.clone(),
                    })
                    .collect(),
                question_concept: None,
            },
        };
        serde_json::to_writer(&mut *w, &raw)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Seeded split of `held_out` examples from a training set. Both halves
/// keep the original relative order.
pub fn split_held_out(examples: &[QAExample], held_out: usize, seed: u64) -> (Vec<QAExample>, Vec<QAExample>) {
    let held_out = held_out.min(examples.len());
    let mut idx: Vec<usize> = (0..examples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_held = vec![false; examples.len()];
    for &i in &idx[..held_out] {
        is_held[i] = true;
    }
    let mut train = Vec::with_capacity(examples.len() - held_out);
    let mut held = Vec::with_capacity(held_out);
    for (ex, h) in examples.iter().zip(is_held) {
        if h {
            held.push(ex.clone());
        } else {
            train.push(ex.clone());
        }
    }
    (train, held)
}

/// Choice letters `A`, `B`, ... for `n` candidates.
pub fn letters(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| char::from(b'A' + (i % 26) as u8).to_string())
        .collect()
}
