//! Prediction files and attention-based explanation reports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prepare::PreparedExample;
use super::scorer::Scorer;
use crate::error::Result;
use crate::kg::KnowledgeGraph;
use crate::kge::EmbeddingTable;
use crate::util::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub scores: Vec<f64>,
    pub chosen: usize,
    /// Choice letter of `chosen`.
    pub answer: String,
    /// Candidates scored with at least one fallback relation vector.
    pub fallback: Vec<usize>,
    pub config_hash: String,
}

/// Index of the best score; ties go to the lowest index.
pub fn choose(scores: &[f64]) -> usize {
    argmax(scores).unwrap_or(0)
}

pub fn predict(scorer: &Scorer, examples: &[PreparedExample], emb: &EmbeddingTable) -> Result<Vec<Prediction>> {
    examples
        .par_iter()
        .map(|ex| {
            let scores = scorer.scores(ex, emb)?;
            let chosen = choose(&scores);
            Ok(Prediction {
                id: ex.example.id.clone(),
                answer: ex.example.label_letter(chosen).to_string(),
                fallback: ex
                    .candidates
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.input.uses_fallback())
                    .map(|(i, _)| i)
                    .collect(),
                scores,
                chosen,
                config_hash: scorer.config_hash.clone(),
            })
        })
        .collect()
}

pub fn write_predictions<W: Write>(w: &mut W, predictions: &[Prediction]) -> Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut *w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Accuracy of predictions against labeled examples.
pub fn prediction_accuracy(predictions: &[Prediction], examples: &[PreparedExample]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(examples)
        .filter(|(p, e)| e.example.label == Some(p.chosen))
        .count();
    hits as f64 / predictions.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathExplanation {
    pub alpha: f64,
    /// e.g. `(glue_stick) -AtLocation-> (office)`; `<-rel-` marks a step
    /// taken against the edge direction.
    pub rendered: String,
    pub concepts: Vec<String>,
    pub relations: Vec<String>,
    pub reversed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExplanation {
    /// Index of the pair in the schema graph (question-major).
    pub pair: usize,
    pub question_concept: String,
    pub answer_concept: String,
    pub beta: f64,
    pub num_paths: usize,
    pub fallback: bool,
    pub paths: Vec<PathExplanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub id: String,
    pub candidate: usize,
    pub answer: String,
    pub score: f64,
    pub config_hash: String,
    /// Highest `β̂` first.
    pub pairs: Vec<PairExplanation>,
}

impl ExplanationReport {
    pub fn beta_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.beta).sum()
    }
}

/// Indices sorted by descending weight, ties by index.
fn ranked(weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    idx
}

pub fn explain(
    scorer: &Scorer,
    ex: &PreparedExample,
    candidate: usize,
    kg: &KnowledgeGraph,
    emb: &EmbeddingTable,
    top_pairs: usize,
    top_paths: usize,
) -> Result<ExplanationReport> {
    let (trace, _, _) = scorer.trace(ex, candidate, emb, false)?;
    let input = &ex.candidates[candidate].input;
    let name = |node: Option<usize>| -> Result<String> {
        match node {
            Some(i) => Ok(kg.surface(input.concepts[i])?.to_string()),
            None => Ok("<none>".to_string()),
        }
    };
    let mut pairs = Vec::new();
    for p in ranked(trace.beta()).into_iter().take(top_pairs) {
        let pair = &input.pairs[p];
        let alpha = &trace.alpha()[p];
        let mut paths = Vec::new();
        for k in ranked(alpha).into_iter().take(top_paths) {
            let path = &pair.paths[k];
            let concepts = path
                .nodes
                .iter()
                .map(|&i| Ok(kg.surface(input.concepts[i])?.to_string()))
                .collect::<Result<Vec<_>>>()?;
            let relations = path
                .rels
                .iter()
                .map(|&(r, _)| Ok(kg.relation_name(r)?.to_string()))
                .collect::<Result<Vec<_>>>()?;
            let reversed: Vec<bool> = path.rels.iter().map(|&(_, rev)| rev).collect();
            let mut rendered = format!("({})", concepts[0]);
            for s in 0..relations.len() {
                if reversed[s] {
                    rendered.push_str(&format!(" <-{}- ({})", relations[s], concepts[s + 1]));
                } else {
                    rendered.push_str(&format!(" -{}-> ({})", relations[s], concepts[s + 1]));
                }
            }
            paths.push(PathExplanation {
                alpha: alpha[k],
                rendered,
                concepts,
                relations,
                reversed,
            });
        }
        pairs.push(PairExplanation {
            pair: p,
            question_concept: name(pair.q_node)?,
            answer_concept: name(pair.a_node)?,
            beta: trace.beta()[p],
            num_paths: pair.paths.len(),
            fallback: pair.paths.is_empty(),
            paths,
        });
    }
    Ok(ExplanationReport {
        id: ex.example.id.clone(),
        candidate,
        answer: ex.example.candidates[candidate].clone(),
        score: trace.score,
        config_hash: scorer.config_hash.clone(),
        pairs,
    })
}
