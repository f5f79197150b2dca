use std::collections::{HashMap, HashSet};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, Norm, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransEConfig {
    pub dim: usize,
    pub epochs: usize,
    pub margin: f64,
    pub lr: f64,
    pub neg_per_pos: usize,
    pub norm: Norm,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TransEConfig {
    fn default() -> Self {
        TransEConfig {
            dim: 100,
            epochs: 100,
            margin: 1.0,
            lr: 0.01,
            neg_per_pos: 1,
            norm: Norm::L2,
            gamma: DEFAULT_GAMMA,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransEReport {
    /// Mean hinge loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Concepts initialized from word vectors.
    pub from_word_vectors: usize,
    pub warnings: Vec<String>,
}

/// Word vectors in the whitespace-separated `token v1 v2 ...` text format.
/// A leading `count dim` header line (word2vec style) is skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = WordVectors::default();
        for (lineno, line) in text.lines().enumerate() {
            let mut cols = line.split_whitespace();
            let Some(token) = cols.next() else { continue };
            let values: std::result::Result<Vec<f64>, _> = cols.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| Error::Dataset {
                line: lineno + 1,
                message: format!("bad word vector: {e}"),
            })?;
            if lineno == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
                continue;
            }
            if values.is_empty() {
                continue;
            }
            if out.dim == 0 {
                out.dim = values.len();
            } else if values.len() != out.dim {
                return Err(Error::Dataset {
                    line: lineno + 1,
                    message: format!("expected {} values, got {}", out.dim, values.len()),
                });
            }
            out.vectors.insert(token.to_lowercase(), values);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Mean vector over the underscore-separated tokens of `surface` that
    /// have vectors; `None` if no token does.
    pub fn concept_vector(&self, surface: &str) -> Option<Vec<f64>> {
        let found: Vec<&Vec<f64>> = surface
            .split('_')
            .filter_map(|t| self.vectors.get(t))
            .collect();
        if found.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; self.dim];
        for v in &found {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        let n = found.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Some(mean)
    }
}

/// Initial table: word vectors where available, otherwise uniform in
/// `[-1, 1] / sqrt(d)`. Relations are random and scaled to unit norm.
pub fn initialize(
    kg: &KnowledgeGraph,
    cfg: &TransEConfig,
    word_vectors: Option<&WordVectors>,
    report: &mut TransEReport,
) -> Result<EmbeddingTable> {
    if cfg.dim < 2 {
        return Err(Error::Config("embedding dimension must be at least 2".into()));
    }
    let d = cfg.dim;
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let word_vectors = match word_vectors {
        Some(wv) if wv.dim != d => {
            report.warnings.push(format!(
                "word vectors have dimension {}, expected {d}; using random init",
                wv.dim
            ));
            None
        }
        other => other,
    };
    let mut concepts = Array2::zeros((kg.num_concepts(), d));
    for (i, surface) in kg.concepts().iter().enumerate() {
        let random: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let v = match word_vectors.and_then(|wv| wv.concept_vector(surface)) {
            Some(v) => {
                report.from_word_vectors += 1;
                v
            }
            None => random,
        };
        concepts.row_mut(i).assign(&Array1::from(v));
    }
    let mut relations = Array2::zeros((kg.num_relations(), d));
    for mut row in relations.rows_mut() {
        row.mapv_inplace(|_| rng.gen_range(-1.0..1.0) * scale);
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    Ok(EmbeddingTable {
        concepts,
        relations,
        gamma: cfg.gamma,
        norm: cfg.norm,
    })
}

/// Train TransE with the margin ranking loss
/// `max(0, margin + d(h, r, t) - d(h', r, t'))` and plain SGD. Negatives
/// replace the head or the tail (coin flip) with a uniformly drawn concept.
/// Concept vectors are renormalized to unit L2 norm at the start of every
/// epoch.
///
/// An unreadable `word_vectors` file is reported as a warning and random
/// initialization is used instead.
pub fn train_transe(
    kg: &KnowledgeGraph,
    cfg: &TransEConfig,
    word_vectors: Option<&Path>,
) -> Result<(EmbeddingTable, TransEReport)> {
    if kg.num_triples() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut report = TransEReport::default();
    let wv = match word_vectors {
        None => None,
        Some(p) => match WordVectors::load(p) {
            Ok(wv) => Some(wv),
            Err(e) => {
                let msg = format!("could not read word vectors ({e}); using random init");
                log::warn!("{msg}");
                report.warnings.push(msg);
                None
            }
        },
    };
    let mut emb = initialize(kg, cfg, wv.as_ref(), &mut report)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_616e_7365);
    let n_concepts = kg.num_concepts();
    let mut order: Vec<usize> = (0..kg.num_triples()).collect();

    for epoch in 0..cfg.epochs {
        for mut row in emb.concepts.rows_mut() {
            let n = row.dot(&row).sqrt();
            if n > 0.0 {
                row /= n;
            }
        }
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &ti in &order {
            let t = kg.triples()[ti];
            for _ in 0..cfg.neg_per_pos {
                let corrupt_head = rng.gen_bool(0.5);
                let mut e = rng.gen_range(0..n_concepts);
                let original = if corrupt_head { t.head.index() } else { t.tail.index() };
                if e == original && n_concepts > 1 {
                    e = (e + 1 + rng.gen_range(0..n_concepts - 1)) % n_concepts;
                }
                let (nh, nt) = if corrupt_head {
                    (e, t.tail.index())
                } else {
                    (t.head.index(), e)
                };
                let loss = sgd_step(&mut emb, cfg, t, nh, nt);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        value: loss,
                        context: format!(
                            "TransE epoch {epoch}, triple #{ti} ({}, {}, {})",
                            t.head, t.rel, t.tail
                        ),
                    });
                }
                total += loss;
                count += 1;
            }
        }
        report.epoch_losses.push(if count == 0 { 0.0 } else { total / count as f64 });
    }
    Ok((emb, report))
}

fn residual(emb: &EmbeddingTable, h: usize, r: usize, t: usize) -> Array1<f64> {
    &emb.concepts.row(h) + &emb.relations.row(r) - emb.concepts.row(t)
}

/// Gradient of the distance with respect to the residual.
fn distance_grad(norm: Norm, res: &Array1<f64>) -> (f64, Array1<f64>) {
    match norm {
        Norm::L2 => {
            let d = res.dot(res).sqrt();
            let g = if d > 0.0 { res / d } else { Array1::zeros(res.len()) };
            (d, g)
        }
        Norm::L1 => {
            let d = res.iter().map(|x| x.abs()).sum();
            (d, res.mapv(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }))
        }
    }
}

fn sgd_step(emb: &mut EmbeddingTable, cfg: &TransEConfig, t: Triple, nh: usize, nt: usize) -> f64 {
    let (h, r, tl) = (t.head.index(), t.rel.index(), t.tail.index());
    let (d_pos, g_pos) = distance_grad(cfg.norm, &residual(emb, h, r, tl));
    let (d_neg, g_neg) = distance_grad(cfg.norm, &residual(emb, nh, r, nt));
    let loss = cfg.margin + d_pos - d_neg;
    if !loss.is_finite() {
        return loss;
    }
    if loss <= 0.0 {
        return 0.0;
    }
    let lr = cfg.lr;
    emb.concepts.row_mut(h).scaled_add(-lr, &g_pos);
    emb.concepts.row_mut(tl).scaled_add(lr, &g_pos);
    emb.relations.row_mut(r).scaled_add(-lr, &g_pos);
    emb.concepts.row_mut(nh).scaled_add(lr, &g_neg);
    emb.concepts.row_mut(nt).scaled_add(-lr, &g_neg);
    emb.relations.row_mut(r).scaled_add(lr, &g_neg);
    loss
}

/// Filtered mean reciprocal rank of the true tail of each triple in `eval`
/// among all concepts, ranked by translation distance. Other known tails of
/// the same (head, relation) in `kg` are skipped.
pub fn filtered_tail_mrr(emb: &EmbeddingTable, kg: &KnowledgeGraph, eval: &[Triple]) -> f64 {
    let mut known: HashMap<(usize, usize), HashSet<usize>> = HashMap::new();
    for t in kg.triples() {
        known
            .entry((t.head.index(), t.rel.index()))
            .or_default()
            .insert(t.tail.index());
    }
    let mut total = 0.0;
    for t in eval {
        let target = emb.distance(t.head, t.rel, t.tail, false);
        let filter = &known[&(t.head.index(), t.rel.index())];
        let better = (0..emb.num_concepts())
            .filter(|&e| e != t.tail.index() && !filter.contains(&e))
            .filter(|&e| {
                emb.distance(t.head, t.rel, crate::kg::ConceptId(e as u32), false) < target
            })
            .count();
        total += 1.0 / (better + 1) as f64;
    }
    if eval.is_empty() {
        0.0
    } else {
        total / eval.len() as f64
    }
}
