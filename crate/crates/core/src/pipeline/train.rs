//! Mini-batch training with Adam and early stopping on dev accuracy.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prepare::PreparedExample;
use super::scorer::{Scorer, ScorerGrads};
use super::encoder::StatementEncoder;
use crate::error::{Error, Result};
use crate::kge::EmbeddingTable;
use crate::net::{Adam, AdamConfig, Parameters};
use crate::util::{argmax, bce_with_logit, derive_seed, sigmoid, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Per-candidate binary cross-entropy on the sigmoid score.
    #[default]
    Bce,
    /// Softmax cross-entropy over the candidates of a question.
    Listwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub adam: AdamConfig,
    /// Epochs without dev improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            loss: Loss::Bce,
            adam: AdamConfig::default(),
            patience: 3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
    pub best_dev_acc: f64,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,dev_acc")?;
        for m in &self.epochs {
            writeln!(
                w,
                "{},{:.10},{:.6},{:.6}",
                m.epoch, m.train_loss, m.train_acc, m.dev_acc
            )?;
        }
        Ok(())
    }
}

/// Loss of one question and its gradient with respect to each candidate
/// logit.
pub fn question_loss(loss: Loss, logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    match loss {
        Loss::Bce => {
            let mut total = 0.0;
            let grads = logits
                .iter()
                .enumerate()
                .map(|(c, &z)| {
                    let y = if c == label { 1.0 } else { 0.0 };
                    total += bce_with_logit(z, y);
                    sigmoid(z) - y
                })
                .collect();
            (total, grads)
        }
        Loss::Listwise => {
            let p = softmax(logits);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            let grads = p
                .iter()
                .enumerate()
                .map(|(c, &pc)| pc - if c == label { 1.0 } else { 0.0 })
                .collect();
            (lse - logits[label], grads)
        }
    }
}

/// Loss, correctness and gradients for one labeled question.
pub fn example_gradients(
    scorer: &Scorer,
    ex: &PreparedExample,
    emb: &EmbeddingTable,
    loss: Loss,
) -> Result<(f64, bool, ScorerGrads)> {
    let label = ex.example.label.ok_or_else(|| Error::Dataset {
        line: 0,
        message: format!("training example {} has no label", ex.example.id),
    })?;
    let mut traces = Vec::with_capacity(ex.candidates.len());
    for c in 0..ex.candidates.len() {
        traces.push(scorer.trace(ex, c, emb, true)?);
    }
    let logits: Vec<f64> = traces.iter().map(|t| t.0.logit).collect();
    let (value, d_logits) = question_loss(loss, &logits, label);
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss {
            value,
            context: format!("example {}", ex.example.id),
        });
    }
    let scores: Vec<f64> = traces.iter().map(|t| t.0.score).collect();
    let correct = argmax(&scores) == Some(label);
    let mut grads = scorer.zero_grads();
    for (c, (trace, s, enc_cache)) in traces.iter().enumerate() {
        let g = scorer
            .net
            .backward(&ex.candidates[c].input, s, trace, d_logits[c])?;
        grads.net.add_scaled(&g.params, 1.0);
        if let (StatementEncoder::Toy(enc), Some(cache), Some(eg)) =
            (&scorer.encoder, enc_cache, grads.encoder.as_mut())
        {
            enc.backward(cache, &g.statement, eg);
        }
    }
    Ok((value, correct, grads))
}

/// Fraction of labeled questions whose top-scoring candidate is correct.
pub fn accuracy(scorer: &Scorer, examples: &[PreparedExample], emb: &EmbeddingTable) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hits = examples
        .par_iter()
        .map(|ex| {
            let scores = scorer.scores(ex, emb)?;
            Ok(usize::from(argmax(&scores) == ex.example.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / examples.len() as f64)
}

/// Trains in place. On return `scorer` holds the parameters of the best dev
/// epoch (the last epoch when `dev` is empty).
pub fn train(
    scorer: &mut Scorer,
    train: &[PreparedExample],
    dev: &[PreparedExample],
    emb: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut net_opt = Adam::new(cfg.adam.clone());
    let mut enc_opt = Adam::new(cfg.adam.clone());
    let train_relations = scorer.net.config.train_relations;
    let net_trainable = move |name: &str| name != "relations" || train_relations;

    let mut best = scorer.clone();
    let mut best_epoch = 0;
    let mut best_dev = if dev.is_empty() { 0.0 } else { accuracy(scorer, dev, emb)? };
    let mut stale = 0;
    let mut epochs = Vec::new();
    let batch_size = cfg.batch_size.max(1);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("epoch{epoch}"))));
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for batch in order.chunks(batch_size) {
            let current: &Scorer = scorer;
            let results = batch
                .par_iter()
                .map(|&i| example_gradients(current, &train[i], emb, cfg.loss))
                .collect::<Vec<_>>();
            let mut total = current.zero_grads();
            for r in results {
                let (value, correct, g) = r?;
                loss_sum += value;
                hits += usize::from(correct);
                total.add_scaled(&g, 1.0);
            }
            total.scale(1.0 / batch.len() as f64);
            net_opt.step(&mut scorer.net.params, &total.net, net_trainable);
            if let (StatementEncoder::Toy(enc), Some(g)) = (&mut scorer.encoder, total.encoder.as_ref()) {
                enc_opt.step(enc, g, |_| true);
            }
            if !scorer.net.params.is_finite() {
                return Err(Error::NonFiniteLoss {
                    value: f64::NAN,
                    context: format!("parameters after a batch in epoch {epoch}"),
                });
            }
        }
        let n = train.len().max(1) as f64;
        let dev_acc = if dev.is_empty() { 0.0 } else { accuracy(scorer, dev, emb)? };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits as f64 / n,
            dev_acc,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.3} dev acc {:.3}",
            m.train_loss,
            m.train_acc,
            m.dev_acc
        );
        epochs.push(m);
        if dev.is_empty() {
            best_epoch = epoch;
            continue;
        }
        if dev_acc > best_dev {
            best_dev = dev_acc;
            best_epoch = epoch;
            best = scorer.clone();
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    if !dev.is_empty() {
        *scorer = best;
    }
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_dev_acc: best_dev,
    })
}
