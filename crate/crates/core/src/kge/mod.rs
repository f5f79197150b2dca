//! TransE embeddings, triple and path confidence, and path pruning.
//!
//! The confidence of a triple is `sigmoid(gamma - ‖h + r - t‖)`; a path
//! scores the product of its step confidences. Reverse relation vectors are
//! the negation of forward ones, so walking an edge backwards yields the
//! same confidence as the stored triple.

mod snapshot;
mod transe;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::kg::{ConceptId, RelationId};
use crate::paths::{Path, SchemaGraph};
use crate::util::sigmoid;

pub use snapshot::{read_embeddings, write_embeddings, EMB_SNAPSHOT_MAGIC, EMB_SNAPSHOT_VERSION};
pub use transe::{
    filtered_tail_mrr, initialize, train_transe, TransEConfig, TransEReport, WordVectors,
};

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.15;
/// Pairs with fewer paths than this are never pruned.
pub const MIN_PATHS_TO_PRUNE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
}

impl Norm {
    pub fn of(self, v: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Norm::L1 => v.into_iter().map(f64::abs).sum(),
            Norm::L2 => v.into_iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// |V| × d
    pub concepts: Array2<f64>,
    /// |R| × d, forward direction only.
    pub relations: Array2<f64>,
    pub gamma: f64,
    pub norm: Norm,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.concepts.ncols()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.nrows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.nrows()
    }

    pub fn concept(&self, c: ConceptId) -> ArrayView1<'_, f64> {
        self.concepts.row(c.index())
    }

    /// Relation vector for walking `rel` forwards or backwards.
    pub fn relation(&self, rel: RelationId, reversed: bool) -> Array1<f64> {
        let r = self.relations.row(rel.index());
        if reversed {
            r.mapv(|x| -x)
        } else {
            r.to_owned()
        }
    }

    /// `2|R| × d`: forward vectors followed by their reverses.
    pub fn directed_relations(&self) -> Array2<f64> {
        let neg = self.relations.mapv(|x| -x);
        ndarray::concatenate(ndarray::Axis(0), &[self.relations.view(), neg.view()])
            .expect("same column count")
    }

    pub fn is_finite(&self) -> bool {
        self.concepts.iter().chain(self.relations.iter()).all(|x| x.is_finite())
    }

    /// Translation distance `‖h ± r - t‖`.
    pub fn distance(&self, head: ConceptId, rel: RelationId, tail: ConceptId, reversed: bool) -> f64 {
        let h = self.concepts.row(head.index());
        let r = self.relations.row(rel.index());
        let t = self.concepts.row(tail.index());
        let sign = if reversed { -1.0 } else { 1.0 };
        self.norm
            .of(h.iter().zip(r.iter()).zip(t.iter()).map(|((h, r), t)| h + sign * r - t))
    }

    /// Confidence in (0, 1) that `head --rel--> tail` holds. With
    /// `reversed`, `tail` is reached from `head` by walking `rel` backwards,
    /// i.e. the triple in question is `(tail, rel, head)`.
    pub fn triple_confidence(
        &self,
        head: ConceptId,
        rel: RelationId,
        tail: ConceptId,
        reversed: bool,
    ) -> f64 {
        sigmoid(self.gamma - self.distance(head, rel, tail, reversed))
    }

    /// Product of step confidences.
    pub fn path_score(&self, path: &Path) -> f64 {
        let mut from = path.start;
        let mut score = 1.0;
        for step in &path.steps {
            score *= self.triple_confidence(from, step.rel, step.next, step.reversed);
            from = step.next;
        }
        score
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub threshold: f64,
    pub paths_before: usize,
    pub paths_after: usize,
    /// Pairs whose paths all fell below the threshold; their best path was kept.
    pub floored_pairs: Vec<(usize, usize)>,
}

impl PruneReport {
    pub fn kept_fraction(&self) -> f64 {
        if self.paths_before == 0 {
            1.0
        } else {
            self.paths_after as f64 / self.paths_before as f64
        }
    }
}

/// Drop low-confidence paths. Pairs with fewer than three paths are left
/// alone; a pair that would lose every path keeps its best one (first on
/// ties). Node and edge sets are recomputed afterwards.
pub fn prune(sg: &SchemaGraph, emb: &EmbeddingTable, threshold: f64) -> (SchemaGraph, PruneReport) {
    let mut out = sg.clone();
    let mut report = PruneReport {
        threshold,
        paths_before: sg.num_paths(),
        ..Default::default()
    };
    for pair in &mut out.pairs {
        if pair.paths.len() < MIN_PATHS_TO_PRUNE {
            continue;
        }
        let scores: Vec<f64> = pair.paths.iter().map(|p| emb.path_score(p)).collect();
        let keep: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
        if keep.iter().any(|&k| k) {
            let mut idx = 0;
            pair.paths.retain(|_| {
                let k = keep[idx];
                idx += 1;
                k
            });
        } else {
            let best = crate::util::argmax(&scores).expect("pair has paths");
            let path = pair.paths.swap_remove(best);
            pair.paths = vec![path];
            report.floored_pairs.push((pair.q, pair.a));
        }
    }
    out.recompute_cover();
    report.paths_after = out.num_paths();
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;
    use crate::paths::{build_schema_graph_from, PairPaths, PathStep};
    use ndarray::array;

    fn table() -> EmbeddingTable {
        EmbeddingTable {
            concepts: array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
            relations: array![[1.0, 0.0], [0.0, 1.0]],
            gamma: 1.0,
            norm: Norm::L2,
        }
    }

    #[test]
    fn exact_translation_scores_logistic_gamma() {
        let emb = table();
        let c = emb.triple_confidence(ConceptId(0), RelationId(0), ConceptId(1), false);
        assert!((c - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn confidence_vanishes_with_distance() {
        let mut emb = table();
        emb.concepts[[2, 0]] = 1e6;
        let c = emb.triple_confidence(ConceptId(0), RelationId(0), ConceptId(2), false);
        assert!(c < 1e-100);
    }

    #[test]
    fn reverse_consistency() {
        let emb = table();
        for h in 0..3 {
            for t in 0..3 {
                for r in 0..2 {
                    let (h, r, t) = (ConceptId(h), RelationId(r), ConceptId(t));
                    let fwd = emb.triple_confidence(h, r, t, false);
                    let rev = emb.triple_confidence(t, r, h, true);
                    assert!((fwd - rev).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn path_score_is_product() {
        let emb = table();
        let path = Path {
            start: ConceptId(0),
            steps: vec![
                PathStep { rel: RelationId(0), reversed: false, next: ConceptId(1) },
                PathStep { rel: RelationId(1), reversed: false, next: ConceptId(2) },
            ],
        };
        let single = Path { start: ConceptId(0), steps: path.steps[..1].to_vec() };
        let c0 = emb.triple_confidence(ConceptId(0), RelationId(0), ConceptId(1), false);
        let c1 = emb.triple_confidence(ConceptId(1), RelationId(1), ConceptId(2), false);
        assert_eq!(emb.path_score(&single), c0);
        assert!((emb.path_score(&path) - c0 * c1).abs() < 1e-15);
        assert!(emb.path_score(&path) <= c0.min(c1));
    }

    #[test]
    fn directed_relations_stack_negations() {
        let d = table().directed_relations();
        assert_eq!(d.nrows(), 4);
        assert_eq!(d.row(2), array![-1.0, 0.0]);
    }

    /// Schema graph with one pair whose paths are given explicitly; every
    /// path is a single step to the answer concept through a different
    /// relation, and relation `k` has a score we control via its vector.
    fn graph_with_scores(scores: &[f64]) -> (SchemaGraph, EmbeddingTable) {
        let mut b = KnowledgeGraph::builder();
        for k in 0..scores.len() {
            b.triple("q", &format!("r{k}"), "a", 1.0);
        }
        let kg = b.build().unwrap();
        let q = kg.lookup_surface("q").unwrap();
        let a = kg.lookup_surface("a").unwrap();
        let sg = build_schema_graph_from(&kg, &[q], &[a], 1, 100).unwrap();
        // distance d gives sigmoid(gamma - d) = s  =>  d = gamma - logit(s)
        let gamma = 10.0;
        let mut concepts = Array2::zeros((2, 1));
        concepts[[a.index(), 0]] = 0.0;
        concepts[[q.index(), 0]] = 0.0;
        let mut relations = Array2::zeros((scores.len(), 1));
        for (k, &s) in scores.iter().enumerate() {
            let rel = kg.lookup_relation(&format!("r{k}")).unwrap();
            relations[[rel.index(), 0]] = gamma - (s / (1.0 - s)).ln();
        }
        let emb = EmbeddingTable { concepts, relations, gamma, norm: Norm::L2 };
        (sg, emb)
    }

    fn kept_scores(sg: &SchemaGraph, emb: &EmbeddingTable) -> Vec<f64> {
        sg.pairs[0]
            .paths
            .iter()
            .map(|p| (emb.path_score(p) * 1000.0).round() / 1000.0)
            .collect()
    }

    #[test]
    fn prune_threshold() {
        let (sg, emb) = graph_with_scores(&[0.2, 0.1, 0.16, 0.05]);
        let (pruned, report) = prune(&sg, &emb, 0.15);
        assert_eq!(kept_scores(&pruned, &emb), vec![0.2, 0.16]);
        assert_eq!(report.paths_before, 4);
        assert_eq!(report.paths_after, 2);
    }

    #[test]
    fn prune_exempts_small_pairs() {
        let (sg, emb) = graph_with_scores(&[0.01, 0.02]);
        let (pruned, _) = prune(&sg, &emb, 0.15);
        assert_eq!(pruned, sg);
    }

    #[test]
    fn prune_threshold_zero_is_identity() {
        let (sg, emb) = graph_with_scores(&[0.2, 0.1, 0.16, 0.05]);
        assert_eq!(prune(&sg, &emb, 0.0).0, sg);
    }

    #[test]
    fn prune_keeps_best_when_all_fail() {
        let (sg, emb) = graph_with_scores(&[0.03, 0.05, 0.01]);
        let (pruned, report) = prune(&sg, &emb, 0.15);
        assert_eq!(kept_scores(&pruned, &emb), vec![0.05]);
        assert_eq!(report.floored_pairs, vec![(0, 0)]);
        assert_eq!(pruned.pairs[0], PairPaths { paths: pruned.pairs[0].paths.clone(), ..sg.pairs[0].clone() });
    }
}
