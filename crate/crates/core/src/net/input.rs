//! Network-side view of a schema graph: local node indices, an undirected
//! adjacency list, and per-pair path sequences.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{ConceptId, RelationId};
use crate::paths::SchemaGraph;
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInput {
    /// Local node indices, `steps + 1` of them.
    pub nodes: Vec<usize>,
    /// Relation and reversal flag of each step.
    pub rels: Vec<(RelationId, bool)>,
}

impl PathInput {
    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInput {
    /// `None` stands for a missing concept whose state is the zero vector.
    pub q_node: Option<usize>,
    pub a_node: Option<usize>,
    pub paths: Vec<PathInput>,
    /// Used as the pair's relation vector when `paths` is empty.
    pub fallback: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInput {
    pub concepts: Vec<ConceptId>,
    /// Sorted, deduplicated, no self loops; symmetric.
    pub neighbors: Vec<Vec<usize>>,
    pub pairs: Vec<PairInput>,
    /// True when the question or the answer grounded to nothing.
    pub ungrounded: bool,
}

/// Seeded fallback vector, uniform in `[-scale, scale]`.
pub fn fallback_vector(seed: u64, key: &str, dim: usize, scale: f64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, key));
    Array1::from_shape_simple_fn(dim, || rng.gen_range(-scale..=scale))
}

impl GraphInput {
    /// `key` identifies the (example, candidate) so fallback vectors are
    /// stable across epochs and runs.
    pub fn from_schema(sg: &SchemaGraph, key: &str, seed: u64, path_dim: usize, scale: f64) -> Self {
        let concepts = sg.nodes.clone();
        let local = |c: ConceptId| concepts.binary_search(&c).expect("schema node");
        let mut neighbors = vec![Vec::new(); concepts.len()];
        for e in &sg.edges {
            let (h, t) = (local(e.head), local(e.tail));
            if h != t {
                neighbors[h].push(t);
                neighbors[t].push(h);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let pairs = sg
            .pairs
            .iter()
            .enumerate()
            .map(|(p, pair)| {
                let paths: Vec<PathInput> = pair
                    .paths
                    .iter()
                    .map(|path| PathInput {
                        nodes: path.concepts().into_iter().map(local).collect(),
                        rels: path.steps.iter().map(|s| (s.rel, s.reversed)).collect(),
                    })
                    .collect();
                let fallback = paths
                    .is_empty()
                    .then(|| fallback_vector(seed, &format!("{key}/pair{p}"), path_dim, scale));
                PairInput {
                    q_node: Some(local(sg.cq[pair.q])),
                    a_node: Some(local(sg.ca[pair.a])),
                    paths,
                    fallback,
                }
            })
            .collect();
        GraphInput {
            concepts,
            neighbors,
            pairs,
            ungrounded: false,
        }
    }

    /// Input for a statement with no usable concepts: one virtual pair with
    /// zero concept states and a fallback relation vector.
    pub fn ungrounded(key: &str, seed: u64, path_dim: usize, scale: f64) -> Self {
        GraphInput {
            concepts: Vec::new(),
            neighbors: Vec::new(),
            pairs: vec![PairInput {
                q_node: None,
                a_node: None,
                paths: Vec::new(),
                fallback: Some(fallback_vector(seed, &format!("{key}/pair0"), path_dim, scale)),
            }],
            ungrounded: true,
        }
    }

    pub fn num_paths(&self) -> usize {
        self.pairs.iter().map(|p| p.paths.len()).sum()
    }

    pub fn uses_fallback(&self) -> bool {
        self.ungrounded || self.pairs.iter().any(|p| p.paths.is_empty())
    }

    /// Relabels node `i` as `perm[i]`. Used to check permutation invariance.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.concepts.len();
        let mut concepts = vec![ConceptId(0); n];
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            concepts[perm[i]] = self.concepts[i];
            let mut nb: Vec<usize> = self.neighbors[i].iter().map(|&j| perm[j]).collect();
            nb.sort_unstable();
            neighbors[perm[i]] = nb;
        }
        let pairs = self
            .pairs
            .iter()
            .map(|p| PairInput {
                q_node: p.q_node.map(|i| perm[i]),
                a_node: p.a_node.map(|i| perm[i]),
                paths: p
                    .paths
                    .iter()
                    .map(|path| PathInput {
                        nodes: path.nodes.iter().map(|&i| perm[i]).collect(),
                        rels: path.rels.clone(),
                    })
                    .collect(),
                fallback: p.fallback.clone(),
            })
            .collect();
        GraphInput {
            concepts,
            neighbors,
            pairs,
            ungrounded: self.ungrounded,
        }
    }
}
