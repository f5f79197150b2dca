//! Ground → paths → prune for every (example, candidate), with an optional
//! on-disk cache.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::QAExample;
use crate::error::{Error, Result};
use crate::grounding::Grounder;
use crate::kg::KnowledgeGraph;
use crate::kge::{prune, EmbeddingTable, PruneReport, DEFAULT_PRUNE_THRESHOLD};
use crate::net::GraphInput;
use crate::paths::{build_schema_graph_from, SchemaGraph, DEFAULT_MAX_EDGES, DEFAULT_PATH_CAP};
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingConfig {
    pub max_ngram: usize,
    pub max_edges: usize,
    pub cap: usize,
    pub prune: bool,
    pub threshold: f64,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            max_ngram: crate::grounding::DEFAULT_MAX_NGRAM,
            max_edges: DEFAULT_MAX_EDGES,
            cap: DEFAULT_PATH_CAP,
            prune: true,
            threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }
}

/// Schema graph for one candidate, after pruning. `schema` is `None` when
/// the question or the answer grounded to no concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGraph {
    pub schema: Option<SchemaGraph>,
    pub prune: Option<PruneReport>,
    pub ungroundable: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PreparedCandidate {
    pub graph: CandidateGraph,
    pub input: GraphInput,
}

#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub example: QAExample,
    pub candidates: Vec<PreparedCandidate>,
}

pub struct Preprocessor<'a> {
    pub kg: &'a KnowledgeGraph,
    pub emb: &'a EmbeddingTable,
    pub grounder: &'a Grounder,
    pub config: GroundingConfig,
    /// Seed of the fallback relation vectors.
    pub seed: u64,
    pub path_dim: usize,
    pub fallback_scale: f64,
    pub cache_dir: Option<PathBuf>,
}

/// Key of fallback vectors and cache entries for one candidate.
pub fn candidate_key(id: &str, candidate: usize) -> String {
    format!("{id}/{candidate}")
}

impl Preprocessor<'_> {
    /// Hash of everything that influences a candidate graph.
    pub fn config_hash(&self) -> String {
        let mut text = serde_json::to_string(&self.config).expect("plain struct");
        text.push_str(&self.kg.vocab_hash());
        if self.config.prune {
            let mut bytes = Vec::new();
            self.emb
                .write_to(&mut bytes, "")
                .expect("writing to memory cannot fail");
            text.push_str(&sha256_hex(&bytes));
        }
        sha256_hex(text.as_bytes())
    }

    pub fn candidate_graph(&self, ex: &QAExample, candidate: usize) -> Result<CandidateGraph> {
        let q = self.grounder.recognize(&ex.question, self.kg);
        let a = self.grounder.recognize(&ex.candidates[candidate], self.kg);
        let sg = match build_schema_graph_from(
            self.kg,
            &q.concepts(),
            &a.concepts(),
            self.config.max_edges,
            self.config.cap,
        ) {
            Ok(sg) => sg,
            Err(Error::Ungroundable(reason)) => {
                return Ok(CandidateGraph {
                    schema: None,
                    prune: None,
                    ungroundable: Some(reason),
                })
            }
            Err(e) => return Err(e),
        };
        if self.config.prune {
            let (pruned, report) = prune(&sg, self.emb, self.config.threshold);
            Ok(CandidateGraph {
                schema: Some(pruned),
                prune: Some(report),
                ungroundable: None,
            })
        } else {
            Ok(CandidateGraph {
                schema: Some(sg),
                prune: None,
                ungroundable: None,
            })
        }
    }

    fn cached_graph(&self, hash: &str, ex: &QAExample, candidate: usize) -> Result<CandidateGraph> {
        let Some(dir) = &self.cache_dir else {
            return self.candidate_graph(ex, candidate);
        };
        let name = sha256_hex(format!("{hash}\n{}", candidate_key(&ex.id, candidate)).as_bytes());
        let path = dir.join(format!("{name}.json"));
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(g) = serde_json::from_slice(&bytes) {
                return Ok(g);
            }
            log::warn!("ignoring unreadable cache entry {}", path.display());
        }
        let graph = self.candidate_graph(ex, candidate)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(&path, serde_json::to_vec(&graph)?).map_err(|e| Error::io(&path, e))?;
        Ok(graph)
    }

    pub fn to_input(&self, graph: &CandidateGraph, id: &str, candidate: usize) -> GraphInput {
        let key = candidate_key(id, candidate);
        match &graph.schema {
            Some(sg) => GraphInput::from_schema(sg, &key, self.seed, self.path_dim, self.fallback_scale),
            None => GraphInput::ungrounded(&key, self.seed, self.path_dim, self.fallback_scale),
        }
    }

    /// Runs in parallel over (example, candidate); output order follows the
    /// input.
    pub fn prepare(&self, examples: &[QAExample]) -> Result<Vec<PreparedExample>> {
        let hash = self.config_hash();
        let jobs: Vec<(usize, usize)> = examples
            .iter()
            .enumerate()
            .flat_map(|(e, ex)| (0..ex.candidates.len()).map(move |c| (e, c)))
            .collect();
        let graphs = jobs
            .par_iter()
            .map(|&(e, c)| self.cached_graph(&hash, &examples[e], c))
            .collect::<Result<Vec<_>>>()?;
        let mut graphs = graphs.into_iter();
        Ok(examples
            .iter()
            .map(|ex| PreparedExample {
                example: ex.clone(),
                candidates: (0..ex.candidates.len())
                    .map(|c| {
                        let graph = graphs.next().expect("one graph per job");
                        let input = self.to_input(&graph, &ex.id, c);
                        PreparedCandidate { graph, input }
                    })
                    .collect(),
            })
            .collect())
    }
}
