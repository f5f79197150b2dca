//! Synthetic data: a small translation-structured graph for embedding
//! sanity checks, a planted-evidence multiple-choice task, and random
//! instances for oracle tests.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grounding::{lemmatize, StopWords};
use crate::kg::{ConceptId, Direction, KnowledgeGraph};
use crate::kge::{EmbeddingTable, Norm, DEFAULT_GAMMA};
use crate::net::GraphInput;
use crate::paths::build_schema_graph_from;
use crate::pipeline::dataset::{letters, write_dataset, QAExample};

/// Writes `rel \t head \t tail \t weight` lines, readable by the ingester.
pub fn write_triples_tsv<W: Write>(kg: &KnowledgeGraph, w: &mut W) -> Result<()> {
    for t in kg.triples() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            kg.relation_name(t.rel)?,
            kg.surface(t.head)?,
            kg.surface(t.tail)?,
            t.weight
        )?;
    }
    Ok(())
}

/// 30 concepts, 5 relations, 100 triples. Concepts are random points in a
/// latent space, relations random translations, and each sampled
/// (head, relation) points at the concept nearest to `head + relation`.
pub fn translation_kg(seed: u64) -> KnowledgeGraph {
    const CONCEPTS: usize = 30;
    const RELATIONS: usize = 5;
    const TRIPLES: usize = 100;
    const DIM: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..CONCEPTS)
        .map(|_| (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let shifts: Vec<Vec<f64>> = (0..RELATIONS)
        .map(|_| (0..DIM).map(|_| rng.gen_range(-0.8..0.8)).collect())
        .collect();
    let mut heads: Vec<(usize, usize)> = (0..CONCEPTS)
        .flat_map(|h| (0..RELATIONS).map(move |r| (h, r)))
        .collect();
    heads.shuffle(&mut rng);
    let mut b = KnowledgeGraph::builder();
    for r in 0..RELATIONS {
        b.relation(&format!("rel{r}"));
    }
    for c in 0..CONCEPTS {
        b.concept(&format!("ent{c:02}"));
    }
    for &(h, r) in heads.iter().take(TRIPLES) {
        let target: Vec<f64> = points[h].iter().zip(&shifts[r]).map(|(a, b)| a + b).collect();
        let tail = (0..CONCEPTS)
            .filter(|&c| c != h)
            .min_by(|&a, &b| {
                let da: f64 = points[a].iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum();
                let db: f64 = points[b].iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum();
                da.total_cmp(&db)
            })
            .expect("at least two concepts");
        b.triple(&format!("ent{h:02}"), &format!("rel{r}"), &format!("ent{tail:02}"), 1.0);
    }
    b.build().expect("non-empty graph")
}

/// Relations that count as evidence in the toy task when walked forward.
pub const EVIDENCE_RELATIONS: [&str; 2] = ["AtLocation", "UsedFor"];
pub const TOY_RELATIONS: [&str; 5] = ["AtLocation", "UsedFor", "RelatedTo", "IsA", "PartOf"];

/// Planted-evidence multiple-choice task over its own knowledge graph.
#[derive(Debug, Clone)]
pub struct ToyTask {
    pub kg: KnowledgeGraph,
    pub train: Vec<QAExample>,
    pub dev: Vec<QAExample>,
    /// Surfaces along the planted evidence path of each example, question
    /// concept first; parallel to `train` followed by `dev`.
    pub evidence: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyTaskConfig {
    pub train: usize,
    pub dev: usize,
    pub candidates: usize,
    /// Probability that the evidence takes two hops through a bridge concept.
    pub two_hop: f64,
    /// Probability that a distractor receives a misleading edge.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ToyTaskConfig {
    fn default() -> Self {
        ToyTaskConfig {
            train: 500,
            dev: 100,
            candidates: 5,
            two_hop: 0.3,
            noise: 0.7,
            seed: 7,
        }
    }
}

/// Fresh pronounceable words that survive tokenization and lemmatization
/// unchanged and are not stop words.
struct Words {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
    stop: StopWords,
}

impl Words {
    fn next(&mut self) -> String {
        const CONS: &[u8] = b"bdfgklmnprtvz";
        const VOWELS: &[u8] = b"aiou";
        loop {
            let syllables = self.rng.gen_range(3..=4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONS[self.rng.gen_range(0..CONS.len())] as char);
                w.push(VOWELS[self.rng.gen_range(0..VOWELS.len())] as char);
            }
            if lemmatize(&w) == w && !self.stop.contains(&w) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

impl ToyTask {
    /// Writes `kg.tsv`, `train.jsonl` and `dev.jsonl` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut kg = Vec::new();
        write_triples_tsv(&self.kg, &mut kg)?;
        let mut train = Vec::new();
        write_dataset(&mut train, &self.train)?;
        let mut dev = Vec::new();
        write_dataset(&mut dev, &self.dev)?;
        for (name, bytes) in [("kg.tsv", kg), ("train.jsonl", train), ("dev.jsonl", dev)] {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn generate(cfg: &ToyTaskConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut words = Words {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed),
            used: BTreeSet::new(),
            stop: StopWords::english(),
        };
        let mut b = KnowledgeGraph::builder();
        for r in TOY_RELATIONS {
            b.relation(r);
        }
        let letters = letters(cfg.candidates);
        let mut examples = Vec::new();
        let mut evidence = Vec::new();
        for n in 0..cfg.train + cfg.dev {
            let topic = words.next();
            let filler = words.next();
            let cands: Vec<String> = (0..cfg.candidates).map(|_| words.next()).collect();
            let label = rng.gen_range(0..cfg.candidates);
            b.concept(&topic).concept(&filler);
            for c in &cands {
                b.concept(c);
            }

            if rng.gen_bool(cfg.two_hop) {
                let bridge = words.next();
                b.triple(&topic, "UsedFor", &bridge, 1.0);
                b.triple(&bridge, "AtLocation", &cands[label], 1.0);
                evidence.push(vec![topic.clone(), bridge, cands[label].clone()]);
            } else {
                let rel = EVIDENCE_RELATIONS[rng.gen_range(0..2)];
                b.triple(&topic, rel, &cands[label], 1.0);
                evidence.push(vec![topic.clone(), cands[label].clone()]);
            }

            for (i, d) in cands.iter().enumerate() {
                if i == label || !rng.gen_bool(cfg.noise) {
                    continue;
                }
                match rng.gen_range(0..4) {
                    0 => {
                        b.triple(&topic, "RelatedTo", d, 1.0);
                    }
                    1 => {
                        let rel = EVIDENCE_RELATIONS[rng.gen_range(0..2)];
                        b.triple(d, rel, &topic, 1.0);
                    }
                    2 => {
                        b.triple(&topic, "IsA", d, 1.0);
                    }
                    _ => {
                        let mid = words.next();
                        b.triple(&topic, "RelatedTo", &mid, 1.0);
                        b.triple(&mid, "AtLocation", d, 1.0);
                    }
                }
            }
            let linked = rng.gen_range(0..cfg.candidates);
            b.triple(&filler, "RelatedTo", &cands[linked], 1.0);
            if rng.gen_bool(0.5) {
                let other = rng.gen_range(0..cfg.candidates);
                b.triple(&cands[other], "PartOf", &filler, 1.0);
            }

            examples.push(QAExample {
                id: format!("toy{n:04}"),
                question: format!("where would you find the {topic} next to the {filler}?"),
                candidates: cands,
                labels: letters.clone(),
                label: Some(label),
            });
        }
        let kg = b.build().expect("non-empty graph");
        let dev = examples.split_off(cfg.train);
        ToyTask {
            kg,
            train: examples,
            dev,
            evidence,
        }
    }

    /// The hand-written rule: pick the first candidate reachable from a
    /// question concept by at most two forward evidence edges.
    pub fn rule_choice(&self, ex: &QAExample) -> Option<usize> {
        let grounded = |text: &str| -> Vec<ConceptId> {
            crate::grounding::tokenize(text)
                .iter()
                .filter_map(|t| self.kg.lookup_surface(t))
                .collect()
        };
        let sources = grounded(&ex.question);
        let evidence: Vec<_> = EVIDENCE_RELATIONS
            .iter()
            .filter_map(|r| self.kg.lookup_relation(r))
            .collect();
        let step = |from: ConceptId| -> Vec<ConceptId> {
            self.kg
                .neighbors(from)
                .map(|ns| {
                    ns.iter()
                        .filter(|n| n.direction == Direction::Forward && evidence.contains(&n.rel))
                        .map(|n| n.concept)
                        .collect()
                })
                .unwrap_or_default()
        };
        (0..ex.candidates.len()).find(|&c| {
            let targets = grounded(&ex.candidates[c]);
            sources.iter().any(|&s| {
                let one = step(s);
                one.iter().any(|x| targets.contains(x))
                    || one.iter().any(|&m| step(m).iter().any(|x| targets.contains(x)))
            })
        })
    }
}

/// A random directed multigraph with `nodes` concepts `n0..`, where each
/// ordered pair of distinct concepts is linked with probability `density`
/// by one of `relations` relation types.
pub fn random_graph<R: Rng>(rng: &mut R, nodes: usize, density: f64, relations: usize) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for r in 0..relations {
        b.relation(&format!("r{r}"));
    }
    for i in 0..nodes {
        b.concept(&format!("n{i}"));
    }
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j && rng.gen_bool(density) {
                let r = rng.gen_range(0..relations);
                b.triple(&format!("n{i}"), &format!("r{r}"), &format!("n{j}"), 1.0);
            }
        }
    }
    b.build().expect("builder never fails on declared concepts")
}

/// A small scoring problem with random embeddings and statement vector.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub kg: KnowledgeGraph,
    pub emb: EmbeddingTable,
    pub input: GraphInput,
    pub statement: Array1<f64>,
}

/// Random instance with at most 6 concepts and at most 4 paths per pair.
/// `path_dim` sizes the fallback vectors of path-less pairs.
pub fn random_instance(seed: u64, concept_dim: usize, statement_dim: usize, path_dim: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nodes = rng.gen_range(3..=6);
        let kg = random_graph(&mut rng, nodes, 0.35, 3);
        let mut ids: Vec<ConceptId> = (0..nodes as u32).map(ConceptId).collect();
        ids.shuffle(&mut rng);
        let nq = rng.gen_range(1..=2.min(nodes - 1));
        let na = rng.gen_range(1..=2.min(nodes - nq));
        let Ok(sg) = build_schema_graph_from(&kg, &ids[..nq], &ids[nq..nq + na], 3, 4) else {
            continue;
        };
        if sg.num_paths() == 0 {
            continue;
        }
        let emb = EmbeddingTable {
            concepts: Array2::from_shape_simple_fn((nodes, concept_dim), || rng.gen_range(-1.0..1.0)),
            relations: Array2::from_shape_simple_fn((3, concept_dim), || rng.gen_range(-1.0..1.0)),
            gamma: DEFAULT_GAMMA,
            norm: Norm::L2,
        };
        let statement = Array1::from_shape_simple_fn(statement_dim, || rng.gen_range(-1.0..1.0));
        let input = GraphInput::from_schema(&sg, &format!("rand{seed}"), seed, path_dim, 0.5);
        return RandomInstance {
            kg,
            emb,
            input,
            statement,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_kg_shape() {
        let kg = translation_kg(1);
        assert_eq!(kg.num_concepts(), 30);
        assert_eq!(kg.num_relations(), 5);
        assert_eq!(kg.num_triples(), 100);
    }

    #[test]
    fn rule_scorer_is_perfect_on_toy_task() {
        let task = ToyTask::generate(&ToyTaskConfig {
            train: 60,
            dev: 20,
            ..ToyTaskConfig::default()
        });
        for ex in task.train.iter().chain(&task.dev) {
            assert_eq!(task.rule_choice(ex), ex.label, "{}", ex.id);
        }
    }

    #[test]
    fn random_instance_bounds() {
        for seed in 0..20 {
            let inst = random_instance(seed, 3, 2, 8);
            assert!(inst.input.concepts.len() <= 6);
            assert!(inst.input.pairs.iter().all(|p| p.paths.len() <= 4));
        }
    }
}
