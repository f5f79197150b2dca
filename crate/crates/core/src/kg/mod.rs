//! In-memory knowledge graph: concept and relation vocabularies, a
//! deduplicated triple list and a bidirectional adjacency index.
//!
//! A [`KnowledgeGraph`] is immutable once built. Use [`GraphBuilder`] to
//! assemble one programmatically or [`ingest`](ingest::ingest) to read a
//! ConceptNet dump.

mod ingest;
mod merge;
mod snapshot;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{ingest, ingest_reader, IngestIssue, IngestReport, IngestedGraph};
pub use merge::{MergeMap, MergeTarget};
pub use snapshot::{read_snapshot, write_snapshot, KG_SNAPSHOT_MAGIC, KG_SNAPSHOT_VERSION};

/// Dense index into the concept vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u32);

/// Dense index into the merged relation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub head: ConceptId,
    pub rel: RelationId,
    pub tail: ConceptId,
    pub weight: f64,
}

/// Orientation of an adjacency entry relative to the stored triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The concept is the head; the neighbor is the tail.
    Forward,
    /// The concept is the tail; the neighbor is the head.
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Neighbor {
    pub concept: ConceptId,
    pub rel: RelationId,
    pub direction: Direction,
}

/// Lowercase, trim and join whitespace-separated tokens with underscores.
pub fn normalize_surface(raw: &str) -> String {
    raw.split_whitespace()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

/// True if `surface` is already in normalized form.
pub fn is_normalized(surface: &str) -> bool {
    !surface.is_empty() && normalize_surface(&surface.replace('_', " ")) == surface
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    concepts: Vec<String>,
    concept_index: HashMap<String, ConceptId>,
    relations: Vec<String>,
    triples: Vec<Triple>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl KnowledgeGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    /// Exact lookup of a normalized surface form. Unnormalized input never
    /// matches since the vocabulary only holds normalized strings.
    pub fn lookup_surface(&self, surface: &str) -> Option<ConceptId> {
        self.concept_index.get(surface).copied()
    }

    pub fn lookup_relation(&self, name: &str) -> Option<RelationId> {
        self.relations
            .iter()
            .position(|r| r == name)
            .map(|i| RelationId(i as u32))
    }

    pub fn surface(&self, c: ConceptId) -> Result<&str> {
        self.concepts
            .get(c.index())
            .map(String::as_str)
            .ok_or(Error::InvalidConcept(c))
    }

    pub fn relation_name(&self, r: RelationId) -> Result<&str> {
        self.relations
            .get(r.index())
            .map(String::as_str)
            .ok_or(Error::InvalidRelation(r.0))
    }

    pub fn contains(&self, c: ConceptId) -> bool {
        c.index() < self.concepts.len()
    }

    /// All adjacency entries of `c`, sorted by neighbor id, relation id and
    /// direction.
    pub fn neighbors(&self, c: ConceptId) -> Result<&[Neighbor]> {
        self.adjacency
            .get(c.index())
            .map(Vec::as_slice)
            .ok_or(Error::InvalidConcept(c))
    }

    /// Adjacency entries of `from` whose neighbor is `to`.
    pub fn edges_between(&self, from: ConceptId, to: ConceptId) -> Result<&[Neighbor]> {
        let adj = self.neighbors(from)?;
        let lo = adj.partition_point(|n| n.concept < to);
        let hi = adj.partition_point(|n| n.concept <= to);
        Ok(&adj[lo..hi])
    }

    /// True if the stored triple list contains `(head, rel, tail)`.
    pub fn has_triple(&self, head: ConceptId, rel: RelationId, tail: ConceptId) -> bool {
        self.triples
            .binary_search_by(|t| (t.head, t.rel, t.tail).cmp(&(head, rel, tail)))
            .is_ok()
    }

    /// SHA-256 over the concept and relation vocabularies; used to tie
    /// embedding snapshots to the graph they were trained on.
    pub fn vocab_hash(&self) -> String {
        let mut bytes = Vec::new();
        for c in &self.concepts {
            bytes.extend_from_slice(c.as_bytes());
            bytes.push(b'\n');
        }
        bytes.push(0);
        for r in &self.relations {
            bytes.extend_from_slice(r.as_bytes());
            bytes.push(b'\n');
        }
        crate::util::sha256_hex(&bytes)
    }
}

/// Accumulates concepts, relations and triples, then freezes them into a
/// [`KnowledgeGraph`]. Concept ids follow sorted surface order and relation
/// ids follow insertion order, so the result does not depend on the order in
/// which triples were added.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    concepts: BTreeMap<String, ()>,
    relations: Vec<String>,
    edges: BTreeMap<(String, usize, String), f64>,
}

impl GraphBuilder {
    /// Registers a relation name, returning its position in the vocabulary.
    pub fn relation(&mut self, name: &str) -> usize {
        if let Some(i) = self.relations.iter().position(|r| r == name) {
            i
        } else {
            self.relations.push(name.to_string());
            self.relations.len() - 1
        }
    }

    pub fn concept(&mut self, surface: &str) -> &mut Self {
        self.concepts.insert(normalize_surface(surface), ());
        self
    }

    /// Adds a triple; duplicates keep the maximum weight.
    pub fn triple(&mut self, head: &str, rel: &str, tail: &str, weight: f64) -> &mut Self {
        let head = normalize_surface(head);
        let tail = normalize_surface(tail);
        let r = self.relation(rel);
        self.concepts.insert(head.clone(), ());
        self.concepts.insert(tail.clone(), ());
        let slot = self.edges.entry((head, r, tail)).or_insert(weight);
        if weight > *slot {
            *slot = weight;
        }
        self
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn build(&self) -> Result<KnowledgeGraph> {
        if self.concepts.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let concepts: Vec<String> = self.concepts.keys().cloned().collect();
        let concept_index: HashMap<String, ConceptId> = concepts
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), ConceptId(i as u32)))
            .collect();
        let mut triples: Vec<Triple> = self
            .edges
            .iter()
            .map(|((h, r, t), &w)| Triple {
                head: concept_index[h],
                rel: RelationId(*r as u32),
                tail: concept_index[t],
                weight: w,
            })
            .collect();
        triples.sort_by_key(|a| (a.head, a.rel, a.tail));
        Ok(KnowledgeGraph::from_parts(
            concepts,
            self.relations.clone(),
            triples,
        ))
    }
}

impl KnowledgeGraph {
    /// Assembles a graph from already-indexed parts. `triples` must be
    /// sorted and unique.
    pub(crate) fn from_parts(
        concepts: Vec<String>,
        relations: Vec<String>,
        triples: Vec<Triple>,
    ) -> Self {
        let concept_index = concepts
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), ConceptId(i as u32)))
            .collect();
        let mut adjacency = vec![Vec::new(); concepts.len()];
        for t in &triples {
            adjacency[t.head.index()].push(Neighbor {
                concept: t.tail,
                rel: t.rel,
                direction: Direction::Forward,
            });
            adjacency[t.tail.index()].push(Neighbor {
                concept: t.head,
                rel: t.rel,
                direction: Direction::Reverse,
            });
        }
        for list in &mut adjacency {
            list.sort();
        }
        KnowledgeGraph {
            concepts,
            concept_index,
            relations,
            triples,
            adjacency,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ice_graph() -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        b.triple("ice", "HasProperty", "cold", 1.0).concept("lonely");
        b.build().unwrap()
    }

    #[test]
    fn lookup_exact_surface() {
        let kg = ice_graph();
        let ice = kg.lookup_surface("ice").unwrap();
        assert_eq!(kg.surface(ice).unwrap(), "ice");
        assert_eq!(kg.lookup_surface("Ice"), None);
        assert!(!is_normalized("Ice"));
        assert_eq!(kg.lookup_surface("unicorn_horn"), None);
    }

    #[test]
    fn neighbors_carry_direction() {
        let kg = ice_graph();
        let ice = kg.lookup_surface("ice").unwrap();
        let cold = kg.lookup_surface("cold").unwrap();
        let has_prop = kg.lookup_relation("HasProperty").unwrap();
        assert_eq!(
            kg.neighbors(ice).unwrap(),
            &[Neighbor {
                concept: cold,
                rel: has_prop,
                direction: Direction::Forward
            }]
        );
        assert_eq!(
            kg.neighbors(cold).unwrap(),
            &[Neighbor {
                concept: ice,
                rel: has_prop,
                direction: Direction::Reverse
            }]
        );
        let lonely = kg.lookup_surface("lonely").unwrap();
        assert!(kg.neighbors(lonely).unwrap().is_empty());
    }

    #[test]
    fn invalid_id_is_an_error() {
        let kg = ice_graph();
        assert!(matches!(
            kg.neighbors(ConceptId(99)),
            Err(Error::InvalidConcept(ConceptId(99)))
        ));
    }

    #[test]
    fn builder_keeps_max_weight_on_duplicates() {
        let mut b = KnowledgeGraph::builder();
        b.triple("a", "IsA", "b", 0.5)
            .triple("a", "IsA", "b", 2.0)
            .triple("a", "IsA", "c", 1.0);
        let kg = b.build().unwrap();
        assert_eq!(kg.num_triples(), 2);
        assert_eq!(kg.triples()[0].weight, 2.0);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_surface("Glue  Stick"), "glue_stick");
        assert!(is_normalized("glue_stick"));
        assert!(!is_normalized("Glue_stick"));
        assert!(!is_normalized(""));
    }
}
