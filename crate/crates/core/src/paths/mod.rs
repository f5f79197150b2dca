//! Schema-graph construction by bounded simple-path search.
//!
//! For every (question concept, answer concept) pair we enumerate the simple
//! paths of at most `max_edges` edges, traversing triples in either
//! direction. Edges connecting two question concepts (or two answer
//! concepts) are added to the graph but never become paths.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::MentionSet;
use crate::kg::{ConceptId, Direction, KnowledgeGraph, RelationId};

pub const DEFAULT_MAX_EDGES: usize = 3;
pub const DEFAULT_PATH_CAP: usize = 100;

/// One hop. `reversed` means the underlying triple is `(next, rel, current)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub rel: RelationId,
    pub reversed: bool,
    pub next: ConceptId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    pub start: ConceptId,
    pub steps: Vec<PathStep>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end(&self) -> ConceptId {
        self.steps.last().map_or(self.start, |s| s.next)
    }

    /// Visited concepts, `start` first.
    pub fn concepts(&self) -> Vec<ConceptId> {
        std::iter::once(self.start)
            .chain(self.steps.iter().map(|s| s.next))
            .collect()
    }

    /// The triples this path walks over, as stored in the graph.
    pub fn edges(&self) -> Vec<EdgeRef> {
        let mut from = self.start;
        self.steps
            .iter()
            .map(|s| {
                let e = if s.reversed {
                    EdgeRef::new(s.next, s.rel, from)
                } else {
                    EdgeRef::new(from, s.rel, s.next)
                };
                from = s.next;
                e
            })
            .collect()
    }

    /// The same walk in the opposite direction; every orientation flag flips.
    pub fn reversed(&self) -> Path {
        let nodes = self.concepts();
        let steps = self
            .steps
            .iter()
            .enumerate()
            .rev()
            .map(|(k, s)| PathStep {
                rel: s.rel,
                reversed: !s.reversed,
                next: nodes[k],
            })
            .collect();
        Path {
            start: self.end(),
            steps,
        }
    }

    /// Ordering used for search results: shorter first, then lexicographic
    /// by (concept, relation, orientation) per step.
    pub fn order_key(&self) -> (usize, Vec<(ConceptId, RelationId, bool)>) {
        (
            self.steps.len(),
            self.steps.iter().map(|s| (s.next, s.rel, s.reversed)).collect(),
        )
    }

    /// True if every visited concept is distinct.
    pub fn is_simple(&self) -> bool {
        let nodes = self.concepts();
        let set: BTreeSet<_> = nodes.iter().collect();
        set.len() == nodes.len()
    }
}

/// A stored triple, without its weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub head: ConceptId,
    pub rel: RelationId,
    pub tail: ConceptId,
}

impl EdgeRef {
    pub fn new(head: ConceptId, rel: RelationId, tail: ConceptId) -> Self {
        EdgeRef { head, rel, tail }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSearch {
    pub paths: Vec<Path>,
    /// More paths existed beyond the cap.
    pub truncated: bool,
}

/// All simple paths from `src` to `dst` with at most `max_edges` edges, in
/// [`Path::order_key`] order, truncated to `cap`.
///
/// Depth-limited DFS over the sorted adjacency lists, one depth at a time, so
/// results come out already ordered and the search can stop at the cap. A
/// breadth-first distance map from `dst` prunes branches that cannot reach
/// it in the remaining hops.
pub fn find_paths(
    kg: &KnowledgeGraph,
    src: ConceptId,
    dst: ConceptId,
    max_edges: usize,
    cap: usize,
) -> Result<PathSearch> {
    if !kg.contains(src) {
        return Err(Error::InvalidConcept(src));
    }
    if !kg.contains(dst) {
        return Err(Error::InvalidConcept(dst));
    }
    if src == dst {
        return Err(Error::SameEndpoints(src));
    }
    if max_edges == 0 || cap == 0 {
        return Err(Error::Config("max_edges and cap must be at least 1".into()));
    }

    let dist = distances_to(kg, dst, max_edges - 1)?;
    let mut out = PathSearch::default();
    let mut visited = vec![src];
    let mut steps = Vec::with_capacity(max_edges);
    for length in 1..=max_edges {
        let done = dfs(
            kg, &dist, dst, length, src, &mut visited, &mut steps, cap, &mut out,
        )?;
        if done {
            break;
        }
    }
    Ok(out)
}

/// Hop distance to `target` for every concept within `limit` hops.
fn distances_to(
    kg: &KnowledgeGraph,
    target: ConceptId,
    limit: usize,
) -> Result<HashMap<ConceptId, usize>> {
    let mut dist = HashMap::new();
    dist.insert(target, 0);
    let mut queue = VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == limit {
            continue;
        }
        for n in kg.neighbors(u)? {
            if let Entry::Vacant(e) = dist.entry(n.concept) {
                e.insert(d + 1);
                queue.push_back(n.concept);
            }
        }
    }
    Ok(dist)
}

/// Returns `true` once the cap has been exceeded.
#[allow(clippy::too_many_arguments)]
fn dfs(
    kg: &KnowledgeGraph,
    dist: &HashMap<ConceptId, usize>,
    dst: ConceptId,
    length: usize,
    at: ConceptId,
    visited: &mut Vec<ConceptId>,
    steps: &mut Vec<PathStep>,
    cap: usize,
    out: &mut PathSearch,
) -> Result<bool> {
    let remaining = length - steps.len();
    let candidates = if remaining == 1 {
        kg.edges_between(at, dst)?
    } else {
        kg.neighbors(at)?
    };
    for n in candidates {
        let v = n.concept;
        if visited.contains(&v) {
            continue;
        }
        if remaining > 1 && (v == dst || dist.get(&v).is_none_or(|&d| d > remaining - 1)) {
            continue;
        }
        steps.push(PathStep {
            rel: n.rel,
            reversed: n.direction == Direction::Reverse,
            next: v,
        });
        if remaining == 1 {
            if out.paths.len() == cap {
                out.truncated = true;
                steps.pop();
                return Ok(true);
            }
            out.paths.push(Path {
                start: visited[0],
                steps: steps.clone(),
            });
        } else {
            visited.push(v);
            let done = dfs(kg, dist, dst, length, v, visited, steps, cap, out)?;
            visited.pop();
            if done {
                steps.pop();
                return Ok(true);
            }
        }
        steps.pop();
    }
    Ok(false)
}

/// Paths found for one (question concept, answer concept) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPaths {
    /// Index into [`SchemaGraph::cq`].
    pub q: usize,
    /// Index into [`SchemaGraph::ca`].
    pub a: usize,
    pub paths: Vec<Path>,
    pub truncated: bool,
}

/// The grounded subgraph for one question/answer pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaGraph {
    pub cq: Vec<ConceptId>,
    pub ca: Vec<ConceptId>,
    /// Sorted union of path concepts and both mention sets.
    pub nodes: Vec<ConceptId>,
    /// Sorted union of path edges and intra-set edges.
    pub edges: Vec<EdgeRef>,
    /// Edges between two question concepts or two answer concepts.
    pub intra_edges: Vec<EdgeRef>,
    /// One entry per pair, question-major: index `i * ca.len() + j`.
    pub pairs: Vec<PairPaths>,
}

impl SchemaGraph {
    pub fn pair(&self, i: usize, j: usize) -> &PairPaths {
        &self.pairs[i * self.ca.len() + j]
    }

    pub fn num_paths(&self) -> usize {
        self.pairs.iter().map(|p| p.paths.len()).sum()
    }

    /// Rebuild `nodes` and `edges` from the current paths and intra edges.
    pub fn recompute_cover(&mut self) {
        let mut nodes: BTreeSet<ConceptId> = self.cq.iter().chain(&self.ca).copied().collect();
        let mut edges: BTreeSet<EdgeRef> = self.intra_edges.iter().copied().collect();
        for pair in &self.pairs {
            for path in &pair.paths {
                nodes.extend(path.concepts());
                edges.extend(path.edges());
            }
        }
        self.nodes = nodes.into_iter().collect();
        self.edges = edges.into_iter().collect();
    }
}

/// Build the schema graph from mention sets. Concepts mentioned on both
/// sides stay on the question side.
pub fn build_schema_graph(
    kg: &KnowledgeGraph,
    cq: &MentionSet,
    ca: &MentionSet,
    max_edges: usize,
    cap: usize,
) -> Result<SchemaGraph> {
    build_schema_graph_from(kg, &cq.concepts(), &ca.concepts(), max_edges, cap)
}

pub fn build_schema_graph_from(
    kg: &KnowledgeGraph,
    cq: &[ConceptId],
    ca: &[ConceptId],
    max_edges: usize,
    cap: usize,
) -> Result<SchemaGraph> {
    let cq: Vec<ConceptId> = cq.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let ca: Vec<ConceptId> = ca
        .iter()
        .copied()
        .filter(|c| !cq.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if cq.is_empty() || ca.is_empty() {
        return Err(Error::Ungroundable(format!(
            "{} question concept(s), {} answer concept(s) after overlap removal",
            cq.len(),
            ca.len()
        )));
    }
    for &c in cq.iter().chain(&ca) {
        if !kg.contains(c) {
            return Err(Error::InvalidConcept(c));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..cq.len())
        .flat_map(|i| (0..ca.len()).map(move |j| (i, j)))
        .collect();
    let pairs = jobs
        .par_iter()
        .map(|&(i, j)| {
            let found = find_paths(kg, cq[i], ca[j], max_edges, cap)?;
            Ok(PairPaths {
                q: i,
                a: j,
                paths: found.paths,
                truncated: found.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut intra = BTreeSet::new();
    for set in [&cq, &ca] {
        for (k, &x) in set.iter().enumerate() {
            for &y in &set[k + 1..] {
                for n in kg.edges_between(x, y)? {
                    intra.insert(match n.direction {
                        Direction::Forward => EdgeRef::new(x, n.rel, y),
                        Direction::Reverse => EdgeRef::new(y, n.rel, x),
                    });
                }
            }
        }
    }

    let mut sg = SchemaGraph {
        cq,
        ca,
        nodes: Vec::new(),
        edges: Vec::new(),
        intra_edges: intra.into_iter().collect(),
        pairs,
    };
    sg.recompute_cover();
    Ok(sg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(names: &[&str]) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for w in names.windows(2) {
            b.triple(w[0], "RelatedTo", w[1], 1.0);
        }
        b.concept("z");
        b.build().unwrap()
    }

    fn id(kg: &KnowledgeGraph, s: &str) -> ConceptId {
        kg.lookup_surface(s).unwrap()
    }

    #[test]
    fn chain_of_three_edges() {
        let kg = chain(&["a", "b", "c", "d"]);
        let found = find_paths(&kg, id(&kg, "a"), id(&kg, "d"), 3, 100).unwrap();
        assert_eq!(found.paths.len(), 1);
        let names: Vec<_> = found.paths[0]
            .concepts()
            .into_iter()
            .map(|c| kg.surface(c).unwrap().to_string())
            .collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
        assert!(!found.truncated);
    }

    #[test]
    fn chain_too_long() {
        let kg = chain(&["a", "b", "c", "d", "e"]);
        let found = find_paths(&kg, id(&kg, "a"), id(&kg, "e"), 3, 100).unwrap();
        assert!(found.paths.is_empty());
    }

    #[test]
    fn direct_edge_is_forward() {
        let kg = chain(&["a", "b"]);
        let found = find_paths(&kg, id(&kg, "a"), id(&kg, "b"), 3, 100).unwrap();
        assert_eq!(found.paths.len(), 1);
        assert_eq!(found.paths[0].steps.len(), 1);
        assert!(!found.paths[0].steps[0].reversed);
        let back = find_paths(&kg, id(&kg, "b"), id(&kg, "a"), 3, 100).unwrap();
        assert!(back.paths[0].steps[0].reversed);
    }

    #[test]
    fn errors() {
        let kg = chain(&["a", "b"]);
        let a = id(&kg, "a");
        assert!(matches!(
            find_paths(&kg, a, a, 3, 10),
            Err(Error::SameEndpoints(_))
        ));
        assert!(matches!(
            find_paths(&kg, a, ConceptId(1000), 3, 10),
            Err(Error::InvalidConcept(_))
        ));
    }

    #[test]
    fn cap_truncates_shortest_first() {
        // a-b directly plus three two-hop detours through x, y, w.
        let mut b = KnowledgeGraph::builder();
        b.triple("a", "RelatedTo", "b", 1.0);
        for mid in ["x", "y", "w"] {
            b.triple("a", "RelatedTo", mid, 1.0).triple(mid, "RelatedTo", "b", 1.0);
        }
        let kg = b.build().unwrap();
        let found = find_paths(&kg, id(&kg, "a"), id(&kg, "b"), 2, 2).unwrap();
        assert!(found.truncated);
        assert_eq!(found.paths.len(), 2);
        assert_eq!(found.paths[0].len(), 1);
        // "w" sorts before "x" and "y"
        assert_eq!(found.paths[1].steps[0].next, id(&kg, "w"));
        let exact = find_paths(&kg, id(&kg, "a"), id(&kg, "b"), 2, 4).unwrap();
        assert!(!exact.truncated);
        assert_eq!(exact.paths.len(), 4);
    }

    #[test]
    fn schema_graph_on_chain() {
        let kg = chain(&["a", "b", "c", "d"]);
        let sg = build_schema_graph_from(&kg, &[id(&kg, "a")], &[id(&kg, "d")], 3, 100).unwrap();
        assert_eq!(sg.nodes.len(), 4);
        assert_eq!(sg.edges.len(), 3);
        assert_eq!(sg.pair(0, 0).paths.len(), 1);
        assert_eq!(sg.pair(0, 0).paths[0].len(), 3);
    }

    #[test]
    fn disconnected_answer_has_no_paths() {
        let kg = chain(&["a", "b", "c", "d"]);
        let sg = build_schema_graph_from(&kg, &[id(&kg, "a")], &[id(&kg, "z")], 3, 100).unwrap();
        assert!(sg.pair(0, 0).paths.is_empty());
        assert_eq!(sg.nodes.len(), 2);
        assert!(sg.edges.is_empty());
    }

    #[test]
    fn intra_question_edges_are_added() {
        let mut b = KnowledgeGraph::builder();
        b.triple("a", "RelatedTo", "b", 1.0)
            .triple("b", "RelatedTo", "c", 1.0)
            .triple("c", "RelatedTo", "d", 1.0)
            .triple("a", "IsA", "b", 1.0);
        let kg = b.build().unwrap();
        let sg = build_schema_graph_from(
            &kg,
            &[id(&kg, "a"), id(&kg, "b")],
            &[id(&kg, "d")],
            3,
            100,
        )
        .unwrap();
        let is_a = kg.lookup_relation("IsA").unwrap();
        let e = EdgeRef::new(id(&kg, "a"), is_a, id(&kg, "b"));
        assert!(sg.intra_edges.contains(&e));
        assert!(sg.edges.contains(&e));
    }

    #[test]
    fn overlap_goes_to_question_side() {
        let kg = chain(&["a", "b", "c"]);
        let (a, c) = (id(&kg, "a"), id(&kg, "c"));
        let sg = build_schema_graph_from(&kg, &[a], &[a, c], 3, 100).unwrap();
        assert_eq!(sg.cq, vec![a]);
        assert_eq!(sg.ca, vec![c]);
        assert!(matches!(
            build_schema_graph_from(&kg, &[a], &[a], 3, 100),
            Err(Error::Ungroundable(_))
        ));
    }

    #[test]
    fn reversing_twice_is_identity() {
        let kg = chain(&["a", "b", "c", "d"]);
        let p = &find_paths(&kg, id(&kg, "a"), id(&kg, "d"), 3, 100).unwrap().paths[0];
        assert_eq!(&p.reversed().reversed(), p);
        assert_eq!(p.reversed().start, id(&kg, "d"));
    }
}
