//! Randomized invariants of the individual stages.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kagnet::grounding::{lemmatize, recognize, StopWords};
use kagnet::kg::{ingest_reader, ConceptId, Direction, KnowledgeGraph, MergeMap};
use kagnet::net::{hpa_forward, AttentionSwitches};
use kagnet::paths::find_paths;
use kagnet::pipeline::FeatureStore;
use kagnet::synthetic::random_graph;
use kagnet::util::softmax;

const WORDS: &[&str] = &[
    "the", "a", "glue", "stick", "office", "desk", "drawer", "sitting", "cats", "run", "running",
    "of", "in", "paper", "school", "bus", "stop",
];

fn vocab() -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for s in ["glue", "glue_stick", "office", "desk", "desk_drawer", "sit", "cat", "run", "paper", "school_bus", "bus_stop", "stop", "the_office"] {
        b.concept(s);
    }
    b.build().unwrap()
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..12).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn grounding_is_sound(text in sentence()) {
        let kg = vocab();
        let m = recognize(&text, &kg, 4, &StopWords::english());
        for (c, spans) in &m.mentions {
            let surface = kg.surface(*c).unwrap();
            prop_assert!(!spans.is_empty());
            for s in spans {
                let window = &m.tokens[s.start..s.end];
                let raw = window.join("_");
                let lemma: Vec<String> = window.iter().map(|t| lemmatize(t)).collect();
                prop_assert!(raw == surface || lemma.join("_") == surface, "{surface} vs {raw}");
            }
        }
    }

    #[test]
    fn more_stopwords_never_add_concepts(text in sentence(), extra in prop::collection::vec(prop::sample::select(WORDS), 0..6)) {
        let kg = vocab();
        let base = StopWords::english();
        let mut words: Vec<String> = WORDS.iter().filter(|w| base.contains(w)).map(|w| w.to_string()).collect();
        let small = StopWords::from_words(words.clone());
        words.extend(extra.iter().map(|w| w.to_string()));
        let large = StopWords::from_words(words);
        let a: BTreeSet<ConceptId> = recognize(&text, &kg, 4, &small).concepts().into_iter().collect();
        let b: BTreeSet<ConceptId> = recognize(&text, &kg, 4, &large).concepts().into_iter().collect();
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn grounding_is_deterministic(text in sentence()) {
        let kg = vocab();
        prop_assert_eq!(
            recognize(&text, &kg, 4, &StopWords::english()),
            recognize(&text, &kg, 4, &StopWords::english())
        );
    }

    #[test]
    fn paths_are_symmetric_and_simple(seed in 0u64..10_000, nodes in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_graph(&mut rng, nodes, 0.3, 2);
        let (a, b) = (ConceptId(0), ConceptId(nodes as u32 - 1));
        let fwd = find_paths(&kg, a, b, 3, usize::MAX).unwrap().paths;
        let back = find_paths(&kg, b, a, 3, usize::MAX).unwrap().paths;
        prop_assert_eq!(fwd.len(), back.len());
        let back: BTreeSet<_> = back.into_iter().collect();
        for p in &fwd {
            prop_assert!(p.is_simple());
            prop_assert!(p.len() <= 3);
            prop_assert_eq!(p.start, a);
            prop_assert_eq!(p.end(), b);
            prop_assert!(back.contains(&p.reversed()));
            for e in p.edges() {
                prop_assert!(kg.has_triple(e.head, e.rel, e.tail));
            }
        }
        let mut sorted = fwd.clone();
        sorted.sort_by_key(|p| p.order_key());
        prop_assert_eq!(sorted, fwd);
    }

    #[test]
    fn cap_gives_ordered_prefix(seed in 0u64..10_000, cap in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_graph(&mut rng, 8, 0.4, 2);
        let all = find_paths(&kg, ConceptId(0), ConceptId(7), 3, usize::MAX).unwrap().paths;
        let capped = find_paths(&kg, ConceptId(0), ConceptId(7), 3, cap).unwrap();
        let n = cap.min(all.len());
        prop_assert_eq!(&capped.paths[..], &all[..n]);
        prop_assert_eq!(capped.truncated, all.len() > cap);
    }

    #[test]
    fn adjacency_mirrors_triples(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_graph(&mut rng, 7, 0.35, 3);
        let mut expected = 0;
        for t in kg.triples() {
            let out = kg.neighbors(t.head).unwrap();
            prop_assert!(out.iter().any(|n| n.concept == t.tail && n.rel == t.rel && n.direction == Direction::Forward));
            let inc = kg.neighbors(t.tail).unwrap();
            prop_assert!(inc.iter().any(|n| n.concept == t.head && n.rel == t.rel && n.direction == Direction::Reverse));
            expected += 2;
        }
        let total: usize = (0..kg.num_concepts() as u32).map(|c| kg.neighbors(ConceptId(c)).unwrap().len()).sum();
        prop_assert_eq!(total, expected);
    }

    #[test]
    fn ingest_keeps_max_weight(weights in prop::collection::vec(0.0f64..10.0, 1..6)) {
        let text: String = weights.iter().map(|w| format!("IsA\tcat\tanimal\t{w}\n")).collect();
        let g = ingest_reader(text.as_bytes(), &MergeMap::conceptnet_default(), "en").unwrap().graph;
        prop_assert_eq!(g.num_triples(), 1);
        let max = weights.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(g.triples()[0].weight, max);
    }

    #[test]
    fn snapshot_round_trip(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_graph(&mut rng, 6, 0.4, 3);
        let mut bytes = Vec::new();
        kg.write_to(&mut bytes).unwrap();
        let back = KnowledgeGraph::read_from(&mut bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
        prop_assert_eq!(back.vocab_hash(), kg.vocab_hash());
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-1e3f64..1e3, 1..10)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|x| x + 17.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hpa_weights_sum_to_one(seed in 0u64..10_000, pairs in 1usize..5, paths in 0usize..4) {
        use ndarray::Array1;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = |n: usize| Array1::from_shape_simple_fn(n, || rng.gen_range(-3.0..3.0));
        let s = v(3);
        let t: Vec<_> = (0..pairs).map(|_| v(4)).collect();
        let pv: Vec<Vec<_>> = (0..pairs).map(|p| (0..(paths + p) % 4).map(|_| v(5)).collect()).collect();
        let fb: Vec<_> = (0..pairs).map(|_| Some(v(5))).collect();
        let w1 = ndarray::Array2::from_shape_simple_fn((4, 5), || 0.5);
        let w2 = ndarray::Array2::from_shape_simple_fn((3, 4), || -0.25);
        let out = hpa_forward(&s, &t, &pv, &fb, &w1, &w2, AttentionSwitches { path: true, pair: true }).unwrap();
        prop_assert!((out.beta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (p, a) in out.alpha.iter().enumerate() {
            if pv[p].is_empty() {
                prop_assert!(a.is_empty());
            } else {
                prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn feature_store_round_trip(rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 1..8)) {
        let mut store = FeatureStore::new(3);
        for (i, r) in rows.iter().enumerate() {
            let v: ndarray::Array1<f64> = r.iter().map(|&x| x as f64).collect();
            store.insert(&format!("q{}", i / 2), i % 2, v).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("f.bin");
        store.save_binary(&bin).unwrap();
        prop_assert_eq!(FeatureStore::load(&bin).unwrap(), store.clone());
        let jsonl = dir.path().join("f.jsonl");
        let mut w = Vec::new();
        store.write_jsonl(&mut w).unwrap();
        std::fs::write(&jsonl, w).unwrap();
        prop_assert_eq!(FeatureStore::load(&jsonl).unwrap(), store);
    }
}

#[test]
fn lemmatizer_examples() {
    assert_eq!(lemmatize("glue"), "glue");
    assert_eq!(lemmatize("sitting"), "sit");
    assert_eq!(lemmatize("cats"), "cat");
}

#[test]
fn multiword_concept_grounded_through_lemmas() {
    let kg = vocab();
    let m = recognize("He was sitting on the school bus", &kg, 4, &StopWords::english());
    let found: Vec<&str> = m.surfaces(&kg);
    assert!(found.contains(&"sit"));
    assert!(found.contains(&"school_bus"));
}
