//! Trains TransE on a graph with planted translations, then uses triple
//! confidences to score and prune schema-graph paths.
//!
//! ```text
//! cargo run --release --example transe_pruning
//! ```

use kagnet::kg::ConceptId;
use kagnet::kge::{filtered_tail_mrr, prune, train_transe, TransEConfig};
use kagnet::paths::build_schema_graph_from;
use kagnet::synthetic::translation_kg;

fn main() -> kagnet::Result<()> {
    let kg = translation_kg(7);
    let cfg = TransEConfig {
        dim: 32,
        epochs: 200,
        ..TransEConfig::default()
    };
    let (emb, report) = train_transe(&kg, &cfg, None)?;
    let losses = &report.epoch_losses;
    println!(
        "{} triples; hinge loss {:.3} -> {:.3}; filtered tail MRR {:.3}",
        kg.num_triples(),
        losses[0],
        losses[losses.len() - 1],
        filtered_tail_mrr(&emb, &kg, kg.triples())
    );

    let sg = build_schema_graph_from(&kg, &[ConceptId(0), ConceptId(1)], &[ConceptId(2), ConceptId(3)], 3, 50)?;
    for threshold in [0.0, 0.15, 0.5, 0.9] {
        let (pruned, r) = prune(&sg, &emb, threshold);
        println!(
            "threshold {threshold:.2}: {} -> {} paths ({:.1}% kept), {} pair(s) floored to their best path",
            r.paths_before,
            pruned.num_paths(),
            100.0 * r.kept_fraction(),
            r.floored_pairs.len()
        );
    }
    Ok(())
}
