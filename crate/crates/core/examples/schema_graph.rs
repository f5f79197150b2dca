//! Builds the schema graph between question and answer concepts: every
//! simple path of up to three edges between each pair, in canonical order.
//!
//! ```text
//! cargo run --example schema_graph
//! ```

use kagnet::kg::KnowledgeGraph;
use kagnet::paths::{build_schema_graph_from, Path};

fn render(kg: &KnowledgeGraph, p: &Path) -> kagnet::Result<String> {
    let mut out = kg.surface(p.start)?.to_string();
    for s in &p.steps {
        let rel = kg.relation_name(s.rel)?;
        let arrow = if s.reversed { format!(" <-{rel}- ") } else { format!(" -{rel}-> ") };
        out.push_str(&arrow);
        out.push_str(kg.surface(s.next)?);
    }
    Ok(out)
}

fn main() -> kagnet::Result<()> {
    let mut b = KnowledgeGraph::builder();
    b.triple("glue_stick", "UsedFor", "paper", 1.0)
        .triple("paper", "AtLocation", "office", 1.0)
        .triple("glue_stick", "AtLocation", "desk_drawer", 1.0)
        .triple("desk_drawer", "PartOf", "desk", 1.0)
        .triple("desk", "AtLocation", "office", 1.0)
        .triple("office", "RelatedTo", "work", 1.0)
        .triple("student", "Desires", "paper", 1.0);
    let kg = b.build()?;
    let id = |s: &str| kg.lookup_surface(s).expect("known concept");

    let sg = build_schema_graph_from(&kg, &[id("glue_stick"), id("student")], &[id("office")], 3, 100)?;
    println!("{} nodes, {} edges, {} paths", sg.nodes.len(), sg.edges.len(), sg.num_paths());
    for pair in &sg.pairs {
        println!("{} ~ {}:", kg.surface(sg.cq[pair.q])?, kg.surface(sg.ca[pair.a])?);
        for p in &pair.paths {
            println!("  {}", render(&kg, p)?);
        }
    }
    Ok(())
}
