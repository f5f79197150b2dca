//! Matches n-grams of a question and its answers against the graph
//! vocabulary, on raw tokens and on lemmas.
//!
//! ```text
//! cargo run --example ground_concepts
//! ```

use kagnet::grounding::Grounder;
use kagnet::kg::KnowledgeGraph;

fn main() -> kagnet::Result<()> {
    let mut b = KnowledgeGraph::builder();
    for s in ["glue_stick", "glue", "stick", "office", "desk", "desk_drawer", "sit", "school_bus", "bus"] {
        b.concept(s);
    }
    let kg = b.build()?;
    let grounder = Grounder::default();

    let texts = [
        "Where would you keep glue sticks while sitting at a desk?",
        "desk drawer",
        "on the school bus",
    ];
    for text in texts {
        let m = grounder.recognize(text, &kg);
        println!("{text}");
        println!("  tokens: {:?}", m.tokens);
        for (c, spans) in &m.mentions {
            let at: Vec<String> = spans.iter().map(|s| format!("{}..{}", s.start, s.end)).collect();
            println!("  {:<12} at {}", kg.surface(*c)?, at.join(", "));
        }
    }
    Ok(())
}
