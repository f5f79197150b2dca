//! Writes the planted-evidence toy task as files the `kagnet` binary reads:
//! a simplified triple file and CommonsenseQA-style JSONL splits.
//!
//! ```text
//! cargo run --example toy_dataset -- /tmp/toy
//! kagnet ingest --kg /tmp/toy/kg.tsv --out /tmp/toy/run
//! ```

use std::path::PathBuf;

use kagnet::synthetic::{ToyTask, ToyTaskConfig};

fn main() -> kagnet::Result<()> {
    let dir: PathBuf = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| "toy".into());
    let task = ToyTask::generate(&ToyTaskConfig::default());
    task.write_files(&dir)?;
    println!(
        "wrote {} triples, {} train and {} dev questions to {}",
        task.kg.num_triples(),
        task.train.len(),
        task.dev.len(),
        dir.display()
    );
    let q = &task.train[0];
    println!("\n{}: {}", q.id, q.question);
    for (l, c) in q.labels.iter().zip(&q.candidates) {
        println!("  {l}. {c}");
    }
    println!("evidence: {}", task.evidence[0].join(" -> "));
    Ok(())
}
