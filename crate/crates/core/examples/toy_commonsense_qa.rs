//! End-to-end run on the planted-evidence toy task: embed the graph, ground
//! and prune every candidate, train the scorer, and explain one prediction.
//!
//! ```text
//! cargo run --release --example toy_commonsense_qa
//! ```

use kagnet::grounding::Grounder;
use kagnet::kge::{train_transe, TransEConfig};
use kagnet::net::NetConfig;
use kagnet::pipeline::{
    explain, train, GroundingConfig, Preprocessor, Scorer, StatementEncoder, ToyEncoder,
    TrainConfig,
};
use kagnet::synthetic::{ToyTask, ToyTaskConfig};

fn main() -> kagnet::Result<()> {
    let task = ToyTask::generate(&ToyTaskConfig::default());
    println!(
        "graph: {} concepts, {} triples; {} train / {} dev questions",
        task.kg.num_concepts(),
        task.kg.num_triples(),
        task.train.len(),
        task.dev.len()
    );

    let kge = TransEConfig {
        dim: 16,
        epochs: 30,
        ..TransEConfig::default()
    };
    let (emb, _) = train_transe(&task.kg, &kge, None)?;

    let net = NetConfig {
        gcn_dims: vec![16, 16],
        lstm_hidden: 16,
        t_hidden: 32,
        t_dim: 32,
        score_hidden: 32,
        ..NetConfig::default()
    };
    let grounder = Grounder::default();
    let pre = Preprocessor {
        kg: &task.kg,
        emb: &emb,
        grounder: &grounder,
        config: GroundingConfig::default(),
        seed: 1,
        path_dim: net.path_dim(),
        fallback_scale: net.fallback_scale,
        cache_dir: None,
    };
    let train_set = pre.prepare(&task.train)?;
    let dev_set = pre.prepare(&task.dev)?;

    let texts = task
        .train
        .iter()
        .flat_map(|e| std::iter::once(e.question.as_str()).chain(e.candidates.iter().map(String::as_str)));
    let encoder = StatementEncoder::Toy(ToyEncoder::new(texts, 8, 8, 3));
    let mut scorer = Scorer::new(net, encoder, &emb, 11)?;

    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let report = train(&mut scorer, &train_set, &dev_set, &emb, &cfg)?;
    for m in &report.epochs {
        println!(
            "epoch {:2}  loss {:.4}  train acc {:.3}  dev acc {:.3}",
            m.epoch, m.train_loss, m.train_acc, m.dev_acc
        );
    }
    println!("kept epoch {} (dev acc {:.3})", report.best_epoch, report.best_dev_acc);

    let ex = &dev_set[0];
    let label = ex.example.label.unwrap_or(0);
    let r = explain(&scorer, ex, label, &task.kg, &emb, 2, 2)?;
    println!("\n{}  answer {:?}  score {:.3}", r.id, r.answer, r.score);
    for p in &r.pairs {
        println!("  pair {} -> {}  beta {:.3}", p.question_concept, p.answer_concept, p.beta);
        for path in &p.paths {
            println!("    alpha {:.3}  {}", path.alpha, path.rendered);
        }
    }
    Ok(())
}
