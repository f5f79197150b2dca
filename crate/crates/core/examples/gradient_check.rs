//! Compares the hand-written backward pass of the full scorer with central
//! finite differences on a few random instances.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use kagnet::net::{KagNet, ModelShape};
use kagnet::selfcheck::{gradient_check, tiny_net_config};
use kagnet::synthetic::random_instance;

fn main() -> kagnet::Result<()> {
    let cfg = tiny_net_config();
    for seed in 0..5u64 {
        let inst = random_instance(seed, 3, 3, cfg.path_dim());
        let shape = ModelShape::from_embeddings(&inst.emb, inst.statement.len());
        let net = KagNet::new(cfg.clone(), shape, &inst.emb, seed)?;
        let label = (seed % 2) as f64;
        let r = gradient_check(&net, &inst, label, 1e-5, 1e-6)?;
        println!(
            "instance {seed}: {} entries, {} pairs, max rel err {:.2e}  worst {}",
            r.checked,
            inst.input.pairs.len(),
            r.max_rel_err,
            r.worst
        );
    }
    Ok(())
}
