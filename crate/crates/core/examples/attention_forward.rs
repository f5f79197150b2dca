//! Hierarchical path attention on hand-made vectors: path weights within
//! each concept pair, then pair weights, then the pooled graph vector.
//!
//! ```text
//! cargo run --example attention_forward
//! ```

use kagnet::net::{hpa_forward, AttentionSwitches};
use ndarray::{array, Array2};

fn main() -> kagnet::Result<()> {
    let s = array![1.0, 0.0];
    let t = vec![array![1.0, 0.5], array![-0.5, 1.0]];
    let paths = vec![
        vec![array![1.0, 0.0, 0.0], array![0.0, 1.0, 0.0], array![0.0, 0.0, 1.0]],
        vec![],
    ];
    // The second pair has no path and falls back to a fixed vector.
    let fallbacks = vec![None, Some(array![0.1, -0.1, 0.2])];
    let w1 = Array2::from_shape_vec((2, 3), vec![2.0, 0.0, -1.0, 0.0, 1.0, 0.0]).unwrap();
    let w2 = Array2::eye(2);

    for (name, switches) in [
        ("both levels", AttentionSwitches { path: true, pair: true }),
        ("mean pooling", AttentionSwitches { path: false, pair: false }),
    ] {
        let out = hpa_forward(&s, &t, &paths, &fallbacks, &w1, &w2, switches)?;
        println!("{name}:");
        for (p, a) in out.alpha.iter().enumerate() {
            println!("  pair {p}: beta {:.3}, alpha {:?}", out.beta[p], a.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>());
        }
        println!("  pooled {:.3}", out.g_hat);
    }
    Ok(())
}
