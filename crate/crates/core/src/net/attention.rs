//! Hierarchical path-based attention.
//!
//! Path level, per concept pair `p`:
//!   `α_pk = T_p · W1 · path_pk`, `α̂_p = softmax(α_p)`, `R̂_p = Σ_k α̂_pk path_pk`
//! Pair level:
//!   `β_p = s · W2 · T_p`, `β̂ = softmax(β)`, `ĝ = Σ_p β̂_p [R̂_p ; T_p]`
//!
//! With path attention off, `α̂` is uniform (the plain mean of path
//! vectors); with pair attention off, `β̂` is uniform. A pair without paths
//! uses its fallback vector as `R̂` and an empty `α̂`.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::layers::add_outer;
use crate::error::{Error, Result};
use crate::util::{softmax, softmax_backward};

/// Arithmetic mean of a pair's path vectors; `None` when there are none.
pub fn relation_mean(path_vecs: &[Array1<f64>]) -> Option<Array1<f64>> {
    let first = path_vecs.first()?;
    let mut sum = Array1::zeros(first.len());
    for v in path_vecs {
        sum += v;
    }
    Some(sum / path_vecs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionSwitches {
    pub path: bool,
    pub pair: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpaOutput {
    pub alpha: Vec<Vec<f64>>,
    pub r_hat: Vec<Array1<f64>>,
    pub beta: Vec<f64>,
    pub g_hat: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpaGrads {
    pub d_paths: Vec<Vec<Array1<f64>>>,
    pub d_t: Vec<Array1<f64>>,
    pub d_s: Array1<f64>,
    pub d_w1: Array2<f64>,
    pub d_w2: Array2<f64>,
}

/// Forward pass over all pairs. `t`, `path_vecs` and `fallbacks` are indexed
/// by pair.
pub fn hpa_forward(
    s: &Array1<f64>,
    t: &[Array1<f64>],
    path_vecs: &[Vec<Array1<f64>>],
    fallbacks: &[Option<Array1<f64>>],
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    switches: AttentionSwitches,
) -> Result<HpaOutput> {
    if t.is_empty() {
        return Err(Error::Ungroundable("no concept pairs".into()));
    }
    let mut alpha = Vec::with_capacity(t.len());
    let mut r_hat = Vec::with_capacity(t.len());
    for (p, paths) in path_vecs.iter().enumerate() {
        if paths.is_empty() {
            let fb = fallbacks[p].clone().ok_or_else(|| {
                Error::Config(format!("pair {p} has no paths and no fallback vector"))
            })?;
            alpha.push(Vec::new());
            r_hat.push(fb);
            continue;
        }
        let a = if switches.path {
            let tw = w1.t().dot(&t[p]);
            let logits: Vec<f64> = paths.iter().map(|v| tw.dot(v)).collect();
            softmax(&logits)
        } else {
            vec![1.0 / paths.len() as f64; paths.len()]
        };
        let mut r = Array1::zeros(paths[0].len());
        for (w, v) in a.iter().zip(paths) {
            r.scaled_add(*w, v);
        }
        alpha.push(a);
        r_hat.push(r);
    }
    let beta = if switches.pair {
        let sw = w2.t().dot(s);
        let logits: Vec<f64> = t.iter().map(|tp| sw.dot(tp)).collect();
        softmax(&logits)
    } else {
        vec![1.0 / t.len() as f64; t.len()]
    };
    let width = r_hat[0].len() + t[0].len();
    let mut g_hat = Array1::zeros(width);
    for p in 0..t.len() {
        let joined = concatenate(Axis(0), &[r_hat[p].view(), t[p].view()])
            .map_err(|_| Error::Dimension {
                context: "attention pair vectors",
                expected: width,
                actual: r_hat[p].len() + t[p].len(),
            })?;
        if joined.len() != width {
            return Err(Error::Dimension {
                context: "attention pair vectors",
                expected: width,
                actual: joined.len(),
            });
        }
        g_hat.scaled_add(beta[p], &joined);
    }
    Ok(HpaOutput {
        alpha,
        r_hat,
        beta,
        g_hat,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn hpa_backward(
    s: &Array1<f64>,
    t: &[Array1<f64>],
    path_vecs: &[Vec<Array1<f64>>],
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    switches: AttentionSwitches,
    out: &HpaOutput,
    d_g: &Array1<f64>,
) -> HpaGrads {
    let n_pairs = t.len();
    let rd = out.r_hat[0].len();
    let d_r = d_g.slice(s![..rd]);
    let d_tg = d_g.slice(s![rd..]);

    let mut d_t: Vec<Array1<f64>> = Vec::with_capacity(n_pairs);
    let mut d_beta = Vec::with_capacity(n_pairs);
    for p in 0..n_pairs {
        d_t.push(d_tg.to_owned() * out.beta[p]);
        d_beta.push(d_r.dot(&out.r_hat[p]) + d_tg.dot(&t[p]));
    }

    let mut d_s = Array1::zeros(s.len());
    let mut d_w2 = Array2::zeros(w2.raw_dim());
    if switches.pair {
        let d_logits = softmax_backward(&out.beta, &d_beta);
        let w2t_s = w2.t().dot(s);
        for p in 0..n_pairs {
            let g = d_logits[p];
            add_outer(&mut d_w2, &(s * g), &t[p]);
            d_s.scaled_add(g, &w2.dot(&t[p]));
            d_t[p].scaled_add(g, &w2t_s);
        }
    }

    let mut d_w1 = Array2::zeros(w1.raw_dim());
    let mut d_paths = Vec::with_capacity(n_pairs);
    for p in 0..n_pairs {
        let paths = &path_vecs[p];
        if paths.is_empty() {
            d_paths.push(Vec::new());
            continue;
        }
        let d_rhat = d_r.to_owned() * out.beta[p];
        let alpha = &out.alpha[p];
        let mut dp: Vec<Array1<f64>> = alpha.iter().map(|&a| &d_rhat * a).collect();
        if switches.path {
            let d_alpha_hat: Vec<f64> = paths.iter().map(|v| d_rhat.dot(v)).collect();
            let d_logits = softmax_backward(alpha, &d_alpha_hat);
            let w1t_t = w1.t().dot(&t[p]);
            let mut w1_paths_sum = Array1::zeros(w1.nrows());
            for (k, v) in paths.iter().enumerate() {
                let g = d_logits[k];
                add_outer(&mut d_w1, &(&t[p] * g), v);
                w1_paths_sum.scaled_add(g, &w1.dot(v));
                dp[k].scaled_add(g, &w1t_t);
            }
            d_t[p] += &w1_paths_sum;
        }
        d_paths.push(dp);
    }

    HpaGrads {
        d_paths,
        d_t,
        d_s,
        d_w1,
        d_w2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const ON: AttentionSwitches = AttentionSwitches { path: true, pair: true };

    #[test]
    fn mean_examples() {
        let v = array![0.3, -1.0];
        assert_eq!(relation_mean(std::slice::from_ref(&v)), Some(v.clone()));
        assert_eq!(relation_mean(&[v.clone(), v.clone()]), Some(v));
        assert_eq!(
            relation_mean(&[array![1.0, 0.0], array![0.0, 1.0]]),
            Some(array![0.5, 0.5])
        );
        assert_eq!(relation_mean(&[]), None);
    }

    #[test]
    fn zero_w1_gives_uniform_alpha_and_mean() {
        let s = array![1.0, 2.0];
        let t = vec![array![0.5, -0.5, 1.0]];
        let paths = vec![vec![array![1.0, 2.0], array![3.0, -1.0], array![0.0, 0.5]]];
        let w1 = Array2::zeros((3, 2));
        let w2 = Array2::from_elem((2, 3), 0.3);
        let out = hpa_forward(&s, &t, &paths, &[None], &w1, &w2, ON).unwrap();
        for a in &out.alpha[0] {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        let mean = relation_mean(&paths[0]).unwrap();
        assert!((&out.r_hat[0] - &mean).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn missing_fallback_is_an_error() {
        let s = array![1.0];
        let out = hpa_forward(
            &s,
            &[array![1.0]],
            &[vec![]],
            &[None],
            &Array2::zeros((1, 2)),
            &Array2::zeros((1, 1)),
            ON,
        );
        assert!(out.is_err());
    }

    #[test]
    fn single_path_gets_full_weight() {
        let s = array![1.0];
        let out = hpa_forward(
            &s,
            &[array![1.0], array![2.0]],
            &[vec![array![4.0, 5.0]], vec![]],
            &[None, Some(array![0.1, 0.2])],
            &Array2::from_elem((1, 2), 0.7),
            &Array2::from_elem((1, 1), 0.2),
            ON,
        )
        .unwrap();
        assert_eq!(out.alpha[0], vec![1.0]);
        assert!(out.alpha[1].is_empty());
        assert_eq!(out.r_hat[1], array![0.1, 0.2]);
        assert!((out.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
