//! Plain (unlabeled, undirected) graph convolution:
//! `h_i' = σ(W_self h_i + Σ_{j ∈ N(i)} W_nbr h_j / |N(i)|)`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::layers::Activation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer {
    /// out × in
    pub w_self: Array2<f64>,
    /// out × in
    pub w_nbr: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnCache {
    aggregates: Vec<Array2<f64>>,
    pres: Vec<Array2<f64>>,
}

/// Row-wise neighbor mean; rows of isolated nodes are zero.
fn neighbor_mean(h: &Array2<f64>, neighbors: &[Vec<usize>]) -> Array2<f64> {
    let mut agg = Array2::zeros(h.raw_dim());
    for (i, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let mut row = agg.row_mut(i);
        for &j in nbrs {
            row.scaled_add(w, &h.row(j));
        }
    }
    agg
}

/// Runs every layer. Returns the node states of all layers, input first.
pub fn gcn_forward(
    layers: &[GcnLayer],
    activation: Activation,
    h0: Array2<f64>,
    neighbors: &[Vec<usize>],
) -> (Vec<Array2<f64>>, GcnCache) {
    let mut states = vec![h0];
    let mut cache = GcnCache {
        aggregates: Vec::with_capacity(layers.len()),
        pres: Vec::with_capacity(layers.len()),
    };
    for layer in layers {
        let h = states.last().expect("input state");
        let agg = neighbor_mean(h, neighbors);
        let pre = h.dot(&layer.w_self.t()) + agg.dot(&layer.w_nbr.t());
        states.push(pre.mapv(|z| activation.apply(z)));
        cache.aggregates.push(agg);
        cache.pres.push(pre);
    }
    (states, cache)
}

/// Backpropagates `d_out` (gradient on the last layer's states). Parameter
/// gradients accumulate into `grads`; the gradient on the input states is
/// returned.
pub fn gcn_backward(
    layers: &[GcnLayer],
    activation: Activation,
    states: &[Array2<f64>],
    cache: &GcnCache,
    neighbors: &[Vec<usize>],
    d_out: Array2<f64>,
    grads: &mut [GcnLayer],
) -> Array2<f64> {
    let mut d = d_out;
    for l in (0..layers.len()).rev() {
        let mut dpre = d;
        dpre.zip_mut_with(&cache.pres[l], |g, &z| *g *= activation.derivative(z));
        grads[l].w_self += &dpre.t().dot(&states[l]);
        grads[l].w_nbr += &dpre.t().dot(&cache.aggregates[l]);
        let mut dh = dpre.dot(&layers[l].w_self);
        let dagg = dpre.dot(&layers[l].w_nbr);
        for (i, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let w = 1.0 / nbrs.len() as f64;
            let src = dagg.index_axis(Axis(0), i).to_owned();
            for &j in nbrs {
                dh.row_mut(j).scaled_add(w, &src);
            }
        }
        d = dh;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_weights_hand_computation() {
        let layer = GcnLayer {
            w_self: Array2::eye(2),
            w_nbr: Array2::eye(2),
        };
        let h0 = array![[1.0, 0.0], [0.0, 1.0]];
        let neighbors = vec![vec![1], vec![0]];
        let (states, _) = gcn_forward(&[layer], Activation::Identity, h0, &neighbors);
        assert_eq!(states[1], array![[1.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn isolated_node_with_zero_self_weight_is_zero() {
        let layer = GcnLayer {
            w_self: Array2::zeros((2, 2)),
            w_nbr: Array2::eye(2),
        };
        let (states, _) = gcn_forward(
            &[layer],
            Activation::Relu,
            array![[3.0, -1.0]],
            &[vec![]],
        );
        assert_eq!(states[1], array![[0.0, 0.0]]);
    }
}
