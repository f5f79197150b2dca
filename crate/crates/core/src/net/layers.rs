//! Dense layers, MLPs and LSTMs with hand-written backward passes.
//!
//! Every `backward` accumulates into a gradient value of the same type as
//! the layer (`+=`), so per-example gradients can be summed in place.

use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::util::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation value.
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `m += a bᵀ`
pub(crate) fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, b);
        }
    }
}

/// Glorot-uniform matrix of shape `rows × cols`.
pub(crate) fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..a))
}

/// `y = W x + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// out × in
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn new<R: Rng>(rng: &mut R, input: usize, output: usize) -> Self {
        Dense {
            w: glorot(rng, output, input),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.dot(x) + &self.b
    }

    /// Accumulates parameter gradients, returns `dL/dx`.
    pub fn backward(&self, x: &Array1<f64>, dy: &Array1<f64>, grad: &mut Dense) -> Array1<f64> {
        add_outer(&mut grad.w, dy, x);
        grad.b += dy;
        self.w.t().dot(dy)
    }
}

/// Hidden layers with a shared activation followed by a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    /// Input of every layer.
    inputs: Vec<Array1<f64>>,
    /// Pre-activations of the hidden layers.
    pres: Vec<Array1<f64>>,
}

impl Mlp {
    /// `dims = [input, hidden..., output]`
    pub fn new<R: Rng>(rng: &mut R, dims: &[usize], activation: Activation) -> Self {
        Mlp {
            layers: dims.windows(2).map(|w| Dense::new(rng, w[0], w[1])).collect(),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("mlp has layers").output_dim()
    }

    pub fn forward(&self, x: &Array1<f64>) -> (Array1<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let pre = layer.forward(&h);
            inputs.push(h);
            if k == last {
                h = pre;
            } else {
                h = pre.mapv(|z| self.activation.apply(z));
                pres.push(pre);
            }
        }
        (h, MlpCache { inputs, pres })
    }

    pub fn backward(&self, cache: &MlpCache, dy: &Array1<f64>, grad: &mut Mlp) -> Array1<f64> {
        let mut d = dy.clone();
        for k in (0..self.layers.len()).rev() {
            if k < self.layers.len() - 1 {
                let pre = &cache.pres[k];
                d.zip_mut_with(pre, |g, &z| *g *= self.activation.derivative(z));
            }
            d = self.layers[k].backward(&cache.inputs[k], &d, &mut grad.layers[k]);
        }
        d
    }
}

/// LSTM cell with gate order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    /// 4H × I
    pub wx: Array2<f64>,
    /// 4H × H
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    xs: Vec<Array1<f64>>,
    hs: Vec<Array1<f64>>,
    cs: Vec<Array1<f64>>,
    /// Activated gates `[i, f, g, o]` stacked into one 4H vector.
    gates: Vec<Array1<f64>>,
}

impl LstmCell {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize) -> Self {
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmCell {
            wx: glorot(rng, 4 * hidden, input),
            wh: glorot(rng, 4 * hidden, hidden),
            b,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            wx: Array2::zeros((4 * hidden, input)),
            wh: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.wx.ncols()
    }

    /// Hidden state after every step, zero initial state.
    pub fn forward(&self, xs: &[Array1<f64>]) -> (Vec<Array1<f64>>, LstmCache) {
        let hd = self.hidden();
        let mut h = Array1::zeros(hd);
        let mut c = Array1::zeros(hd);
        let mut cache = LstmCache {
            xs: xs.to_vec(),
            hs: Vec::with_capacity(xs.len()),
            cs: Vec::with_capacity(xs.len()),
            gates: Vec::with_capacity(xs.len()),
        };
        for x in xs {
            let mut z = self.wx.dot(x) + self.wh.dot(&h) + &self.b;
            z.slice_mut(s![0..2 * hd]).mapv_inplace(sigmoid);
            z.slice_mut(s![2 * hd..3 * hd]).mapv_inplace(f64::tanh);
            z.slice_mut(s![3 * hd..]).mapv_inplace(sigmoid);
            let i = z.slice(s![0..hd]);
            let f = z.slice(s![hd..2 * hd]);
            let g = z.slice(s![2 * hd..3 * hd]);
            let o = z.slice(s![3 * hd..]);
            c = &f * &c + &i * &g;
            h = &o * &c.mapv(f64::tanh);
            cache.hs.push(h.clone());
            cache.cs.push(c.clone());
            cache.gates.push(z);
        }
        (cache.hs.clone(), cache)
    }

    /// `dhs[t]` is the external gradient on the hidden state of step `t`.
    /// Returns the gradient for every input.
    pub fn backward(
        &self,
        cache: &LstmCache,
        dhs: &[Array1<f64>],
        grad: &mut LstmCell,
    ) -> Vec<Array1<f64>> {
        let hd = self.hidden();
        let n = cache.xs.len();
        let mut dxs = vec![Array1::zeros(self.input_dim()); n];
        let mut dh_next = Array1::<f64>::zeros(hd);
        let mut dc_next = Array1::<f64>::zeros(hd);
        let zero = Array1::<f64>::zeros(hd);
        for t in (0..n).rev() {
            let gates = &cache.gates[t];
            let i = gates.slice(s![0..hd]);
            let f = gates.slice(s![hd..2 * hd]);
            let g = gates.slice(s![2 * hd..3 * hd]);
            let o = gates.slice(s![3 * hd..]);
            let c = &cache.cs[t];
            let c_prev = if t > 0 { &cache.cs[t - 1] } else { &zero };
            let h_prev = if t > 0 { &cache.hs[t - 1] } else { &zero };
            let tc = c.mapv(f64::tanh);

            let dh = &dhs[t] + &dh_next;
            let dc = &dc_next + &(&dh * &o * &tc.mapv(|x| 1.0 - x * x));
            let mut dz = Array1::zeros(4 * hd);
            // d pre-activation = d activated gate × activation'
            dz.slice_mut(s![0..hd])
                .assign(&(&dc * &g * &i.mapv(|x| x * (1.0 - x))));
            dz.slice_mut(s![hd..2 * hd])
                .assign(&(&dc * c_prev * &f.mapv(|x| x * (1.0 - x))));
            dz.slice_mut(s![2 * hd..3 * hd])
                .assign(&(&dc * &i * &g.mapv(|x| 1.0 - x * x)));
            dz.slice_mut(s![3 * hd..])
                .assign(&(&dh * &tc * &o.mapv(|x| x * (1.0 - x))));

            add_outer(&mut grad.wx, &dz, &cache.xs[t]);
            add_outer(&mut grad.wh, &dz, h_prev);
            grad.b += &dz;
            dxs[t] = self.wx.t().dot(&dz);
            dh_next = self.wh.t().dot(&dz);
            dc_next = &dc * &f;
        }
        dxs
    }
}

/// Two LSTMs reading the sequence in opposite directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

/// Hidden states of both directions, aligned to input positions.
#[derive(Debug, Clone, PartialEq)]
pub struct BiStates {
    pub fwd: Vec<Array1<f64>>,
    pub bwd: Vec<Array1<f64>>,
}

impl BiLstm {
    pub fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: LstmCell::new(rng, input, hidden),
            bwd: LstmCell::new(rng, input, hidden),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: LstmCell::zeros(input, hidden),
            bwd: LstmCell::zeros(input, hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.fwd.input_dim(), self.fwd.hidden())
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn forward(&self, xs: &[Array1<f64>]) -> (BiStates, BiLstmCache) {
        let (fwd, fcache) = self.fwd.forward(xs);
        let rev: Vec<Array1<f64>> = xs.iter().rev().cloned().collect();
        let (mut bwd, bcache) = self.bwd.forward(&rev);
        bwd.reverse();
        (
            BiStates { fwd, bwd },
            BiLstmCache {
                fwd: fcache,
                bwd: bcache,
            },
        )
    }

    /// Gradients are given per input position for each direction.
    pub fn backward(
        &self,
        cache: &BiLstmCache,
        d_fwd: &[Array1<f64>],
        d_bwd: &[Array1<f64>],
        grad: &mut BiLstm,
    ) -> Vec<Array1<f64>> {
        let mut dxs = self.fwd.backward(&cache.fwd, d_fwd, &mut grad.fwd);
        let d_bwd_rev: Vec<Array1<f64>> = d_bwd.iter().rev().cloned().collect();
        let dxb = self.bwd.backward(&cache.bwd, &d_bwd_rev, &mut grad.bwd);
        let n = dxs.len();
        for (k, dx) in dxb.into_iter().enumerate() {
            dxs[n - 1 - k] += &dx;
        }
        dxs
    }
}
