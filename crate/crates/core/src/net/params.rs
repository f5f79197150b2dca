use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gcn::GcnLayer;
use super::layers::{glorot, Activation, BiLstm, Dense, LstmCell, Mlp};
use crate::error::{Error, Result};
use crate::kge::EmbeddingTable;

/// Borrowed view of one named parameter tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Uniform access to every trainable tensor of a parameter set, in a fixed
/// order. Optimizers, checkpoints and gradient checks are written against
/// this trait.
pub trait Parameters {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// `self += alpha * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, alpha: f64)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for ((_, dst), src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src.data) {
                *d += alpha * s;
            }
        }
    }

    fn scale(&mut self, alpha: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= alpha);
        }
    }
}

pub(crate) fn t1<'a>(name: impl Into<String>, a: &'a Array1<f64>) -> TensorRef<'a> {
    TensorRef {
        name: name.into(),
        shape: vec![a.len()],
        data: a.as_slice().expect("standard layout"),
    }
}

pub(crate) fn t2<'a>(name: impl Into<String>, a: &'a Array2<f64>) -> TensorRef<'a> {
    TensorRef {
        name: name.into(),
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("standard layout"),
    }
}

pub(crate) fn m1(name: impl Into<String>, a: &mut Array1<f64>) -> (String, &mut [f64]) {
    (name.into(), a.as_slice_mut().expect("standard layout"))
}

pub(crate) fn m2(name: impl Into<String>, a: &mut Array2<f64>) -> (String, &mut [f64]) {
    (name.into(), a.as_slice_mut().expect("standard layout"))
}

pub(crate) fn push_mlp<'a>(out: &mut Vec<TensorRef<'a>>, prefix: &str, mlp: &'a Mlp) {
    for (k, l) in mlp.layers.iter().enumerate() {
        out.push(t2(format!("{prefix}.{k}.w"), &l.w));
        out.push(t1(format!("{prefix}.{k}.b"), &l.b));
    }
}

pub(crate) fn push_mlp_mut<'a>(out: &mut Vec<(String, &'a mut [f64])>, prefix: &str, mlp: &'a mut Mlp) {
    for (k, l) in mlp.layers.iter_mut().enumerate() {
        let Dense { w, b } = l;
        out.push(m2(format!("{prefix}.{k}.w"), w));
        out.push(m1(format!("{prefix}.{k}.b"), b));
    }
}

pub(crate) fn push_lstm<'a>(out: &mut Vec<TensorRef<'a>>, prefix: &str, lstm: &'a BiLstm) {
    for (dir, cell) in [("fwd", &lstm.fwd), ("bwd", &lstm.bwd)] {
        out.push(t2(format!("{prefix}.{dir}.wx"), &cell.wx));
        out.push(t2(format!("{prefix}.{dir}.wh"), &cell.wh));
        out.push(t1(format!("{prefix}.{dir}.b"), &cell.b));
    }
}

pub(crate) fn push_lstm_mut<'a>(
    out: &mut Vec<(String, &'a mut [f64])>,
    prefix: &str,
    lstm: &'a mut BiLstm,
) {
    let BiLstm { fwd, bwd } = lstm;
    for (dir, cell) in [("fwd", fwd), ("bwd", bwd)] {
        let LstmCell { wx, wh, b } = cell;
        out.push(m2(format!("{prefix}.{dir}.wx"), wx));
        out.push(m2(format!("{prefix}.{dir}.wh"), wh));
        out.push(m1(format!("{prefix}.{dir}.b"), b));
    }
}

/// Hyperparameters of the graph network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    /// Output width of each GCN layer; empty disables the GCN.
    pub gcn_dims: Vec<usize>,
    /// Hidden size of each LSTM direction.
    pub lstm_hidden: usize,
    pub t_hidden: usize,
    pub t_dim: usize,
    pub score_hidden: usize,
    pub gcn_activation: Activation,
    pub mlp_activation: Activation,
    pub path_attention: bool,
    pub pair_attention: bool,
    pub train_relations: bool,
    pub train_concepts: bool,
    /// Fallback path vectors are uniform in `[-scale, scale]`.
    pub fallback_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            gcn_dims: vec![100, 50],
            lstm_hidden: 128,
            t_hidden: 128,
            t_dim: 128,
            score_hidden: 64,
            gcn_activation: Activation::Relu,
            mlp_activation: Activation::Tanh,
            path_attention: true,
            pair_attention: true,
            train_relations: true,
            train_concepts: false,
            fallback_scale: 0.5,
        }
    }
}

impl NetConfig {
    pub fn path_dim(&self) -> usize {
        4 * self.lstm_hidden
    }
}

/// Input widths fixed by the data rather than by hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub concept_dim: usize,
    pub relation_dim: usize,
    pub num_relations: usize,
    pub statement_dim: usize,
}

impl ModelShape {
    pub fn from_embeddings(emb: &EmbeddingTable, statement_dim: usize) -> Self {
        ModelShape {
            concept_dim: emb.dim(),
            relation_dim: emb.relations.ncols(),
            num_relations: emb.num_relations(),
            statement_dim,
        }
    }
}

/// Every trainable tensor of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gcn: Vec<GcnLayer>,
    pub lstm: BiLstm,
    pub t_mlp: Mlp,
    /// Path attention bilinear form, `t_dim × path_dim`.
    pub w1: Array2<f64>,
    /// Pair attention bilinear form, `statement_dim × t_dim`.
    pub w2: Array2<f64>,
    pub score_mlp: Mlp,
    /// Forward relation vectors, `num_relations × relation_dim`.
    pub relations: Array2<f64>,
    /// Fine-tuned concept vectors; `None` reads them from the embedding table.
    pub concepts: Option<Array2<f64>>,
}

impl ModelParams {
    pub fn init(cfg: &NetConfig, shape: &ModelShape, emb: &EmbeddingTable, seed: u64) -> Result<Self> {
        if emb.dim() != shape.concept_dim || emb.num_relations() != shape.num_relations {
            return Err(Error::Dimension {
                context: "embedding table vs model shape",
                expected: shape.concept_dim,
                actual: emb.dim(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gcn = Vec::new();
        let mut d_in = shape.concept_dim;
        for &d_out in &cfg.gcn_dims {
            gcn.push(GcnLayer {
                w_self: glorot(&mut rng, d_out, d_in),
                w_nbr: glorot(&mut rng, d_out, d_in),
            });
            d_in = d_out;
        }
        let node_dim = d_in;
        let lstm = BiLstm::new(&mut rng, 2 * node_dim + shape.relation_dim, cfg.lstm_hidden);
        let t_mlp = Mlp::new(
            &mut rng,
            &[shape.statement_dim + 2 * node_dim, cfg.t_hidden, cfg.t_dim],
            cfg.mlp_activation,
        );
        let w1 = glorot(&mut rng, cfg.t_dim, cfg.path_dim());
        let w2 = glorot(&mut rng, shape.statement_dim, cfg.t_dim);
        let score_mlp = Mlp::new(
            &mut rng,
            &[cfg.path_dim() + cfg.t_dim, cfg.score_hidden, 1],
            cfg.mlp_activation,
        );
        Ok(ModelParams {
            gcn,
            lstm,
            t_mlp,
            w1,
            w2,
            score_mlp,
            relations: emb.relations.clone(),
            concepts: cfg.train_concepts.then(|| emb.concepts.clone()),
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            gcn: self
                .gcn
                .iter()
                .map(|l| GcnLayer {
                    w_self: Array2::zeros(l.w_self.raw_dim()),
                    w_nbr: Array2::zeros(l.w_nbr.raw_dim()),
                })
                .collect(),
            lstm: self.lstm.zeros_like(),
            t_mlp: self.t_mlp.zeros_like(),
            w1: Array2::zeros(self.w1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            score_mlp: self.score_mlp.zeros_like(),
            relations: Array2::zeros(self.relations.raw_dim()),
            concepts: self.concepts.as_ref().map(|c| Array2::zeros(c.raw_dim())),
        }
    }

    /// Output width of the last GCN layer (or the concept width without GCN).
    pub fn node_dim(&self) -> usize {
        (self.lstm.fwd.input_dim() - self.relations.ncols()) / 2
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (k, l) in self.gcn.iter().enumerate() {
            out.push(t2(format!("gcn.{k}.w_self"), &l.w_self));
            out.push(t2(format!("gcn.{k}.w_nbr"), &l.w_nbr));
        }
        push_lstm(&mut out, "lstm", &self.lstm);
        push_mlp(&mut out, "t_mlp", &self.t_mlp);
        out.push(t2("w1", &self.w1));
        out.push(t2("w2", &self.w2));
        push_mlp(&mut out, "score_mlp", &self.score_mlp);
        out.push(t2("relations", &self.relations));
        if let Some(c) = &self.concepts {
            out.push(t2("concepts", c));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let ModelParams {
            gcn,
            lstm,
            t_mlp,
            w1,
            w2,
            score_mlp,
            relations,
            concepts,
        } = self;
        let mut out = Vec::new();
        for (k, l) in gcn.iter_mut().enumerate() {
            let GcnLayer { w_self, w_nbr } = l;
            out.push(m2(format!("gcn.{k}.w_self"), w_self));
            out.push(m2(format!("gcn.{k}.w_nbr"), w_nbr));
        }
        push_lstm_mut(&mut out, "lstm", lstm);
        push_mlp_mut(&mut out, "t_mlp", t_mlp);
        out.push(m2("w1", w1));
        out.push(m2("w2", w2));
        push_mlp_mut(&mut out, "score_mlp", score_mlp);
        out.push(m2("relations", relations));
        if let Some(c) = concepts {
            out.push(m2("concepts", c));
        }
        out
    }
}
