use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::attention::{hpa_backward, hpa_forward, AttentionSwitches, HpaOutput};
use super::gcn::{gcn_backward, gcn_forward, GcnCache};
use super::input::GraphInput;
use super::layers::{BiLstmCache, MlpCache};
use super::params::{ModelParams, ModelShape, NetConfig};
use crate::error::{Error, Result};
use crate::kge::EmbeddingTable;
use crate::util::sigmoid;

/// The full scorer: GCN over the schema graph, BiLSTM path encoder,
/// statement/concept MLP and hierarchical attention.
#[derive(Debug, Clone, PartialEq)]
pub struct KagNet {
    pub config: NetConfig,
    pub shape: ModelShape,
    pub params: ModelParams,
}

/// Intermediate values needed by the backward pass.
#[derive(Debug, Clone)]
pub struct TraceCache {
    gcn_states: Vec<Array2<f64>>,
    gcn: GcnCache,
    /// Per pair, per path.
    lstm: Vec<Vec<BiLstmCache>>,
    t_mlp: Vec<MlpCache>,
    score_mlp: MlpCache,
}

/// Everything computed while scoring one statement.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Node states after the last GCN layer, one row per local node.
    pub node_states: Array2<f64>,
    /// Per pair, per path.
    pub path_vectors: Vec<Vec<Array1<f64>>>,
    pub t: Vec<Array1<f64>>,
    pub attention: HpaOutput,
    pub logit: f64,
    pub score: f64,
    cache: Option<TraceCache>,
}

impl ForwardTrace {
    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.attention.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.attention.beta
    }

    pub fn g_hat(&self) -> &Array1<f64> {
        &self.attention.g_hat
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// Drops the backward cache.
    pub fn discard_cache(&mut self) {
        self.cache = None;
    }
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ModelParams,
    /// Gradient on the statement vector.
    pub statement: Array1<f64>,
    /// Gradient on the initial node vectors, one row per local node.
    pub init_nodes: Array2<f64>,
}

impl KagNet {
    pub fn new(config: NetConfig, shape: ModelShape, emb: &EmbeddingTable, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, &shape, emb, seed)?;
        Ok(KagNet { config, shape, params })
    }

    fn switches(&self) -> AttentionSwitches {
        AttentionSwitches {
            path: self.config.path_attention,
            pair: self.config.pair_attention,
        }
    }

    fn initial_states(&self, input: &GraphInput, emb: &EmbeddingTable) -> Result<Array2<f64>> {
        let table = self.params.concepts.as_ref().unwrap_or(&emb.concepts);
        if table.ncols() != self.shape.concept_dim {
            return Err(Error::Dimension {
                context: "concept vectors",
                expected: self.shape.concept_dim,
                actual: table.ncols(),
            });
        }
        let mut h0 = Array2::zeros((input.concepts.len(), self.shape.concept_dim));
        for (i, c) in input.concepts.iter().enumerate() {
            if c.index() >= table.nrows() {
                return Err(Error::MissingInitVector(*c));
            }
            h0.row_mut(i).assign(&table.row(c.index()));
        }
        Ok(h0)
    }

    fn relation_vec(&self, rel: crate::kg::RelationId, reversed: bool) -> Result<Array1<f64>> {
        if rel.index() >= self.params.relations.nrows() {
            return Err(Error::InvalidRelation(rel.0));
        }
        let r = self.params.relations.row(rel.index());
        Ok(if reversed { r.mapv(|x| -x) } else { r.to_owned() })
    }

    fn node_or_zero(&self, nodes: &Array2<f64>, idx: Option<usize>) -> Array1<f64> {
        match idx {
            Some(i) => nodes.row(i).to_owned(),
            None => Array1::zeros(self.params.node_dim()),
        }
    }

    /// Scores one statement. With `retain`, the trace keeps what
    /// [`KagNet::backward`] needs.
    pub fn forward(
        &self,
        input: &GraphInput,
        statement: &Array1<f64>,
        emb: &EmbeddingTable,
        retain: bool,
    ) -> Result<ForwardTrace> {
        if statement.len() != self.shape.statement_dim {
            return Err(Error::Dimension {
                context: "statement vector",
                expected: self.shape.statement_dim,
                actual: statement.len(),
            });
        }
        if input.pairs.is_empty() {
            return Err(Error::Ungroundable("graph input has no concept pairs".into()));
        }
        let h0 = self.initial_states(input, emb)?;
        let (gcn_states, gcn_cache) =
            gcn_forward(&self.params.gcn, self.config.gcn_activation, h0, &input.neighbors);
        let nodes = gcn_states.last().expect("input state").clone();
        let hd = self.params.lstm.hidden();

        let mut path_vectors = Vec::with_capacity(input.pairs.len());
        let mut lstm_caches = Vec::with_capacity(input.pairs.len());
        let mut fallbacks = Vec::with_capacity(input.pairs.len());
        let mut ts = Vec::with_capacity(input.pairs.len());
        let mut t_caches = Vec::with_capacity(input.pairs.len());
        for pair in &input.pairs {
            let mut vecs = Vec::with_capacity(pair.paths.len());
            let mut caches = Vec::with_capacity(pair.paths.len());
            for path in &pair.paths {
                let mut xs = Vec::with_capacity(path.len());
                for (k, &(rel, reversed)) in path.rels.iter().enumerate() {
                    let r = self.relation_vec(rel, reversed)?;
                    let x = concatenate(
                        Axis(0),
                        &[nodes.row(path.nodes[k]), r.view(), nodes.row(path.nodes[k + 1])],
                    )
                    .expect("1-d vectors");
                    xs.push(x);
                }
                let (states, cache) = self.params.lstm.forward(&xs);
                let last = xs.len() - 1;
                let v = concatenate(
                    Axis(0),
                    &[
                        states.fwd[0].view(),
                        states.bwd[0].view(),
                        states.fwd[last].view(),
                        states.bwd[last].view(),
                    ],
                )
                .expect("1-d vectors");
                debug_assert_eq!(v.len(), 4 * hd);
                vecs.push(v);
                caches.push(cache);
            }
            if let Some(fb) = &pair.fallback {
                if fb.len() != 4 * hd {
                    return Err(Error::Dimension {
                        context: "fallback path vector",
                        expected: 4 * hd,
                        actual: fb.len(),
                    });
                }
            }
            path_vectors.push(vecs);
            lstm_caches.push(caches);
            fallbacks.push(pair.fallback.clone());

            let cq = self.node_or_zero(&nodes, pair.q_node);
            let ca = self.node_or_zero(&nodes, pair.a_node);
            let t_in = concatenate(Axis(0), &[statement.view(), cq.view(), ca.view()])
                .expect("1-d vectors");
            let (t, cache) = self.params.t_mlp.forward(&t_in);
            ts.push(t);
            t_caches.push(cache);
        }

        let attention = hpa_forward(
            statement,
            &ts,
            &path_vectors,
            &fallbacks,
            &self.params.w1,
            &self.params.w2,
            self.switches(),
        )?;
        let (out, score_cache) = self.params.score_mlp.forward(&attention.g_hat);
        let logit = out[0];
        let score = sigmoid(logit);
        let cache = retain.then(|| TraceCache {
            gcn_states,
            gcn: gcn_cache,
            lstm: lstm_caches,
            t_mlp: t_caches,
            score_mlp: score_cache,
        });
        Ok(ForwardTrace {
            node_states: nodes,
            path_vectors,
            t: ts,
            attention,
            logit,
            score,
            cache,
        })
    }

    /// Exact gradients of a scalar loss given `d_logit = dL/dlogit`.
    pub fn backward(
        &self,
        input: &GraphInput,
        statement: &Array1<f64>,
        trace: &ForwardTrace,
        d_logit: f64,
    ) -> Result<Gradients> {
        let cache = trace.cache.as_ref().ok_or(Error::MissingTrace)?;
        let p = &self.params;
        let mut grads = p.zeros_like();
        let hd = p.lstm.hidden();
        let nd = p.node_dim();
        let rd = p.relations.ncols();
        let sd = self.shape.statement_dim;

        let d_g = p.score_mlp.backward(
            &cache.score_mlp,
            &Array1::from(vec![d_logit]),
            &mut grads.score_mlp,
        );
        let hg = hpa_backward(
            statement,
            &trace.t,
            &trace.path_vectors,
            &p.w1,
            &p.w2,
            self.switches(),
            &trace.attention,
            &d_g,
        );
        grads.w1 += &hg.d_w1;
        grads.w2 += &hg.d_w2;
        let mut d_statement = hg.d_s;
        let mut d_nodes = Array2::zeros(trace.node_states.raw_dim());

        for (pi, pair) in input.pairs.iter().enumerate() {
            let d_in = p.t_mlp.backward(&cache.t_mlp[pi], &hg.d_t[pi], &mut grads.t_mlp);
            d_statement += &d_in.slice(s![..sd]);
            if let Some(i) = pair.q_node {
                let mut row = d_nodes.row_mut(i);
                row += &d_in.slice(s![sd..sd + nd]);
            }
            if let Some(j) = pair.a_node {
                let mut row = d_nodes.row_mut(j);
                row += &d_in.slice(s![sd + nd..]);
            }

            for (k, path) in pair.paths.iter().enumerate() {
                let dv = &hg.d_paths[pi][k];
                let n = path.len();
                let mut d_fwd = vec![Array1::zeros(hd); n];
                let mut d_bwd = vec![Array1::zeros(hd); n];
                d_fwd[0] += &dv.slice(s![0..hd]);
                d_bwd[0] += &dv.slice(s![hd..2 * hd]);
                d_fwd[n - 1] += &dv.slice(s![2 * hd..3 * hd]);
                d_bwd[n - 1] += &dv.slice(s![3 * hd..]);
                let dxs = p
                    .lstm
                    .backward(&cache.lstm[pi][k], &d_fwd, &d_bwd, &mut grads.lstm);
                for (step, dx) in dxs.iter().enumerate() {
                    let (rel, reversed) = path.rels[step];
                    let mut head = d_nodes.row_mut(path.nodes[step]);
                    head += &dx.slice(s![..nd]);
                    let sign = if reversed { -1.0 } else { 1.0 };
                    grads
                        .relations
                        .row_mut(rel.index())
                        .scaled_add(sign, &dx.slice(s![nd..nd + rd]));
                    let mut tail = d_nodes.row_mut(path.nodes[step + 1]);
                    tail += &dx.slice(s![nd + rd..]);
                }
            }
        }

        let d_init = gcn_backward(
            &p.gcn,
            self.config.gcn_activation,
            &cache.gcn_states,
            &cache.gcn,
            &input.neighbors,
            d_nodes,
            &mut grads.gcn,
        );
        if let Some(gc) = grads.concepts.as_mut() {
            for (i, c) in input.concepts.iter().enumerate() {
                let mut row = gc.row_mut(c.index());
                row += &d_init.row(i);
            }
        }
        Ok(Gradients {
            params: grads,
            statement: d_statement,
            init_nodes: d_init,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;
    use crate::kge::{Norm, DEFAULT_GAMMA};
    use crate::net::input::GraphInput;
    use crate::paths::build_schema_graph_from;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> (KnowledgeGraph, EmbeddingTable, GraphInput) {
        let mut b = KnowledgeGraph::builder();
        b.triple("a", "AtLocation", "b", 1.0);
        b.triple("c", "UsedFor", "b", 1.0);
        b.triple("a", "UsedFor", "d", 1.0);
        let kg = b.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb = EmbeddingTable {
            concepts: Array2::from_shape_simple_fn((4, 3), || rng.gen_range(-1.0..1.0)),
            relations: Array2::from_shape_simple_fn((2, 3), || rng.gen_range(-1.0..1.0)),
            gamma: DEFAULT_GAMMA,
            norm: Norm::L2,
        };
        let id = |s| kg.lookup_surface(s).unwrap();
        let sg = build_schema_graph_from(&kg, &[id("a")], &[id("c"), id("d")], 3, 100).unwrap();
        let input = GraphInput::from_schema(&sg, "x", 0, 8, 0.5);
        (kg, emb, input)
    }

    fn tiny_config() -> NetConfig {
        NetConfig {
            gcn_dims: vec![3, 2],
            lstm_hidden: 2,
            t_hidden: 3,
            t_dim: 3,
            score_hidden: 3,
            ..NetConfig::default()
        }
    }

    #[test]
    fn score_in_unit_interval_and_attention_normalized() {
        let (_, emb, input) = small();
        let shape = ModelShape::from_embeddings(&emb, 2);
        let net = KagNet::new(tiny_config(), shape, &emb, 5).unwrap();
        let s = Array1::from(vec![0.3, -0.2]);
        let tr = net.forward(&input, &s, &emb, false).unwrap();
        assert!(tr.score > 0.0 && tr.score < 1.0);
        assert!((tr.beta().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(tr.alpha()[0], vec![1.0]);
        assert!(net.backward(&input, &s, &tr, 1.0).is_err());
    }

    #[test]
    fn zero_score_mlp_gives_half() {
        let (_, emb, input) = small();
        let shape = ModelShape::from_embeddings(&emb, 2);
        let mut net = KagNet::new(tiny_config(), shape, &emb, 5).unwrap();
        net.params.score_mlp = net.params.score_mlp.zeros_like();
        let tr = net.forward(&input, &Array1::zeros(2), &emb, false).unwrap();
        assert_eq!(tr.score, 0.5);
    }

    #[test]
    fn w1_gradient_zero_with_single_paths() {
        let (_, emb, input) = small();
        let shape = ModelShape::from_embeddings(&emb, 2);
        let net = KagNet::new(tiny_config(), shape, &emb, 9).unwrap();
        let s = Array1::from(vec![0.1, 0.4]);
        let tr = net.forward(&input, &s, &emb, true).unwrap();
        assert!(input.pairs.iter().all(|p| p.paths.len() <= 1));
        let g = net.backward(&input, &s, &tr, 0.7).unwrap();
        assert!(g.params.w1.iter().all(|&x| x == 0.0));
        let g2 = net.backward(&input, &s, &tr, 1.4).unwrap();
        for (a, b) in g.params.w2.iter().zip(g2.params.w2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_init_vector_is_an_error() {
        let (_, emb, mut input) = small();
        let shape = ModelShape::from_embeddings(&emb, 2);
        let net = KagNet::new(tiny_config(), shape, &emb, 5).unwrap();
        input.concepts[0] = crate::kg::ConceptId(99);
        let err = net.forward(&input, &Array1::zeros(2), &emb, false).unwrap_err();
        assert!(matches!(err, Error::MissingInitVector(_)));
    }
}
