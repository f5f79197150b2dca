//! Graph network: GCN node contextualization, BiLSTM path encoding,
//! hierarchical attention and the plausibility score, with hand-written
//! backward passes for everything.

pub mod adam;
pub mod attention;
pub mod gcn;
pub mod input;
pub mod layers;
pub mod model;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use attention::{hpa_backward, hpa_forward, relation_mean, AttentionSwitches, HpaGrads, HpaOutput};
pub use gcn::{gcn_backward, gcn_forward, GcnLayer};
pub use input::{fallback_vector, GraphInput, PairInput, PathInput};
pub use layers::{Activation, BiLstm, Dense, LstmCell, Mlp};
pub use model::{ForwardTrace, Gradients, KagNet};
pub use params::{ModelParams, ModelShape, NetConfig, Parameters, TensorRef};
