//! Knowledge-aware commonsense question answering.
//!
//! The crate grounds a question/answer pair into a *schema graph* over a
//! ConceptNet-style knowledge graph, prunes the connecting paths with TransE
//! triple confidences, and scores the pair with a GCN-LSTM network topped by
//! hierarchical path/pair attention. Attention weights are exported as
//! human-readable explanation reports.
//!
//! Stages, in pipeline order:
//!
//! | module        | role                                                        |
//! |---------------|-------------------------------------------------------------|
//! | [`kg`]        | triple ingestion, relation merging, adjacency, snapshots    |
//! | [`grounding`] | n-gram concept recognition with lemmatization               |
//! | [`paths`]     | bounded simple-path search and schema-graph assembly        |
//! | [`kge`]       | TransE training, triple/path confidence, path pruning       |
//! | [`net`]       | GCN, path BiLSTM, attention, scoring, exact gradients       |
//! | [`pipeline`]  | datasets, statement encoding, training, prediction, reports |
//! | [`cli`]       | the `kagnet` command-line front end                         |
//!
//! See the `examples/` directory of this crate for one runnable program per
//! stage.

pub mod cli;
pub mod config;
pub mod error;
pub mod grounding;
pub mod kg;
pub mod kge;
pub mod net;
pub mod paths;
pub mod pipeline;
pub mod selfcheck;
pub mod synthetic;
pub mod util;

pub use error::{Error, Result};
