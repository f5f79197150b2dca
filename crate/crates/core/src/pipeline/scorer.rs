//! A statement encoder plus the graph network, and its checkpoint format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderCache, FeatureStore, StatementEncoder, ToyEncoder};
use super::prepare::PreparedExample;
use crate::error::{Error, Result};
use crate::kge::EmbeddingTable;
use crate::net::layers::BiLstm;
use crate::net::{ForwardTrace, KagNet, ModelParams, ModelShape, NetConfig, Parameters};
use crate::util::{read_f64s, read_magic, read_str, write_f64s, write_magic, write_str};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KAGNETCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    Toy {
        vocab: Vec<String>,
        embed_dim: usize,
        hidden: usize,
    },
    Features {
        dim: usize,
    },
}

/// Everything needed to rebuild a scorer's structure; stored as JSON at the
/// head of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub net: NetConfig,
    pub shape: ModelShape,
    pub encoder: EncoderSpec,
    /// Hash of the run configuration that produced the checkpoint.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    pub net: KagNet,
    pub encoder: StatementEncoder,
    pub config_hash: String,
}

/// Gradients for all trainable parts of a [`Scorer`].
#[derive(Debug, Clone)]
pub struct ScorerGrads {
    pub net: ModelParams,
    pub encoder: Option<ToyEncoder>,
}

impl ScorerGrads {
    pub fn add_scaled(&mut self, other: &ScorerGrads, alpha: f64) {
        self.net.add_scaled(&other.net, alpha);
        if let (Some(a), Some(b)) = (self.encoder.as_mut(), other.encoder.as_ref()) {
            a.add_scaled(b, alpha);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.net.scale(alpha);
        if let Some(e) = self.encoder.as_mut() {
            e.scale(alpha);
        }
    }
}

impl Scorer {
    pub fn new(net_config: NetConfig, encoder: StatementEncoder, emb: &EmbeddingTable, seed: u64) -> Result<Self> {
        let shape = ModelShape::from_embeddings(emb, encoder.dim());
        Ok(Scorer {
            net: KagNet::new(net_config, shape, emb, seed)?,
            encoder,
            config_hash: String::new(),
        })
    }

    pub fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            net: self.net.config.clone(),
            shape: self.net.shape,
            encoder: match &self.encoder {
                StatementEncoder::Toy(t) => EncoderSpec::Toy {
                    vocab: t.vocab.clone(),
                    embed_dim: t.embed_dim(),
                    hidden: t.lstm.hidden(),
                },
                StatementEncoder::Features(f) => EncoderSpec::Features { dim: f.dim() },
            },
            config_hash: self.config_hash.clone(),
        }
    }

    pub fn zero_grads(&self) -> ScorerGrads {
        ScorerGrads {
            net: self.net.params.zeros_like(),
            encoder: match &self.encoder {
                StatementEncoder::Toy(t) => Some(t.zeros_like()),
                StatementEncoder::Features(_) => None,
            },
        }
    }

    /// Statement vector and, for the trainable encoder, its backward cache.
    pub fn statement(
        &self,
        ex: &PreparedExample,
        candidate: usize,
    ) -> Result<(Array1<f64>, Option<EncoderCache>)> {
        let e = &ex.example;
        match &self.encoder {
            StatementEncoder::Toy(t) => {
                let (s, cache) = t.forward(&t.token_ids(&e.question, &e.candidates[candidate]));
                Ok((s, Some(cache)))
            }
            StatementEncoder::Features(f) => Ok((f.get(&e.id, candidate)?.clone(), None)),
        }
    }

    pub fn trace(
        &self,
        ex: &PreparedExample,
        candidate: usize,
        emb: &EmbeddingTable,
        retain: bool,
    ) -> Result<(ForwardTrace, Array1<f64>, Option<EncoderCache>)> {
        let (s, cache) = self.statement(ex, candidate)?;
        let tr = self.net.forward(&ex.candidates[candidate].input, &s, emb, retain)?;
        Ok((tr, s, cache))
    }

    /// Plausibility score of every candidate; each is computed from its own
    /// schema graph only.
    pub fn scores(&self, ex: &PreparedExample, emb: &EmbeddingTable) -> Result<Vec<f64>> {
        (0..ex.candidates.len())
            .map(|c| Ok(self.trace(ex, c, emb, false)?.0.score))
            .collect()
    }

    fn named_tensors(&self) -> Vec<crate::net::TensorRef<'_>> {
        let mut out = self.net.params.tensors();
        if let StatementEncoder::Toy(t) = &self.encoder {
            out.extend(t.tensors());
        }
        out
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        write_str(w, &serde_json::to_string(&self.spec())?)?;
        let tensors = self.named_tensors();
        w.write_u32::<LittleEndian>(tensors.len() as u32)?;
        for t in tensors {
            write_str(w, &t.name)?;
            w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
            for &d in &t.shape {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            write_f64s(w, t.data)?;
        }
        Ok(())
    }

    /// Rebuilds a scorer. Feature-file encoders need the store passed in.
    pub fn read_checkpoint<R: Read>(
        r: &mut R,
        emb: &EmbeddingTable,
        features: Option<FeatureStore>,
    ) -> Result<Self> {
        read_magic(r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let spec: ScorerSpec = serde_json::from_str(&read_str(r)?)?;
        let encoder = match &spec.encoder {
            EncoderSpec::Toy {
                vocab,
                embed_dim,
                hidden,
            } => StatementEncoder::Toy(ToyEncoder::from_parts(
                vocab.clone(),
                ndarray::Array2::zeros((vocab.len(), *embed_dim)),
                BiLstm::zeros(*embed_dim, *hidden),
            )),
            EncoderSpec::Features { dim } => {
                let store = features.ok_or_else(|| {
                    Error::Config("checkpoint uses a feature-file encoder; pass --features".into())
                })?;
                if store.dim() != *dim {
                    return Err(Error::Dimension {
                        context: "feature file vs checkpoint",
                        expected: *dim,
                        actual: store.dim(),
                    });
                }
                StatementEncoder::Features(store)
            }
        };
        if ModelShape::from_embeddings(emb, spec.shape.statement_dim) != spec.shape {
            return Err(Error::Snapshot(
                "checkpoint was trained with embeddings of a different shape".into(),
            ));
        }
        let mut scorer = Scorer::new(spec.net.clone(), encoder, emb, 0)?;
        scorer.config_hash = spec.config_hash.clone();

        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut stored = std::collections::HashMap::new();
        for _ in 0..count {
            let name = read_str(r)?;
            let ndim = r.read_u32::<LittleEndian>()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.read_u32::<LittleEndian>()? as usize);
            }
            let n = shape.iter().product();
            stored.insert(name, (shape, read_f64s(r, n)?));
        }
        let shapes: Vec<(String, Vec<usize>)> = scorer
            .named_tensors()
            .into_iter()
            .map(|t| (t.name, t.shape))
            .collect();
        let mut targets = scorer.net.params.tensors_mut();
        if let StatementEncoder::Toy(t) = &mut scorer.encoder {
            targets.extend(t.tensors_mut());
        }
        if targets.len() != stored.len() {
            return Err(Error::Snapshot(format!(
                "checkpoint has {} tensors, model expects {}",
                stored.len(),
                targets.len()
            )));
        }
        for ((name, dst), (_, shape)) in targets.into_iter().zip(shapes) {
            let (s, data) = stored
                .remove(&name)
                .ok_or_else(|| Error::Snapshot(format!("checkpoint lacks tensor {name}")))?;
            if s != shape {
                return Err(Error::Snapshot(format!(
                    "tensor {name} has shape {s:?}, expected {shape:?}"
                )));
            }
            dst.copy_from_slice(&data);
        }
        Ok(scorer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_checkpoint(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads only the structure header of a checkpoint file.
    pub fn read_spec(path: impl AsRef<Path>) -> Result<ScorerSpec> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        read_magic(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        Ok(serde_json::from_str(&read_str(&mut r)?)?)
    }

    pub fn load(path: impl AsRef<Path>, emb: &EmbeddingTable, features: Option<FeatureStore>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut BufReader::new(file), emb, features)
    }
}
