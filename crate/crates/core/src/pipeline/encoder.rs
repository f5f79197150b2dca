//! Statement encoders: a small trainable BiLSTM over
//! `question <sep> answer`, or vectors read from a feature file.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::tokenize;
use crate::net::layers::{BiLstm, BiLstmCache};
use crate::net::params::{m2, push_lstm, push_lstm_mut, t2, Parameters, TensorRef};
use crate::util::{read_magic, read_str, write_magic, write_str};

pub const UNK: &str = "<unk>";
pub const SEP: &str = "<sep>";

/// Token embedding table plus BiLSTM. The statement vector is the last
/// forward state concatenated with the first backward state.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// `|vocab| × embed_dim`
    pub embed: Array2<f64>,
    pub lstm: BiLstm,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    ids: Vec<usize>,
    lstm: BiLstmCache,
}

impl ToyEncoder {
    /// Vocabulary: `<unk>`, `<sep>`, then every token of `texts` in sorted
    /// order.
    pub fn new<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        embed_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(tokenize).collect();
        let mut vocab = vec![UNK.to_string(), SEP.to_string()];
        vocab.extend(words.into_iter().filter(|w| w != UNK && w != SEP));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed = Array2::from_shape_simple_fn((vocab.len(), embed_dim), || rng.gen_range(-0.1..0.1));
        let lstm = BiLstm::new(&mut rng, embed_dim, hidden);
        Self::from_parts(vocab, embed, lstm)
    }

    pub fn from_parts(vocab: Vec<String>, embed: Array2<f64>, lstm: BiLstm) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        ToyEncoder {
            vocab,
            index,
            embed,
            lstm,
        }
    }

    pub fn zeros_like(&self) -> Self {
        ToyEncoder {
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            embed: Array2::zeros(self.embed.raw_dim()),
            lstm: self.lstm.zeros_like(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.lstm.hidden()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn token_ids(&self, question: &str, answer: &str) -> Vec<usize> {
        let lookup = |w: &String| self.index.get(w).copied().unwrap_or(0);
        let mut ids: Vec<usize> = tokenize(question).iter().map(lookup).collect();
        ids.push(1);
        ids.extend(tokenize(answer).iter().map(lookup));
        ids
    }

    pub fn forward(&self, ids: &[usize]) -> (Array1<f64>, EncoderCache) {
        let xs: Vec<Array1<f64>> = ids.iter().map(|&i| self.embed.row(i).to_owned()).collect();
        let (states, cache) = self.lstm.forward(&xs);
        let last = xs.len() - 1;
        let s = concatenate(Axis(0), &[states.fwd[last].view(), states.bwd[0].view()])
            .expect("1-d vectors");
        (
            s,
            EncoderCache {
                ids: ids.to_vec(),
                lstm: cache,
            },
        )
    }

    pub fn encode(&self, question: &str, answer: &str) -> Array1<f64> {
        self.forward(&self.token_ids(question, answer)).0
    }

    pub fn backward(&self, cache: &EncoderCache, ds: &Array1<f64>, grad: &mut ToyEncoder) {
        let h = self.lstm.hidden();
        let n = cache.ids.len();
        let mut d_fwd = vec![Array1::zeros(h); n];
        let mut d_bwd = vec![Array1::zeros(h); n];
        d_fwd[n - 1].assign(&ds.slice(s![..h]));
        d_bwd[0].assign(&ds.slice(s![h..]));
        let dxs = self.lstm.backward(&cache.lstm, &d_fwd, &d_bwd, &mut grad.lstm);
        for (&id, dx) in cache.ids.iter().zip(&dxs) {
            let mut row = grad.embed.row_mut(id);
            row += dx;
        }
    }
}

impl Parameters for ToyEncoder {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![t2("encoder.embed", &self.embed)];
        push_lstm(&mut out, "encoder.lstm", &self.lstm);
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let ToyEncoder { embed, lstm, .. } = self;
        let mut out = vec![m2("encoder.embed", embed)];
        push_lstm_mut(&mut out, "encoder.lstm", lstm);
        out
    }
}

pub const FEATURE_MAGIC: &[u8; 8] = b"KAGNETFT";
pub const FEATURE_VERSION: u32 = 1;

/// Precomputed statement vectors keyed by (example id, candidate index).
///
/// Binary layout, little-endian:
///
/// ```text
/// magic     8 bytes "KAGNETFT"
/// version   u32     1
/// dim       u32
/// count     u32
/// index     count × (id: u32 length + UTF-8, candidate: u32)
/// rows      count × dim f32, in index order
/// ```
///
/// JSONL alternative, one object per line:
/// `{"id": "q1", "candidate": 0, "vector": [0.1, ...]}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    rows: HashMap<(String, usize), Array1<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    id: String,
    candidate: usize,
    vector: Vec<f64>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            rows: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, id: &str, candidate: usize, vector: Array1<f64>) -> Result<()> {
        if self.rows.is_empty() && self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                context: "feature vector",
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.rows.insert((id.to_string(), candidate), vector);
        Ok(())
    }

    pub fn get(&self, id: &str, candidate: usize) -> Result<&Array1<f64>> {
        self.rows
            .get(&(id.to_string(), candidate))
            .ok_or_else(|| Error::MissingFeature {
                id: id.to_string(),
                candidate,
            })
    }

    fn sorted_keys(&self) -> Vec<&(String, usize)> {
        let mut keys: Vec<_> = self.rows.keys().collect();
        keys.sort();
        keys
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, FEATURE_MAGIC, FEATURE_VERSION)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u32::<LittleEndian>(self.rows.len() as u32)?;
        let keys = self.sorted_keys();
        for (id, cand) in &keys {
            write_str(w, id)?;
            w.write_u32::<LittleEndian>(*cand as u32)?;
        }
        for key in &keys {
            for &x in &self.rows[*key] {
                w.write_f32::<LittleEndian>(x as f32)?;
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        for (id, cand) in self.sorted_keys() {
            let line = FeatureLine {
                id: id.clone(),
                candidate: *cand,
                vector: self.rows[&(id.clone(), *cand)].to_vec(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, FEATURE_MAGIC, FEATURE_VERSION)?;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let count = r.read_u32::<LittleEndian>()? as usize;
        let mut keys = Vec::with_capacity(count);
        for _ in 0..count {
            let id = read_str(r)?;
            let cand = r.read_u32::<LittleEndian>()? as usize;
            keys.push((id, cand));
        }
        let mut store = FeatureStore::new(dim);
        for key in keys {
            let mut v = Array1::zeros(dim);
            for x in v.iter_mut() {
                *x = r.read_f32::<LittleEndian>()? as f64;
            }
            store.rows.insert(key, v);
        }
        Ok(store)
    }

    fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut store = FeatureStore::new(0);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: FeatureLine = serde_json::from_str(&line).map_err(|e| Error::Dataset {
                line: i + 1,
                message: e.to_string(),
            })?;
            store.insert(&f.id, f.candidate, Array1::from(f.vector))?;
        }
        Ok(store)
    }

    /// Reads either layout; the binary one is recognized by its magic.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(FEATURE_MAGIC) {
            Self::read_binary(&mut bytes.as_slice())
        } else {
            Self::read_jsonl(bytes.as_slice())
        }
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_binary(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Where statement vectors come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StatementEncoder {
    Toy(ToyEncoder),
    Features(FeatureStore),
}

impl StatementEncoder {
    pub fn dim(&self) -> usize {
        match self {
            StatementEncoder::Toy(t) => t.dim(),
            StatementEncoder::Features(f) => f.dim(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, StatementEncoder::Toy(_))
    }

    pub fn encode(&self, id: &str, candidate: usize, question: &str, answer: &str) -> Result<Array1<f64>> {
        match self {
            StatementEncoder::Toy(t) => Ok(t.encode(question, answer)),
            StatementEncoder::Features(f) => f.get(id, candidate).cloned(),
        }
    }
}
