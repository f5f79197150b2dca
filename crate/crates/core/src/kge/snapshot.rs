//! Binary embedding snapshot. All integers little-endian.
//!
//! ```text
//! magic        8 bytes  "KAGNETEM"
//! version      u32      1
//! dim          u32
//! gamma        f64
//! norm         u8       1 = L1, 2 = L2
//! vocab_hash   u32 length + UTF-8 hex SHA-256 of the graph vocabularies
//! n_concepts   u32
//! n_relations  u32
//! concepts     n_concepts × dim f64, row-major
//! relations    n_relations × dim f64, forward vectors only
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{EmbeddingTable, Norm};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::util::{read_f64s, read_magic, read_str, write_f64s, write_magic, write_str};

pub const EMB_SNAPSHOT_MAGIC: &[u8; 8] = b"KAGNETEM";
pub const EMB_SNAPSHOT_VERSION: u32 = 1;

impl EmbeddingTable {
    pub fn write_to<W: Write>(&self, w: &mut W, vocab_hash: &str) -> Result<()> {
        write_magic(w, EMB_SNAPSHOT_MAGIC, EMB_SNAPSHOT_VERSION)?;
        w.write_u32::<LittleEndian>(self.dim() as u32)?;
        w.write_f64::<LittleEndian>(self.gamma)?;
        w.write_u8(match self.norm {
            Norm::L1 => 1,
            Norm::L2 => 2,
        })?;
        write_str(w, vocab_hash)?;
        w.write_u32::<LittleEndian>(self.num_concepts() as u32)?;
        w.write_u32::<LittleEndian>(self.num_relations() as u32)?;
        write_f64s(w, &self.concepts.iter().copied().collect::<Vec<_>>())?;
        write_f64s(w, &self.relations.iter().copied().collect::<Vec<_>>())?;
        Ok(())
    }

    /// Returns the table and the vocabulary hash it was saved with.
    pub fn read_from<R: Read>(r: &mut R) -> Result<(Self, String)> {
        read_magic(r, EMB_SNAPSHOT_MAGIC, EMB_SNAPSHOT_VERSION)?;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let gamma = r.read_f64::<LittleEndian>()?;
        let norm = match r.read_u8()? {
            1 => Norm::L1,
            2 => Norm::L2,
            other => return Err(Error::Snapshot(format!("unknown norm tag {other}"))),
        };
        let hash = read_str(r)?;
        let n_concepts = r.read_u32::<LittleEndian>()? as usize;
        let n_relations = r.read_u32::<LittleEndian>()? as usize;
        let concepts = Array2::from_shape_vec((n_concepts, dim), read_f64s(r, n_concepts * dim)?)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let relations =
            Array2::from_shape_vec((n_relations, dim), read_f64s(r, n_relations * dim)?)
                .map_err(|e| Error::Snapshot(e.to_string()))?;
        Ok((
            EmbeddingTable {
                concepts,
                relations,
                gamma,
                norm,
            },
            hash,
        ))
    }
}

pub fn write_embeddings(emb: &EmbeddingTable, kg: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    emb.write_to(&mut w, &kg.vocab_hash())?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads a snapshot and checks it was trained on `kg`.
pub fn read_embeddings(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (emb, hash) = EmbeddingTable::read_from(&mut BufReader::new(file))?;
    if hash != kg.vocab_hash() {
        return Err(Error::Snapshot(format!(
            "{} was trained on a different graph vocabulary",
            path.display()
        )));
    }
    if emb.num_concepts() != kg.num_concepts() || emb.num_relations() != kg.num_relations() {
        return Err(Error::Snapshot("embedding table size does not match graph".into()));
    }
    Ok(emb)
}
