//! Binary graph snapshot. All integers little-endian.
//!
//! ```text
//! magic        8 bytes  "KAGNETKG"
//! version      u32      1
//! n_concepts   u32      then n_concepts × (u32 byte length, UTF-8 surface)
//! n_relations  u32      then n_relations × (u32 byte length, UTF-8 name)
//! n_triples    u32      then n_triples × (u32 head, u32 rel, u32 tail, f64 weight)
//! ```
//!
//! Triples are stored sorted by (head, rel, tail); the adjacency index is
//! rebuilt on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ConceptId, KnowledgeGraph, RelationId, Triple};
use crate::error::{Error, Result};
use crate::util::{read_magic, read_str, write_magic, write_str};

pub const KG_SNAPSHOT_MAGIC: &[u8; 8] = b"KAGNETKG";
pub const KG_SNAPSHOT_VERSION: u32 = 1;

impl KnowledgeGraph {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, KG_SNAPSHOT_MAGIC, KG_SNAPSHOT_VERSION)?;
        w.write_u32::<LittleEndian>(self.concepts.len() as u32)?;
        for c in &self.concepts {
            write_str(w, c)?;
        }
        w.write_u32::<LittleEndian>(self.relations.len() as u32)?;
        for r in &self.relations {
            write_str(w, r)?;
        }
        w.write_u32::<LittleEndian>(self.triples.len() as u32)?;
        for t in &self.triples {
            w.write_u32::<LittleEndian>(t.head.0)?;
            w.write_u32::<LittleEndian>(t.rel.0)?;
            w.write_u32::<LittleEndian>(t.tail.0)?;
            w.write_f64::<LittleEndian>(t.weight)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_magic(r, KG_SNAPSHOT_MAGIC, KG_SNAPSHOT_VERSION)?;
        let n_concepts = r.read_u32::<LittleEndian>()? as usize;
        let concepts = (0..n_concepts)
            .map(|_| read_str(r))
            .collect::<Result<Vec<_>>>()?;
        let n_relations = r.read_u32::<LittleEndian>()? as usize;
        let relations = (0..n_relations)
            .map(|_| read_str(r))
            .collect::<Result<Vec<_>>>()?;
        let n_triples = r.read_u32::<LittleEndian>()? as usize;
        let mut triples = Vec::with_capacity(n_triples);
        for _ in 0..n_triples {
            let t = Triple {
                head: ConceptId(r.read_u32::<LittleEndian>()?),
                rel: RelationId(r.read_u32::<LittleEndian>()?),
                tail: ConceptId(r.read_u32::<LittleEndian>()?),
                weight: r.read_f64::<LittleEndian>()?,
            };
            if t.head.index() >= n_concepts || t.tail.index() >= n_concepts {
                return Err(Error::Snapshot("triple references unknown concept".into()));
            }
            if t.rel.index() >= n_relations {
                return Err(Error::Snapshot("triple references unknown relation".into()));
            }
            triples.push(t);
        }
        let sorted = triples
            .windows(2)
            .all(|w| (w[0].head, w[0].rel, w[0].tail) < (w[1].head, w[1].rel, w[1].tail));
        if !sorted {
            return Err(Error::Snapshot("triples are not sorted and unique".into()));
        }
        if concepts.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(KnowledgeGraph::from_parts(concepts, relations, triples))
    }
}

pub fn write_snapshot(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    kg.write_to(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    KnowledgeGraph::read_from(&mut BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_byte_identical() {
        let mut b = KnowledgeGraph::builder();
        b.triple("ice", "HasProperty", "cold", 1.0)
            .triple("snow", "IsA", "ice", 0.25)
            .concept("lonely");
        let kg = b.build().unwrap();
        let mut bytes = Vec::new();
        kg.write_to(&mut bytes).unwrap();
        let back = KnowledgeGraph::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, kg);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_wrong_magic() {
        let err = KnowledgeGraph::read_from(&mut &b"NOTAGRAPH..."[..]).unwrap_err();
        assert!(matches!(err, Error::Snapshot(_)));
    }
}
