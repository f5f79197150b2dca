use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_MAP: &str = include_str!("../../data/relation_map.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeTarget {
    Delete,
    Keep {
        merged: String,
        /// Store the edge with head and tail swapped.
        swap: bool,
    },
}

/// Maps raw relation names onto a merged vocabulary.
///
/// File format: one `raw <TAB> merged` pair per line, `merged` being a
/// relation name, `*name` (swap head and tail) or `DELETE`. Blank lines and
/// lines starting with `#` are ignored. A leading `/r/` on raw names is
/// optional.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeMap {
    entries: HashMap<String, MergeTarget>,
    raw_order: Vec<String>,
    targets: Vec<String>,
}

impl MergeMap {
    /// The map shipped with the crate (17 merged types).
    pub fn conceptnet_default() -> Self {
        Self::parse(DEFAULT_MAP).expect("bundled relation map is well formed")
    }

    /// Maps every listed relation onto itself. Handy for toy graphs.
    pub fn identity<S: AsRef<str>>(names: &[S]) -> Self {
        let text: String = names
            .iter()
            .map(|n| format!("{0}\t{0}\n", n.as_ref()))
            .collect();
        Self::parse(&text).expect("identity map is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut raw_order = Vec::new();
        let mut targets: Vec<String> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(str::trim).filter(|c| !c.is_empty());
            let (raw, target) = match (cols.next(), cols.next(), cols.next()) {
                (Some(r), Some(t), None) => (r, t),
                _ => {
                    return Err(Error::MergeMap {
                        line: lineno + 1,
                        message: "expected two tab-separated columns".into(),
                    })
                }
            };
            let raw = strip_relation_prefix(raw).to_string();
            let target = if target == "DELETE" {
                MergeTarget::Delete
            } else {
                let (merged, swap) = match target.strip_prefix('*') {
                    Some(rest) => (rest, true),
                    None => (target, false),
                };
                if merged.is_empty() {
                    return Err(Error::MergeMap {
                        line: lineno + 1,
                        message: "empty merged relation name".into(),
                    });
                }
                if !targets.iter().any(|t| t == merged) {
                    targets.push(merged.to_string());
                }
                MergeTarget::Keep {
                    merged: merged.to_string(),
                    swap,
                }
            };
            if entries.insert(raw.clone(), target).is_some() {
                return Err(Error::MergeMap {
                    line: lineno + 1,
                    message: format!("relation {raw} listed twice"),
                });
            }
            raw_order.push(raw);
        }
        Ok(MergeMap {
            entries,
            raw_order,
            targets,
        })
    }

    /// Merged vocabulary in order of first appearance in the map.
    pub fn merged_relations(&self) -> &[String] {
        &self.targets
    }

    /// Raw relation names in file order.
    pub fn raw_relations(&self) -> &[String] {
        &self.raw_order
    }

    /// `None` means the relation is not listed in the map at all.
    pub fn resolve(&self, raw: &str) -> Option<&MergeTarget> {
        self.entries.get(strip_relation_prefix(raw))
    }
}

pub(crate) fn strip_relation_prefix(raw: &str) -> &str {
    raw.strip_prefix("/r/").unwrap_or(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_has_seventeen_targets() {
        let map = MergeMap::conceptnet_default();
        assert_eq!(map.merged_relations().len(), 17);
        assert_eq!(
            map.resolve("/r/HasA"),
            Some(&MergeTarget::Keep {
                merged: "PartOf".into(),
                swap: true
            })
        );
        assert_eq!(map.resolve("FormOf"), Some(&MergeTarget::Delete));
        assert_eq!(map.resolve("Nonsense"), None);
    }

    #[test]
    fn every_raw_relation_maps_to_one_target_or_delete() {
        let map = MergeMap::conceptnet_default();
        for raw in map.raw_relations() {
            match map.resolve(raw).unwrap() {
                MergeTarget::Delete => {}
                MergeTarget::Keep { merged, .. } => {
                    assert!(map.merged_relations().contains(merged))
                }
            }
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            MergeMap::parse("IsA\n"),
            Err(Error::MergeMap { line: 1, .. })
        ));
        assert!(matches!(
            MergeMap::parse("IsA\tIsA\nIsA\tRelatedTo\n"),
            Err(Error::MergeMap { line: 2, .. })
        ));
    }
}
