use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use super::merge::{strip_relation_prefix, MergeMap, MergeTarget};
use super::{normalize_surface, GraphBuilder, KnowledgeGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestIssue {
    pub line: usize,
    pub message: String,
}

/// What happened to every input line.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    pub malformed: Vec<IngestIssue>,
    pub deleted_by_map: usize,
    pub filtered_by_language: usize,
    /// Raw relations absent from the merge map, with line counts.
    pub unmapped: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct IngestedGraph {
    pub graph: KnowledgeGraph,
    pub report: IngestReport,
}

/// Reads a ConceptNet assertion dump (full 5-column CSV-as-TSV form) or a
/// simplified `relation <TAB> head <TAB> tail [<TAB> weight]` file.
pub fn ingest(
    assertions: impl AsRef<Path>,
    merge_map: &MergeMap,
    language: &str,
) -> Result<IngestedGraph> {
    let path = assertions.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), merge_map, language)
}

pub fn ingest_reader<R: BufRead>(
    reader: R,
    merge_map: &MergeMap,
    language: &str,
) -> Result<IngestedGraph> {
    let mut builder = GraphBuilder::default();
    for merged in merge_map.merged_relations() {
        builder.relation(merged);
    }
    let lang_prefix = format!("/c/{language}/");
    let mut report = IngestReport::default();
    let mut seen_raw: BTreeMap<String, ()> = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let parsed = match parse_line(&line, &lang_prefix) {
            Ok(Some(p)) => p,
            Ok(None) => {
                report.filtered_by_language += 1;
                continue;
            }
            Err(message) => {
                report.malformed.push(IngestIssue {
                    line: lineno,
                    message,
                });
                continue;
            }
        };
        let raw = strip_relation_prefix(&parsed.relation).to_string();
        seen_raw.insert(raw.clone(), ());
        match merge_map.resolve(&raw) {
            None => *report.unmapped.entry(raw).or_default() += 1,
            Some(MergeTarget::Delete) => report.deleted_by_map += 1,
            Some(MergeTarget::Keep { merged, swap }) => {
                let (h, t) = if *swap {
                    (&parsed.tail, &parsed.head)
                } else {
                    (&parsed.head, &parsed.tail)
                };
                builder.triple(h, merged, t, parsed.weight);
                report.accepted += 1;
            }
        }
    }

    for raw in merge_map.raw_relations() {
        if !seen_raw.contains_key(raw) {
            report
                .warnings
                .push(format!("merge map relation {raw} never occurs in the input"));
        }
    }
    for (raw, n) in &report.unmapped {
        log::warn!("relation {raw} is not in the merge map; {n} line(s) dropped");
    }
    for issue in &report.malformed {
        log::warn!("line {}: {}", issue.line, issue.message);
    }

    if builder.num_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let graph = builder.build()?;
    Ok(IngestedGraph { graph, report })
}

struct ParsedLine {
    relation: String,
    head: String,
    tail: String,
    weight: f64,
}

/// `Ok(None)` means the line was dropped by the language filter.
fn parse_line(line: &str, lang_prefix: &str) -> std::result::Result<Option<ParsedLine>, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() == 5 && cols[1].starts_with("/r/") {
        let (Some(head), Some(tail)) = (
            concept_from_uri(cols[2], lang_prefix)?,
            concept_from_uri(cols[3], lang_prefix)?,
        ) else {
            return Ok(None);
        };
        let meta: serde_json::Value = serde_json::from_str(cols[4])
            .map_err(|e| format!("bad JSON metadata: {e}"))?;
        let weight = match meta.get("weight") {
            None => 1.0,
            Some(w) => w.as_f64().ok_or("non-numeric weight")?,
        };
        check_weight(weight)?;
        return Ok(Some(ParsedLine {
            relation: cols[1].to_string(),
            head,
            tail,
            weight,
        }));
    }
    if cols.len() == 3 || cols.len() == 4 {
        let relation = cols[0].trim();
        if relation.is_empty() {
            return Err("empty relation".into());
        }
        let mut ends = Vec::with_capacity(2);
        for raw in [cols[1], cols[2]] {
            let raw = raw.trim();
            if raw.starts_with("/c/") {
                match concept_from_uri(raw, lang_prefix)? {
                    Some(s) => ends.push(s),
                    None => return Ok(None),
                }
            } else {
                let s = normalize_surface(raw);
                if s.is_empty() {
                    return Err("empty concept".into());
                }
                ends.push(s);
            }
        }
        let weight = match cols.get(3).map(|s| s.trim()) {
            None | Some("") => 1.0,
            Some(w) => w.parse::<f64>().map_err(|_| format!("bad weight {w:?}"))?,
        };
        check_weight(weight)?;
        let tail = ends.pop().unwrap();
        let head = ends.pop().unwrap();
        return Ok(Some(ParsedLine {
            relation: relation.to_string(),
            head,
            tail,
            weight,
        }));
    }
    Err(format!("expected 3-5 tab-separated columns, got {}", cols.len()))
}

fn check_weight(w: f64) -> std::result::Result<(), String> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(format!("weight {w} is not a nonnegative finite number"))
    }
}

/// `/c/en/ice_cream/n/...` → `ice_cream`; other languages → `None`.
fn concept_from_uri(uri: &str, lang_prefix: &str) -> std::result::Result<Option<String>, String> {
    if !uri.starts_with("/c/") {
        return Err(format!("not a concept URI: {uri}"));
    }
    let Some(rest) = uri.strip_prefix(lang_prefix) else {
        return Ok(None);
    };
    let term = rest.split('/').next().unwrap_or("");
    if term.is_empty() {
        return Err(format!("empty concept term in {uri}"));
    }
    Ok(Some(normalize_surface(&term.replace('_', " "))))
}
