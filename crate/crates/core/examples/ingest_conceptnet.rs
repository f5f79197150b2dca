//! Ingests a few ConceptNet assertions: relation merging, language
//! filtering, duplicate collapsing and a snapshot round trip.
//!
//! ```text
//! cargo run --example ingest_conceptnet
//! ```

use kagnet::kg::{ingest_reader, read_snapshot, write_snapshot, MergeMap};

const DUMP: &str = "\
/a/1\t/r/AtLocation\t/c/en/glue_stick\t/c/en/office\t{\"weight\": 1.0}
/a/2\t/r/LocatedNear\t/c/en/glue_stick/n\t/c/en/office\t{\"weight\": 2.5}
/a/3\t/r/UsedFor\t/c/en/glue_stick\t/c/en/paper\t{\"weight\": 1.0}
/a/4\t/r/MotivatedByGoal\t/c/en/study\t/c/en/learn\t{\"weight\": 1.0}
/a/5\t/r/ExternalURL\t/c/en/office\t/c/en/desk\t{}
/a/6\t/r/IsA\t/c/fr/colle\t/c/fr/objet\t{\"weight\": 1.0}
";

fn main() -> kagnet::Result<()> {
    let map = MergeMap::conceptnet_default();
    println!(
        "{} raw relations merge into {}",
        map.raw_relations().len(),
        map.merged_relations().len()
    );

    let ingested = ingest_reader(DUMP.as_bytes(), &map, "en")?;
    let kg = &ingested.graph;
    let r = &ingested.report;
    println!(
        "{} lines: {} accepted, {} deleted by map, {} other language, {} unmapped",
        r.lines,
        r.accepted,
        r.deleted_by_map,
        r.filtered_by_language,
        r.unmapped.len()
    );
    for t in kg.triples() {
        println!(
            "  {} -{}-> {}  (weight {})",
            kg.surface(t.head)?,
            kg.relation_name(t.rel)?,
            kg.surface(t.tail)?,
            t.weight
        );
    }

    let path = std::env::temp_dir().join("kagnet_example.snapshot");
    write_snapshot(kg, &path)?;
    let back = read_snapshot(&path)?;
    println!(
        "snapshot: {} concepts, {} triples, vocab hash matches: {}",
        back.num_concepts(),
        back.num_triples(),
        back.vocab_hash() == kg.vocab_hash()
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
