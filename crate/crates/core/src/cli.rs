//! The `kagnet` command-line front end.
//!
//! Every stage writes its outputs plus a `manifest.json` into the `--out`
//! directory. Usage errors exit with status 2, stage failures with status 1
//! and a one-line JSON error on stderr.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{EncoderKind, Manifest, RunConfig};
use crate::error::{Error, Result};
use crate::grounding::{Grounder, MentionSet, StopWords};
use crate::kg::{ingest, read_snapshot, write_snapshot, KnowledgeGraph, MergeMap, KG_SNAPSHOT_MAGIC};
use crate::kge::{prune, read_embeddings, train_transe, write_embeddings, EmbeddingTable};
use crate::paths::build_schema_graph_from;
use crate::pipeline::{
    explain, load_dataset, predict, prediction_accuracy, split_held_out, train, write_predictions,
    CandidateGraph, FeatureStore, PreparedExample, Preprocessor, QAExample, Scorer,
    StatementEncoder, ToyEncoder,
};
use crate::selfcheck;
use crate::util::derive_seed;

#[derive(Debug, Parser)]
#[command(name = "kagnet", version, about = "Knowledge-aware graph networks for commonsense QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a ConceptNet dump, merge relations and write a graph snapshot.
    Ingest(IngestArgs),
    /// Recognize question and answer concepts.
    Ground(GroundArgs),
    /// Build schema graphs (paths between question and answer concepts).
    Paths(PathsArgs),
    /// Train TransE embeddings on the graph.
    #[command(name = "train-kge")]
    TrainKge(TrainKgeArgs),
    /// Drop low-confidence paths from schema graphs.
    Prune(PruneArgs),
    /// Produce a statement feature file.
    Encode(EncodeArgs),
    /// Train the scorer.
    Train(TrainArgs),
    /// Score every candidate and pick an answer.
    Predict(PredictArgs),
    /// Export attention-based explanations.
    Explain(ExplainArgs),
    /// Run the gradient and oracle suites.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sets every seed of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Graph snapshot, or a raw assertion file to ingest on the fly.
    #[arg(long)]
    pub kg: PathBuf,
    /// Relation merge map used when `--kg` is a raw file.
    #[arg(long)]
    pub merge_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GroundingArgs {
    /// Stop-word list, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Longest path, in edges.
    #[arg(long)]
    pub max_edges: Option<usize>,
    /// Most paths kept per concept pair.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Path-score pruning threshold; 0 disables pruning.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub grounding: GroundingArgs,
    /// Questions in CommonsenseQA JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub grounding: GroundingArgs,
    /// Output of `ground`, or questions in CommonsenseQA JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainKgeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Word vectors (`token v1 v2 ...`) for initialization.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub grounding: GroundingArgs,
    /// Embedding snapshot from `train-kge`.
    #[arg(long)]
    pub emb: PathBuf,
    /// Output of `paths`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Questions in CommonsenseQA JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Existing feature file to validate and convert to the binary layout.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ModelInputs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub grounding: GroundingArgs,
    /// Embedding snapshot from `train-kge`.
    #[arg(long)]
    pub emb: PathBuf,
    /// Questions in CommonsenseQA JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Precomputed statement vectors.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory for cached schema graphs.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: ModelInputs,
    /// Dev questions; otherwise `dev_holdout` questions are split off.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub inputs: ModelInputs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub inputs: ModelInputs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Only this question id.
    #[arg(long)]
    pub example: Option<String>,
    /// Candidate to explain (default: the predicted one).
    #[arg(long)]
    pub candidate: Option<usize>,
    #[arg(long)]
    pub top_pairs: Option<usize>,
    #[arg(long)]
    pub top_paths: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[command(flatten)]
    pub common: Common,
}

/// Concepts of one question, by surface form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedExample {
    pub id: String,
    pub question: MentionSurfaces,
    pub candidates: Vec<MentionSurfaces>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionSurfaces {
    pub tokens: Vec<String>,
    pub concepts: Vec<String>,
}

impl MentionSurfaces {
    fn new(m: &MentionSet, kg: &KnowledgeGraph) -> Self {
        MentionSurfaces {
            tokens: m.tokens.clone(),
            concepts: m.surfaces(kg).into_iter().map(String::from).collect(),
        }
    }
}

/// One line of `paths` and `prune` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub candidate: usize,
    pub graph: CandidateGraph,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub threshold: f64,
    pub graphs: usize,
    /// Pairs whose paths all fell below the threshold.
    pub floored_pairs: usize,
    pub paths_before: usize,
    pub paths_after: usize,
    pub kept_fraction: f64,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = command_name(&cli.command);
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let msg = serde_json::json!({
                "error": { "command": name, "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{msg}");
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Ground(_) => "ground",
        Command::Paths(_) => "paths",
        Command::TrainKge(_) => "train-kge",
        Command::Prune(_) => "prune",
        Command::Encode(_) => "encode",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Explain(_) => "explain",
        Command::Selfcheck(_) => "selfcheck",
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Ground(a) => cmd_ground(a),
        Command::Paths(a) => cmd_paths(a),
        Command::TrainKge(a) => cmd_train_kge(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
    }
}

struct Stage {
    config: RunConfig,
    out: PathBuf,
    manifest: Manifest,
}

impl Stage {
    fn start(name: &str, common: &Common, grounding: Option<&GroundingArgs>) -> Result<Self> {
        let mut config = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let seed = common.seed.unwrap_or(config.seed);
        config.set_seed(seed);
        if let Some(g) = grounding {
            if let Some(v) = g.max_edges {
                config.grounding.max_edges = v;
            }
            if let Some(v) = g.cap {
                config.grounding.cap = v;
            }
            if let Some(v) = g.threshold {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("threshold {v} outside [0, 1]")));
                }
                config.grounding.threshold = v;
                config.grounding.prune = v > 0.0;
            }
        }
        if let Some(jobs) = common.jobs {
            // Fails only if the pool already exists, e.g. a second call in
            // the same process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
        }
        fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
        let mut manifest = Manifest::new(name, &config);
        if let Some(p) = &common.config {
            manifest.input("config", p)?;
        }
        Ok(Stage {
            manifest,
            config,
            out: common.out.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.manifest.input(role, path)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        self.output(name)
    }

    fn write_jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = self.create(name)?;
        for r in rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.output(name)
    }

    fn output(&mut self, name: &str) -> Result<()> {
        self.manifest.output(self.path(name))
    }

    fn finish(self) -> Result<i32> {
        self.manifest.save(self.out.join("manifest.json"))?;
        Ok(0)
    }
}

fn is_snapshot(path: &Path) -> Result<bool> {
    let mut head = [0u8; 8];
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let n = f.read(&mut head).map_err(|e| Error::io(path, e))?;
    Ok(n == 8 && &head == KG_SNAPSHOT_MAGIC)
}

fn merge_map(args: &GraphArgs) -> Result<MergeMap> {
    match &args.merge_map {
        Some(p) => MergeMap::load(p),
        None => Ok(MergeMap::conceptnet_default()),
    }
}

fn load_graph(args: &GraphArgs, stage: &mut Stage) -> Result<KnowledgeGraph> {
    stage.input("kg", &args.kg)?;
    if is_snapshot(&args.kg)? {
        return read_snapshot(&args.kg);
    }
    if let Some(p) = &args.merge_map {
        stage.input("merge_map", p)?;
    }
    let ingested = ingest(&args.kg, &merge_map(args)?, &stage.config.language)?;
    for w in &ingested.report.warnings {
        log::warn!("{w}");
    }
    Ok(ingested.graph)
}

fn grounder(args: &GroundingArgs, stage: &mut Stage) -> Result<Grounder> {
    let stopwords = match &args.stopwords {
        Some(p) => {
            stage.input("stopwords", p)?;
            StopWords::load(p)?
        }
        None => StopWords::english(),
    };
    Ok(Grounder {
        max_ngram: stage.config.grounding.max_ngram,
        stopwords,
    })
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn first_line_has_key(path: &Path, key: &str) -> Result<bool> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: 1,
            message: e.to_string(),
        })?;
        return Ok(v.get(key).is_some());
    }
    Ok(false)
}

fn cmd_ingest(a: IngestArgs) -> Result<i32> {
    let mut stage = Stage::start("ingest", &a.common, None)?;
    stage.input("kg", &a.graph.kg)?;
    if let Some(p) = &a.graph.merge_map {
        stage.input("merge_map", p)?;
    }
    let ingested = ingest(&a.graph.kg, &merge_map(&a.graph)?, &stage.config.language)?;
    let kg = &ingested.graph;
    println!(
        "{} concepts, {} relations, {} triples ({} lines, {} malformed)",
        kg.num_concepts(),
        kg.num_relations(),
        kg.num_triples(),
        ingested.report.lines,
        ingested.report.malformed.len()
    );
    write_snapshot(kg, stage.path("kg.snapshot"))?;
    stage.output("kg.snapshot")?;
    stage.write_json("ingest_report.json", &ingested.report)?;
    stage.finish()
}

fn ground_all(kg: &KnowledgeGraph, grounder: &Grounder, examples: &[QAExample]) -> Vec<GroundedExample> {
    use rayon::prelude::*;
    examples
        .par_iter()
        .map(|ex| GroundedExample {
            id: ex.id.clone(),
            question: MentionSurfaces::new(&grounder.recognize(&ex.question, kg), kg),
            candidates: ex
                .candidates
                .iter()
                .map(|c| MentionSurfaces::new(&grounder.recognize(c, kg), kg))
                .collect(),
        })
        .collect()
}

fn cmd_ground(a: GroundArgs) -> Result<i32> {
    let mut stage = Stage::start("ground", &a.common, Some(&a.grounding))?;
    let kg = load_graph(&a.graph, &mut stage)?;
    let grounder = grounder(&a.grounding, &mut stage)?;
    stage.input("dataset", &a.dataset)?;
    let examples = load_dataset(&a.dataset)?;
    let grounded = ground_all(&kg, &grounder, &examples);
    stage.write_jsonl("grounded.jsonl", &grounded)?;
    stage.finish()
}

fn surfaces_to_ids(kg: &KnowledgeGraph, surfaces: &[String]) -> Result<Vec<crate::kg::ConceptId>> {
    surfaces
        .iter()
        .map(|s| {
            kg.lookup_surface(s)
                .ok_or_else(|| Error::Config(format!("concept {s:?} is not in the graph")))
        })
        .collect()
}

fn schema_record(
    kg: &KnowledgeGraph,
    id: &str,
    candidate: usize,
    q: &[String],
    a: &[String],
    cfg: &crate::pipeline::GroundingConfig,
) -> Result<GraphRecord> {
    let graph = match build_schema_graph_from(
        kg,
        &surfaces_to_ids(kg, q)?,
        &surfaces_to_ids(kg, a)?,
        cfg.max_edges,
        cfg.cap,
    ) {
        Ok(sg) => CandidateGraph {
            schema: Some(sg),
            prune: None,
            ungroundable: None,
        },
        Err(Error::Ungroundable(reason)) => CandidateGraph {
            schema: None,
            prune: None,
            ungroundable: Some(reason),
        },
        Err(e) => return Err(e),
    };
    Ok(GraphRecord {
        id: id.to_string(),
        candidate,
        graph,
    })
}

fn cmd_paths(a: PathsArgs) -> Result<i32> {
    use rayon::prelude::*;
    let mut stage = Stage::start("paths", &a.common, Some(&a.grounding))?;
    let kg = load_graph(&a.graph, &mut stage)?;
    stage.input("dataset", &a.dataset)?;
    let grounded: Vec<GroundedExample> = if first_line_has_key(&a.dataset, "candidates")? {
        read_jsonl(&a.dataset)?
    } else {
        let grounder = grounder(&a.grounding, &mut stage)?;
        ground_all(&kg, &grounder, &load_dataset(&a.dataset)?)
    };
    let jobs: Vec<(usize, usize)> = grounded
        .iter()
        .enumerate()
        .flat_map(|(e, g)| (0..g.candidates.len()).map(move |c| (e, c)))
        .collect();
    let cfg = stage.config.grounding.clone();
    let records = jobs
        .par_iter()
        .map(|&(e, c)| {
            let g = &grounded[e];
            schema_record(&kg, &g.id, c, &g.question.concepts, &g.candidates[c].concepts, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let paths: usize = records
        .iter()
        .filter_map(|r| r.graph.schema.as_ref())
        .map(|s| s.num_paths())
        .sum();
    let ungroundable = records.iter().filter(|r| r.graph.schema.is_none()).count();
    println!("{} schema graphs, {paths} paths, {ungroundable} ungroundable", records.len());
    stage.write_jsonl("schema_graphs.jsonl", &records)?;
    stage.finish()
}

fn cmd_train_kge(a: TrainKgeArgs) -> Result<i32> {
    let mut stage = Stage::start("train-kge", &a.common, None)?;
    let kg = load_graph(&a.graph, &mut stage)?;
    if let Some(p) = &a.word_vectors {
        stage.input("word_vectors", p)?;
    }
    let (emb, report) = train_transe(&kg, &stage.config.kge, a.word_vectors.as_deref())?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(l) = report.epoch_losses.last() {
        println!("{} epochs, final loss {l:.6}", report.epoch_losses.len());
    }
    write_embeddings(&emb, &kg, stage.path("embeddings.bin"))?;
    stage.output("embeddings.bin")?;
    stage.write_json("kge_report.json", &report)?;
    stage.finish()
}

fn load_emb(path: &Path, kg: &KnowledgeGraph, stage: &mut Stage) -> Result<EmbeddingTable> {
    stage.input("emb", path)?;
    read_embeddings(kg, path)
}

fn cmd_prune(a: PruneArgs) -> Result<i32> {
    let mut stage = Stage::start("prune", &a.common, Some(&a.grounding))?;
    let kg = load_graph(&a.graph, &mut stage)?;
    let emb = load_emb(&a.emb, &kg, &mut stage)?;
    stage.input("dataset", &a.dataset)?;
    let records: Vec<GraphRecord> = read_jsonl(&a.dataset).map_err(|e| match e {
        Error::Dataset { line, message } => Error::Dataset {
            line,
            message: format!("{message} (expected the output of `paths`)"),
        },
        e => e,
    })?;
    let threshold = stage.config.grounding.threshold;
    let mut summary = PruneSummary {
        threshold,
        ..PruneSummary::default()
    };
    let mut out = Vec::with_capacity(records.len());
    for mut r in records {
        if let Some(sg) = &r.graph.schema {
            if !sg.nodes.iter().all(|&c| kg.contains(c)) {
                return Err(Error::Config(format!("schema graph of {} does not match the graph", r.id)));
            }
            let (pruned, report) = prune(sg, &emb, threshold);
            summary.graphs += 1;
            summary.floored_pairs += report.floored_pairs.len();
            summary.paths_before += report.paths_before;
            summary.paths_after += report.paths_after;
            r.graph.schema = Some(pruned);
            r.graph.prune = Some(report);
        }
        out.push(r);
    }
    summary.kept_fraction = if summary.paths_before == 0 {
        1.0
    } else {
        summary.paths_after as f64 / summary.paths_before as f64
    };
    println!(
        "kept {} of {} paths ({:.2}%) at threshold {threshold}",
        summary.paths_after,
        summary.paths_before,
        100.0 * summary.kept_fraction
    );
    stage.write_jsonl("pruned_graphs.jsonl", &out)?;
    stage.write_json("prune_summary.json", &summary)?;
    stage.finish()
}

fn vocabulary_texts(examples: &[QAExample]) -> impl Iterator<Item = &str> {
    examples
        .iter()
        .flat_map(|e| std::iter::once(e.question.as_str()).chain(e.candidates.iter().map(String::as_str)))
}

fn toy_encoder(config: &RunConfig, examples: &[QAExample]) -> ToyEncoder {
    ToyEncoder::new(
        vocabulary_texts(examples),
        config.encoder.embed_dim,
        config.encoder.hidden,
        derive_seed(config.seed, "encoder"),
    )
}

fn cmd_encode(a: EncodeArgs) -> Result<i32> {
    let mut stage = Stage::start("encode", &a.common, None)?;
    stage.input("dataset", &a.dataset)?;
    let examples = load_dataset(&a.dataset)?;
    let encoder = match &a.features {
        Some(p) => {
            stage.input("features", p)?;
            StatementEncoder::Features(FeatureStore::load(p)?)
        }
        None => StatementEncoder::Toy(toy_encoder(&stage.config, &examples)),
    };
    let mut store = FeatureStore::new(encoder.dim());
    for ex in &examples {
        for (c, text) in ex.candidates.iter().enumerate() {
            store.insert(&ex.id, c, encoder.encode(&ex.id, c, &ex.question, text)?)?;
        }
    }
    println!("{} statement vectors of dimension {}", store.len(), store.dim());
    store.save_binary(stage.path("features.bin"))?;
    stage.output("features.bin")?;
    stage.finish()
}

struct ModelContext {
    kg: KnowledgeGraph,
    emb: EmbeddingTable,
    grounder: Grounder,
    features: Option<FeatureStore>,
}

fn model_context(inputs: &ModelInputs, stage: &mut Stage) -> Result<ModelContext> {
    let kg = load_graph(&inputs.graph, stage)?;
    let emb = load_emb(&inputs.emb, &kg, stage)?;
    let grounder = grounder(&inputs.grounding, stage)?;
    let features = match &inputs.features {
        Some(p) => {
            stage.input("features", p)?;
            Some(FeatureStore::load(p)?)
        }
        None => None,
    };
    Ok(ModelContext {
        kg,
        emb,
        grounder,
        features,
    })
}

impl ModelContext {
    fn preprocessor(&self, stage: &Stage, path_dim: usize, fallback_scale: f64, cache: Option<&Path>) -> Preprocessor<'_> {
        Preprocessor {
            kg: &self.kg,
            emb: &self.emb,
            grounder: &self.grounder,
            config: stage.config.grounding.clone(),
            seed: derive_seed(stage.config.seed, "fallback"),
            path_dim,
            fallback_scale,
            cache_dir: cache.map(Path::to_path_buf),
        }
    }
}

fn cmd_train(a: TrainArgs) -> Result<i32> {
    let mut stage = Stage::start("train", &a.common, Some(&a.inputs.grounding))?;
    let mut ctx = model_context(&a.inputs, &mut stage)?;
    stage.input("dataset", &a.inputs.dataset)?;
    let all = load_dataset(&a.inputs.dataset)?;
    let (train_set, dev_set) = match &a.dev {
        Some(p) => {
            stage.input("dev", p)?;
            (all, load_dataset(p)?)
        }
        None => split_held_out(&all, stage.config.dev_holdout, derive_seed(stage.config.seed, "split")),
    };
    if train_set.iter().any(|e| e.label.is_none()) {
        return Err(Error::Config("training questions need an answerKey".into()));
    }
    let cfg = stage.config.clone();
    let encoder = match cfg.encoder.kind {
        EncoderKind::Toy => StatementEncoder::Toy(toy_encoder(&cfg, &train_set)),
        EncoderKind::Features => StatementEncoder::Features(
            ctx.features
                .take()
                .ok_or_else(|| Error::Config("encoder kind \"features\" needs --features".into()))?,
        ),
    };
    let pre = ctx.preprocessor(&stage, cfg.model.path_dim(), cfg.model.fallback_scale, a.inputs.cache.as_deref());
    let train_prep = pre.prepare(&train_set)?;
    let dev_prep = pre.prepare(&dev_set)?;
    let mut scorer = Scorer::new(cfg.model.clone(), encoder, &ctx.emb, derive_seed(cfg.seed, "model"))?;
    scorer.config_hash = pre.config_hash();
    let report = train(&mut scorer, &train_prep, &dev_prep, &ctx.emb, &cfg.train)?;
    println!(
        "trained {} epochs on {} questions; kept epoch {} (dev acc {:.4})",
        report.epochs.len(),
        train_prep.len(),
        report.best_epoch,
        report.best_dev_acc
    );
    scorer.save(stage.path("checkpoint.bin"))?;
    stage.output("checkpoint.bin")?;
    let mut w = stage.create("metrics.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    stage.output("metrics.csv")?;
    stage.finish()
}

fn prepared_for_checkpoint(
    inputs: &ModelInputs,
    checkpoint: &Path,
    stage: &mut Stage,
) -> Result<(ModelContext, Scorer, Vec<PreparedExample>)> {
    let mut ctx = model_context(inputs, stage)?;
    stage.input("checkpoint", checkpoint)?;
    let spec = Scorer::read_spec(checkpoint)?;
    stage.input("dataset", &inputs.dataset)?;
    let examples = load_dataset(&inputs.dataset)?;
    let features = ctx.features.take();
    let pre = ctx.preprocessor(stage, spec.net.path_dim(), spec.net.fallback_scale, inputs.cache.as_deref());
    if spec.config_hash != pre.config_hash() {
        return Err(Error::Config(
            "checkpoint was trained with a different graph, embedding or grounding configuration".into(),
        ));
    }
    let prepared = pre.prepare(&examples)?;
    let scorer = Scorer::load(checkpoint, &ctx.emb, features)?;
    Ok((ctx, scorer, prepared))
}

fn cmd_predict(a: PredictArgs) -> Result<i32> {
    let mut stage = Stage::start("predict", &a.common, Some(&a.inputs.grounding))?;
    let (ctx, scorer, prepared) = prepared_for_checkpoint(&a.inputs, &a.checkpoint, &mut stage)?;
    let predictions = predict(&scorer, &prepared, &ctx.emb)?;
    if prepared.iter().all(|e| e.example.label.is_some()) && !prepared.is_empty() {
        println!(
            "{} predictions, accuracy {:.4}",
            predictions.len(),
            prediction_accuracy(&predictions, &prepared)
        );
    } else {
        println!("{} predictions", predictions.len());
    }
    let mut w = stage.create("predictions.jsonl")?;
    write_predictions(&mut w, &predictions)?;
    w.flush()?;
    stage.output("predictions.jsonl")?;
    stage.finish()
}

fn cmd_explain(a: ExplainArgs) -> Result<i32> {
    let mut stage = Stage::start("explain", &a.common, Some(&a.inputs.grounding))?;
    if let Some(n) = a.top_pairs {
        stage.config.explain.top_pairs = n;
    }
    if let Some(n) = a.top_paths {
        stage.config.explain.top_paths = n;
    }
    stage.manifest = Manifest::new("explain", &stage.config);
    let (ctx, scorer, prepared) = prepared_for_checkpoint(&a.inputs, &a.checkpoint, &mut stage)?;
    let selected: Vec<&PreparedExample> = match &a.example {
        Some(id) => {
            let found: Vec<_> = prepared.iter().filter(|e| &e.example.id == id).collect();
            if found.is_empty() {
                return Err(Error::Config(format!("no question with id {id:?}")));
            }
            found
        }
        None => prepared.iter().collect(),
    };
    let mut reports = Vec::with_capacity(selected.len());
    for ex in selected {
        let candidate = match a.candidate {
            Some(c) if c < ex.candidates.len() => c,
            Some(c) => {
                return Err(Error::Config(format!(
                    "candidate {c} out of range for {} ({} candidates)",
                    ex.example.id,
                    ex.candidates.len()
                )))
            }
            None => crate::pipeline::choose(&scorer.scores(ex, &ctx.emb)?),
        };
        reports.push(explain(
            &scorer,
            ex,
            candidate,
            &ctx.kg,
            &ctx.emb,
            stage.config.explain.top_pairs,
            stage.config.explain.top_paths,
        )?);
    }
    println!("{} explanations", reports.len());
    stage.write_jsonl("explanations.jsonl", &reports)?;
    stage.finish()
}

fn cmd_selfcheck(a: SelfcheckArgs) -> Result<i32> {
    let mut stage = Stage::start("selfcheck", &a.common, None)?;
    let report = selfcheck::run(stage.config.seed)?;
    let text = report.render();
    print!("{text}");
    fs::write(stage.path("selfcheck.txt"), &text).map_err(|e| Error::io(stage.path("selfcheck.txt"), e))?;
    stage.output("selfcheck.txt")?;
    let passed = report.passed();
    stage.finish()?;
    Ok(if passed { 0 } else { 1 })
}
