//! Command-line front end: `build-db`, `retrieve`, `propose` and the `eval`
//! family, plus config loading and mock/seed control.
//!
//! Exit codes: 0 success, 2 usage error, 3 provider error, 4 data error.
//! Failures print a single machine-parseable line to stderr:
//! `error: <category>: <message>`. All outputs are written atomically and
//! embed the effective configuration and template version hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::clustering::{cluster, representatives};
use crate::config::{load_config, ConfigError, RunConfig};
use crate::corpus::{write_atomic, CorpusDatabase, RawPaper, StoreError};
use crate::evaluation::{
    match_similarity, rank_ideas, recall_at_k, run_ablation, score_novelty, win_rate,
    EvalError, GeneratedIdea, JudgmentCache, ReferenceIdeas, TestCase, DEFAULT_RECALL_CUTOFFS,
};
use crate::extraction::{build_database, ExtractError};
use crate::ideas::Variant;
use crate::index::Indexes;
use crate::proposer::{propose, DigestConfig, ProposeError, ProposerConfig};
use crate::providers::{template_hashes, Gateway, ProviderError};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalError};

#[derive(Parser)]
#[command(name = "scipip", version, about = "Literature retrieval and idea proposal over a local paper corpus")]
struct Cli {
    /// Flat TOML config file; flags win over env vars, env vars over file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use deterministic mock providers (requires --seed).
    #[arg(long, global = true)]
    mock_providers: bool,
    /// Seed for mock providers and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for provider-bound stages.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// Judgment cache directory.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus database from line-delimited raw papers.
    BuildDb(BuildDbArgs),
    /// Run literature retrieval for a background text.
    Retrieve(RetrieveArgs),
    /// Propose refined research ideas for a background text.
    Propose(ProposeArgs),
    /// Evaluation harness.
    Eval(EvalArgs),
}

#[derive(Args)]
struct BuildDbArgs {
    /// Line-delimited JSON corpus: {id, title, abstract, introduction,
    /// method, references[], venue, year}.
    #[arg(long)]
    corpus: PathBuf,
    /// Output database directory.
    #[arg(long)]
    out: PathBuf,
    /// Embedding dimension recorded in the database.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args, Clone)]
struct RetrievalFlags {
    #[arg(long)]
    no_semantics: bool,
    #[arg(long)]
    no_entities: bool,
    #[arg(long)]
    no_cocite: bool,
    #[arg(long)]
    no_cluster: bool,
    /// Semantic neighbors kept (K).
    #[arg(long)]
    k: Option<usize>,
    /// Minimum shared papers for entity co-occurrence (m).
    #[arg(long)]
    m: Option<u32>,
    /// Rarest neighborhood entities kept (n).
    #[arg(long)]
    n: Option<usize>,
    /// Co-citation partners per retrieved paper.
    #[arg(long)]
    cocite_top: Option<usize>,
    /// Cosine threshold for leader clustering.
    #[arg(long)]
    cluster_threshold: Option<f64>,
    #[arg(long)]
    w_summary: Option<f64>,
    #[arg(long)]
    w_ideas: Option<f64>,
}

impl RetrievalFlags {
    fn apply(&self, config: &mut RunConfig) {
        if self.no_semantics {
            config.retrieval.use_semantics = false;
        }
        if self.no_entities {
            config.retrieval.use_entities = false;
        }
        if self.no_cocite {
            config.retrieval.use_cocitation = false;
        }
        if self.no_cluster {
            config.retrieval.use_clustering = false;
        }
        if let Some(k) = self.k {
            config.retrieval.k_semantic = k;
        }
        if let Some(m) = self.m {
            config.retrieval.min_co_papers = m;
        }
        if let Some(n) = self.n {
            config.retrieval.n_rare = n;
        }
        if let Some(c) = self.cocite_top {
            config.retrieval.co_cite_top = c;
        }
        if let Some(t) = self.cluster_threshold {
            config.cluster.threshold = t;
        }
        if let Some(w) = self.w_summary {
            config.cluster.w_summary = w;
        }
        if let Some(w) = self.w_ideas {
            config.cluster.w_ideas = w;
        }
    }
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    db: PathBuf,
    /// File holding the background text.
    #[arg(long)]
    background: PathBuf,
    /// Extra text files whose entities join the seed layer.
    #[arg(long)]
    extra: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: RetrievalFlags,
}

#[derive(Args)]
struct ProposeArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    background: PathBuf,
    /// Pipeline variant: A (direct), B (dual path), C (dual path feeding
    /// retrieval).
    #[arg(long)]
    variant: String,
    #[arg(long)]
    out: PathBuf,
    /// Digest character budget.
    #[arg(long)]
    digest_budget: Option<usize>,
    #[command(flatten)]
    flags: RetrievalFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[command(subcommand)]
    mode: EvalMode,
}

#[derive(Subcommand)]
enum EvalMode {
    /// Match generated ideas against a reference database (scores 0-5).
    Similarity {
        #[arg(long)]
        db: PathBuf,
        /// Ideas JSONL: {id, text[, bucket]}.
        #[arg(long)]
        ideas: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score idea novelty (0-10) over literature-search rounds.
    Novelty {
        #[arg(long)]
        ideas: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank 2 or 5 ideas, or run the bucketed win-rate protocol.
    Rank {
        #[arg(long)]
        ideas: PathBuf,
        /// Run this many win-rate rounds over bucketed ideas instead of a
        /// single ranking.
        #[arg(long)]
        win_rate_rounds: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recall-at-k against ground-truth citations.
    Recall {
        #[arg(long)]
        db: PathBuf,
        /// Test set JSONL: {id, background, ground_truth[]}.
        #[arg(long)]
        test_set: PathBuf,
        /// Comma-separated cutoffs (default 10,20,30,40,50).
        #[arg(long)]
        ks: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: RetrievalFlags,
    },
    /// One recall report per retrieval configuration row.
    Ablation {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        test_set: PathBuf,
        /// Grid TOML ([[row]] name/semantics/entities/cocitation/clustering);
        /// defaults to the six standard rows.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        ks: Option<String>,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
}

// ---------------------------------------------------------------------------
// error categories

#[derive(Debug)]
enum CliError {
    Usage(String),
    Provider(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Provider(_) => "provider",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Provider(m) | CliError::Data(m) => m,
        }
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        CliError::Provider(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Store(s) => CliError::Data(s.to_string()),
            ExtractError::AllPapersFailed(_) => CliError::Data(e.to_string()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::InvalidConfig(m) => CliError::Usage(m),
            RetrievalError::EmptyBackground => CliError::Data(e.to_string()),
            RetrievalError::Store(s) => CliError::Data(s.to_string()),
            RetrievalError::Provider(p) => p.into(),
            RetrievalError::Extract(x) => x.into(),
        }
    }
}

impl From<crate::clustering::ClusterError> for CliError {
    fn from(e: crate::clustering::ClusterError) -> Self {
        match e {
            crate::clustering::ClusterError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ProposeError> for CliError {
    fn from(e: ProposeError) -> Self {
        match e {
            ProposeError::Provider(p) => p.into(),
            ProposeError::Retrieval(r) => r.into(),
            ProposeError::Cluster(c) => c.into(),
            ProposeError::Parse(m) => CliError::Provider(format!("unparseable reply: {}", m)),
            ProposeError::Aborted { ref cause, .. } => {
                let category = match cause.root_cause() {
                    ProposeError::Provider(_) | ProposeError::Parse(_) => "provider",
                    ProposeError::Retrieval(RetrievalError::InvalidConfig(_)) => "usage",
                    ProposeError::Retrieval(RetrievalError::Store(_)) => "data",
                    ProposeError::Retrieval(_) => "provider",
                    _ => "data",
                };
                match category {
                    "provider" => CliError::Provider(e.to_string()),
                    "usage" => CliError::Usage(e.to_string()),
                    _ => CliError::Data(e.to_string()),
                }
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Provider(p) => p.into(),
            EvalError::Retrieval(r) => r.into(),
            EvalError::Cluster(c) => c.into(),
            EvalError::Parse(m) => CliError::Provider(format!("judge reply unparseable: {}", m)),
            EvalError::WrongArity(_) => CliError::Usage(e.to_string()),
            EvalError::EmptyReferences => CliError::Data(e.to_string()),
            EvalError::Io(io) => CliError::Data(io.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// entry points

/// Parses argv, runs the subcommand, and reports failures as one
/// machine-parseable stderr line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let env: BTreeMap<String, String> = std::env::vars().collect();
    let (mut config, warnings) = load_config(cli.config.as_deref(), &env)?;
    for warning in warnings {
        eprintln!("warning: {}", warning);
    }
    if cli.mock_providers {
        config.mock_providers = true;
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(parallel) = cli.parallel {
        config.parallelism = parallel;
    }
    if let Some(cache) = cli.cache {
        config.cache_dir = Some(cache);
    }
    if config.mock_providers && config.seed.is_none() {
        return Err(CliError::Usage(
            "--seed is mandatory when --mock-providers is enabled".into(),
        ));
    }

    match cli.command {
        Command::BuildDb(args) => cmd_build_db(config, args),
        Command::Retrieve(args) => cmd_retrieve(config, args),
        Command::Propose(args) => cmd_propose(config, args),
        Command::Eval(args) => cmd_eval(config, args.mode),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))
}

fn write_artifact(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("serialize artifact: {}", e)))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {}", path.display(), e)))?;
    Ok(())
}

/// Every JSON artifact carries the effective config and template hashes.
fn envelope(config: &RunConfig, fields: serde_json::Value) -> serde_json::Value {
    let mut value = json!({
        "config": config.effective(),
        "template_hashes": template_hashes(),
    });
    if let (Some(object), Some(extra)) = (value.as_object_mut(), fields.as_object()) {
        for (k, v) in extra {
            object.insert(k.clone(), v.clone());
        }
    }
    value
}

fn open_database(config: &mut RunConfig, db_dir: &Path) -> Result<(CorpusDatabase, Indexes), CliError> {
    let db = CorpusDatabase::load(db_dir)?;
    let indexes = Indexes::load_or_build(db_dir, &db)?;
    config.db_dir = Some(db_dir.to_path_buf());
    config.embedding_dim = db.embedding_dim();
    Ok((db, indexes))
}

fn gateway_for(config: &RunConfig) -> Result<Gateway, CliError> {
    Ok(config.gateway()?)
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_build_db(mut config: RunConfig, args: BuildDbArgs) -> Result<(), CliError> {
    if let Some(dim) = args.dim {
        config.embedding_dim = dim;
    }
    config.db_dir = Some(args.out.clone());
    let corpus = RawPaper::read_corpus(&args.corpus)?;
    let total = corpus.len();
    let gateway = gateway_for(&config)?;
    let (db, reports) = build_database(corpus, &gateway)?;
    db.save(&args.out)?;
    Indexes::build(&db).save(&args.out)?;

    let report = envelope(
        &config,
        json!({
            "papers_ingested": total,
            "papers_stored": db.len(),
            "reports": reports,
            "dangling_references": db.dangling_references(),
        }),
    );
    write_artifact(&args.out.join("build_report.json"), &report)?;
    println!(
        "build-db: stored {}/{} papers in {} ({} report(s))",
        db.len(),
        total,
        args.out.display(),
        reports.len()
    );
    Ok(())
}

fn cmd_retrieve(mut config: RunConfig, args: RetrieveArgs) -> Result<(), CliError> {
    args.flags.apply(&mut config);
    let (db, indexes) = open_database(&mut config, &args.db)?;
    let gateway = gateway_for(&config)?;
    let background = read_text(&args.background)?;
    let mut extra_texts = Vec::new();
    for path in &args.extra {
        extra_texts.push(read_text(path)?);
    }

    let result = retrieve(&gateway, &background, &extra_texts, &config.retrieval, &db, &indexes)?;
    let (clustering, reps) = if config.retrieval.use_clustering {
        let clustering = cluster(&result.union, &db, &config.cluster)?;
        let reps = representatives(&clustering);
        (Some(clustering), reps)
    } else {
        (None, result.union.iter().cloned().collect())
    };

    let artifact = envelope(
        &config,
        json!({
            "retrieval": result,
            "clustering": clustering,
            "representatives": reps,
        }),
    );
    write_artifact(&args.out, &artifact)?;
    println!(
        "retrieve: |N1|={} |N2|={} |N3|={} union={} representatives={} -> {}",
        result.n1.len(),
        result.n2.len(),
        result.n3.len(),
        result.union.len(),
        reps.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_propose(mut config: RunConfig, args: ProposeArgs) -> Result<(), CliError> {
    args.flags.apply(&mut config);
    if let Some(budget) = args.digest_budget {
        config.digest_budget = budget;
    }
    let variant: Variant = args.variant.parse().map_err(CliError::Usage)?;
    let (db, indexes) = open_database(&mut config, &args.db)?;
    let gateway = gateway_for(&config)?;
    let background = read_text(&args.background)?;

    let proposer_config = ProposerConfig {
        retrieval: config.retrieval.clone(),
        cluster: config.cluster,
        digest: DigestConfig { char_budget: config.digest_budget },
    };
    let outcome = match propose(&gateway, &db, &indexes, &background, variant, &proposer_config) {
        Ok(outcome) => outcome,
        // a failed run still emits the trace of every completed stage
        Err(e @ ProposeError::Aborted { .. }) => {
            if let ProposeError::Aborted { ref stage, ref completed_stages, ref cause } = e {
                let artifact = envelope(
                    &config,
                    json!({
                        "variant": variant,
                        "error": { "stage": stage, "message": cause.to_string() },
                        "completed_stages": completed_stages,
                    }),
                );
                write_artifact(&args.out, &artifact)?;
            }
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };

    let artifact = envelope(
        &config,
        json!({
            "variant": variant,
            "refined_ideas": outcome.refined,
            "trace": outcome.trace,
        }),
    );
    write_artifact(&args.out, &artifact)?;
    println!(
        "propose[{}]: {} refined idea(s), {} flag(s) -> {}",
        variant,
        outcome.refined.len(),
        outcome.trace.all_flags().len(),
        args.out.display()
    );
    Ok(())
}

/// Ideas JSONL record; `bucket` groups ideas for the win-rate protocol.
#[derive(Debug, Clone, Deserialize)]
struct IdeaRecord {
    id: String,
    text: String,
    #[serde(default)]
    bucket: Option<u8>,
}

fn read_ideas(path: &Path) -> Result<Vec<IdeaRecord>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: IdeaRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{} line {}: {}", path.display(), lineno + 1, e))
        })?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("{} holds no ideas", path.display())));
    }
    Ok(out)
}

fn cache_for(config: &RunConfig) -> Result<Option<JudgmentCache>, CliError> {
    match &config.cache_dir {
        Some(dir) => Ok(Some(JudgmentCache::new(dir).map_err(CliError::from)?)),
        None => Ok(None),
    }
}

fn parse_cutoffs(ks: Option<&str>) -> Result<Vec<usize>, CliError> {
    match ks {
        None => Ok(DEFAULT_RECALL_CUTOFFS.to_vec()),
        Some(text) => {
            let mut out = Vec::new();
            for part in text.split(',') {
                let k: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad cutoff {:?} in --ks", part)))?;
                if k == 0 {
                    return Err(CliError::Usage("cutoffs must be positive".into()));
                }
                out.push(k);
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
    }
}

fn score_histogram<I: Iterator<Item = u8>>(scores: I, max: u8) -> BTreeMap<u8, usize> {
    let mut histogram: BTreeMap<u8, usize> = (0..=max).map(|s| (s, 0)).collect();
    for score in scores {
        *histogram.entry(score).or_default() += 1;
    }
    histogram
}

fn cmd_eval(mut config: RunConfig, mode: EvalMode) -> Result<(), CliError> {
    match mode {
        EvalMode::Similarity { db, ideas, out } => {
            let (database, _) = open_database(&mut config, &db)?;
            let gateway = gateway_for(&config)?;
            let cache = cache_for(&config)?;
            let references = ReferenceIdeas::from_database(&database);
            let records = read_ideas(&ideas)?;
            let mut judgments = Vec::new();
            for record in &records {
                let idea = GeneratedIdea { id: record.id.clone(), text: record.text.clone() };
                judgments.push(match_similarity(&gateway, &idea, &references, cache.as_ref())?);
            }
            let histogram = score_histogram(judgments.iter().map(|j| j.score), 5);
            let artifact = envelope(
                &config,
                json!({ "judgments": judgments, "score_histogram": histogram }),
            );
            write_artifact(&out, &artifact)?;
            println!("eval similarity: {} judgment(s) -> {}", judgments.len(), out.display());
        }
        EvalMode::Novelty { ideas, rounds, out } => {
            let gateway = gateway_for(&config)?;
            let cache = cache_for(&config)?;
            let records = read_ideas(&ideas)?;
            let mut judgments = Vec::new();
            for record in &records {
                let idea = GeneratedIdea { id: record.id.clone(), text: record.text.clone() };
                judgments.push(score_novelty(&gateway, &idea, rounds, cache.as_ref())?);
            }
            let histogram = score_histogram(judgments.iter().map(|j| j.final_score), 10);
            let artifact = envelope(
                &config,
                json!({ "judgments": judgments, "score_histogram": histogram }),
            );
            write_artifact(&out, &artifact)?;
            println!("eval novelty: {} judgment(s) -> {}", judgments.len(), out.display());
        }
        EvalMode::Rank { ideas, win_rate_rounds, out } => {
            let gateway = gateway_for(&config)?;
            let cache = cache_for(&config)?;
            let records = read_ideas(&ideas)?;
            let artifact = match win_rate_rounds {
                Some(rounds) => {
                    let mut buckets: BTreeMap<u8, Vec<GeneratedIdea>> = BTreeMap::new();
                    for record in &records {
                        let bucket = record.bucket.ok_or_else(|| {
                            CliError::Usage(format!(
                                "idea {:?} lacks the bucket field required for win-rate rounds",
                                record.id
                            ))
                        })?;
                        buckets.entry(bucket).or_default().push(GeneratedIdea {
                            id: record.id.clone(),
                            text: record.text.clone(),
                        });
                    }
                    let seed = config.seed.unwrap_or(0);
                    let report = win_rate(&gateway, &buckets, rounds, seed, cache.as_ref())?;
                    envelope(&config, json!({ "win_rate": report }))
                }
                None => {
                    let list: Vec<GeneratedIdea> = records
                        .iter()
                        .map(|r| GeneratedIdea { id: r.id.clone(), text: r.text.clone() })
                        .collect();
                    let judgment = rank_ideas(&gateway, &list, cache.as_ref())?;
                    envelope(&config, json!({ "ranking": judgment }))
                }
            };
            write_artifact(&out, &artifact)?;
            println!("eval rank -> {}", out.display());
        }
        EvalMode::Recall { db, test_set, ks, out, flags } => {
            flags.apply(&mut config);
            let (database, indexes) = open_database(&mut config, &db)?;
            let gateway = gateway_for(&config)?;
            let cutoffs = parse_cutoffs(ks.as_deref())?;
            let cases = TestCase::parse_jsonl(&read_text(&test_set)?)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let report = recall_at_k(
                &gateway,
                &cases,
                &config.retrieval,
                &config.cluster,
                &database,
                &indexes,
                &cutoffs,
            )?;
            let artifact = envelope(&config, json!({ "recall": report }));
            write_artifact(&out, &artifact)?;
            let summary: Vec<String> =
                cutoffs.iter().map(|k| format!("R@{}={:.3}", k, report.recall[k])).collect();
            println!("eval recall: {} ({} excluded) -> {}", summary.join(" "), report.excluded.len(), out.display());
        }
        EvalMode::Ablation { db, test_set, grid, ks, out } => {
            let (database, indexes) = open_database(&mut config, &db)?;
            let gateway = gateway_for(&config)?;
            let cutoffs = parse_cutoffs(ks.as_deref())?;
            let cases = TestCase::parse_jsonl(&read_text(&test_set)?)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let rows = match grid {
                Some(path) => parse_grid(&read_text(&path)?)?,
                None => default_grid(&config.retrieval),
            };
            let table = run_ablation(
                &gateway,
                &rows,
                &cases,
                &config.cluster,
                &database,
                &indexes,
                &cutoffs,
            )?;
            let mut csv = String::new();
            csv.push_str(&format!(
                "# config: {}\n",
                serde_json::to_string(&config.effective()).unwrap_or_default()
            ));
            csv.push_str(&format!(
                "# templates: {}\n",
                crate::util::sha256_hex(&[serde_json::to_string(&template_hashes())
                    .unwrap_or_default()
                    .as_bytes()])
            ));
            csv.push_str(&table.render_csv());
            write_atomic(&out, csv.as_bytes())
                .map_err(|e| CliError::Data(format!("cannot write {}: {}", out.display(), e)))?;
            print!("{}", table.render_text());
            println!("eval ablation: {} row(s) -> {}", table.rows.len(), out.display());
        }
    }
    Ok(())
}

/// The six standard ablation rows; shared parameters come from the active
/// config.
pub fn default_grid_rows(base: &RetrievalConfig) -> Vec<(String, RetrievalConfig)> {
    let with = |semantics: bool, entities: bool, cocitation: bool, clustering: bool| RetrievalConfig {
        use_semantics: semantics,
        use_entities: entities,
        use_cocitation: cocitation,
        use_clustering: clustering,
        ..base.clone()
    };
    vec![
        ("semantics".into(), with(true, false, false, false)),
        ("entities".into(), with(false, true, false, false)),
        ("SE".into(), with(true, true, false, false)),
        ("SE+CC".into(), with(true, true, true, false)),
        ("SE+CL".into(), with(true, true, false, true)),
        ("SE+CC+CL".into(), with(true, true, true, true)),
    ]
}

fn default_grid(base: &RetrievalConfig) -> Vec<(String, RetrievalConfig)> {
    default_grid_rows(base)
}

fn parse_grid(text: &str) -> Result<Vec<(String, RetrievalConfig)>, CliError> {
    #[derive(Deserialize)]
    struct GridFile {
        row: Vec<GridRow>,
    }
    #[derive(Deserialize)]
    struct GridRow {
        name: String,
        #[serde(default = "default_true")]
        semantics: bool,
        #[serde(default = "default_true")]
        entities: bool,
        #[serde(default)]
        cocitation: bool,
        #[serde(default)]
        clustering: bool,
        k: Option<usize>,
        m: Option<u32>,
        n: Option<usize>,
        cocite_top: Option<usize>,
    }
    fn default_true() -> bool {
        true
    }
    let grid: GridFile =
        toml::from_str(text).map_err(|e| CliError::Usage(format!("grid file: {}", e)))?;
    if grid.row.is_empty() {
        return Err(CliError::Usage("grid file has no [[row]] entries".into()));
    }
    Ok(grid
        .row
        .into_iter()
        .map(|row| {
            let mut config = RetrievalConfig {
                use_semantics: row.semantics,
                use_entities: row.entities,
                use_cocitation: row.cocitation,
                use_clustering: row.clustering,
                ..Default::default()
            };
            if let Some(k) = row.k {
                config.k_semantic = k;
            }
            if let Some(m) = row.m {
                config.min_co_papers = m;
            }
            if let Some(n) = row.n {
                config.n_rare = n;
            }
            if let Some(c) = row.cocite_top {
                config.co_cite_top = c;
            }
            (row.name, config)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_the_standard_rows() {
        let rows = default_grid_rows(&RetrievalConfig::default());
        let names: Vec<&str> = rows.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["semantics", "entities", "SE", "SE+CC", "SE+CL", "SE+CC+CL"]);
        for (_, config) in &rows {
            assert!(config.validate().is_ok());
        }
    }

    #[test]
    fn grid_file_parses_rows_in_order() {
        let text = r#"
[[row]]
name = "just-semantics"
semantics = true
entities = false

[[row]]
name = "tuned"
cocitation = true
k = 7
"#;
        let rows = parse_grid(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "just-semantics");
        assert!(!rows[0].1.use_entities);
        assert_eq!(rows[1].1.k_semantic, 7);
        assert!(rows[1].1.use_cocitation);
        assert!(parse_grid("nope = 1").is_err());
    }

    #[test]
    fn cutoffs_parse_sorted_and_deduped() {
        assert_eq!(parse_cutoffs(None).unwrap(), vec![10, 20, 30, 40, 50]);
        assert_eq!(parse_cutoffs(Some("5, 10,5")).unwrap(), vec![5, 10]);
        assert!(parse_cutoffs(Some("0")).is_err());
        assert!(parse_cutoffs(Some("x")).is_err());
    }
}
