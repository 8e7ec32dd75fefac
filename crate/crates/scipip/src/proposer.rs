//! Staged idea proposal on top of retrieval.
//!
//! Variant A goes background → retrieve → digest → problem → initial ideas
//! → filter → refine. Variant B adds an independent brainstorming path whose
//! output merges with the initial ideas before filtering. Variant C
//! additionally feeds the brainstorm text into retrieval, where its entities
//! join the seed layer.
//!
//! Every chat exchange is recorded in the trace; cardinality misses flag the
//! affected idea set instead of failing the run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{cluster, representatives, ClusterConfig, ClusterError, Clustering};
use crate::corpus::CorpusDatabase;
use crate::ideas::{format_idea_list, parse_idea_entries, Idea, IdeaSet, Stage, Variant};
use crate::index::Indexes;
use crate::providers::{bindings, Gateway, ProviderError};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalError, RetrievalResult};

#[derive(Debug, Error)]
pub enum ProposeError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("unparseable reply: {0}")]
    Parse(String),
    #[error("related-papers digest needs at least one paper")]
    EmptyDigest,
    #[error("stage input is empty: {0}")]
    EmptyStageInput(String),
    /// A pipeline stage failed; the exchanges of every completed stage ride
    /// along so callers can still emit a partial trace.
    #[error("proposal aborted at stage {stage}: {cause}")]
    Aborted {
        stage: String,
        completed_stages: Vec<StageTrace>,
        #[source]
        cause: Box<ProposeError>,
    },
}

impl ProposeError {
    /// The underlying failure, unwrapping any abort wrapper.
    pub fn root_cause(&self) -> &ProposeError {
        match self {
            ProposeError::Aborted { cause, .. } => cause.root_cause(),
            other => other,
        }
    }
}

/// The problem statement distilled from the background and the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemStatement {
    pub problem: String,
    pub rationales: String,
}

impl ProblemStatement {
    /// Renders back into the response format it was parsed from; this is the
    /// text bound to downstream `{problem}` slots.
    pub fn to_prompt_text(&self) -> String {
        format!(
            "**Research Problem**: {}\n\n- **Rationales**: {}",
            self.problem, self.rationales
        )
    }

    pub fn parse(reply: &str) -> Result<Self, ProposeError> {
        let problem_at = reply
            .find("**Research Problem**")
            .ok_or_else(|| ProposeError::Parse("reply missing \"**Research Problem**\"".into()))?;
        let rationales_at = reply
            .find("**Rationales**")
            .ok_or_else(|| ProposeError::Parse("reply missing \"**Rationales**\"".into()))?;
        if rationales_at < problem_at {
            return Err(ProposeError::Parse("rationales precede the problem".into()));
        }
        let problem = reply[problem_at + "**Research Problem**".len()..rationales_at]
            .trim_matches(|c: char| c == ':' || c == '-' || c.is_whitespace())
            .to_string();
        let rationales = reply[rationales_at + "**Rationales**".len()..]
            .trim_matches(|c: char| c == ':' || c.is_whitespace())
            .to_string();
        if problem.is_empty() || rationales.is_empty() {
            return Err(ProposeError::Parse("empty problem or rationales".into()));
        }
        Ok(Self { problem, rationales })
    }
}

/// One recorded chat exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    pub template: String,
    pub prompt: String,
    pub reply: String,
}

/// Everything a proposal run did, for auditability and the variant
/// contracts: A never brainstorms, B's brainstorm stays out of retrieval,
/// C's brainstorm entities reach the retrieval seed layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalTrace {
    pub variant: Variant,
    pub stages: Vec<StageTrace>,
    pub retrieval: RetrievalResult,
    pub clustering: Option<Clustering>,
    /// Digest inclusion order.
    pub representatives: Vec<String>,
    pub digest_paper_ids: Vec<String>,
    pub problem: ProblemStatement,
    /// Every idea set produced, in stage order.
    pub sets: Vec<IdeaSet>,
}

impl ProposalTrace {
    pub fn set(&self, stage: Stage) -> Option<&IdeaSet> {
        self.sets.iter().find(|s| s.stage == stage)
    }

    pub fn all_flags(&self) -> Vec<String> {
        let mut flags: Vec<String> = self.retrieval.expanded.flags.clone();
        for set in &self.sets {
            flags.extend(set.flags.iter().cloned());
        }
        flags
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalOutcome {
    pub refined: IdeaSet,
    pub trace: ProposalTrace,
}

/// Digest sizing: whole papers only, never truncated mid-paper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigestConfig {
    pub char_budget: usize,
}

impl Default for DigestConfig {
    fn default() -> Self {
        Self { char_budget: 24_000 }
    }
}

/// Formats the representatives' summaries, backgrounds and ideas into the
/// `related_papers_information` slot. Papers are added in representatives
/// order while the budget lasts; the first paper is always included.
pub fn build_digest(
    db: &CorpusDatabase,
    representative_ids: &[String],
    config: &DigestConfig,
) -> Result<(String, Vec<String>), ProposeError> {
    let mut digest = String::new();
    let mut included = Vec::new();
    for (k, id) in representative_ids.iter().enumerate() {
        let Some(paper) = db.get_paper(id) else { continue };
        let block = format!(
            "**Paper {}**: {}\n- Summary: {}\n- Background: {}\n- Main Ideas: {}\n- Detailed Ideas: {}\n",
            k + 1,
            paper.title,
            paper.summary,
            paper.background,
            paper.main_ideas,
            paper.detailed_ideas,
        );
        if !included.is_empty() && digest.len() + block.len() + 1 > config.char_budget {
            break;
        }
        if !digest.is_empty() {
            digest.push('\n');
        }
        digest.push_str(&block);
        included.push(id.clone());
    }
    if included.is_empty() {
        return Err(ProposeError::EmptyDigest);
    }
    Ok((digest, included))
}

/// Distills the core problem and its rationales from the background and the
/// related-papers digest. One retry on an unparseable reply.
pub fn summarize_problem(
    gateway: &Gateway,
    background: &str,
    digest: &str,
) -> Result<(ProblemStatement, StageTrace), ProposeError> {
    if digest.trim().is_empty() {
        return Err(ProposeError::EmptyDigest);
    }
    let binds = bindings(&[("background", background), ("related_papers_information", digest)]);
    let mut last_err = None;
    for _ in 0..2 {
        let request = gateway.build_request("problem_generation", &binds, &[])?;
        let reply = gateway.chat(&request)?;
        match ProblemStatement::parse(&reply.text) {
            Ok(problem) => {
                let trace = StageTrace {
                    stage: "problem".into(),
                    template: "problem_generation".into(),
                    prompt: request.messages.last().unwrap().content.clone(),
                    reply: reply.text,
                };
                return Ok((problem, trace));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("retry loop ran"))
}

fn idea_list_stage(
    gateway: &Gateway,
    stage: Stage,
    stage_name: &str,
    template: &str,
    binds: &std::collections::BTreeMap<String, String>,
    require_details: bool,
) -> Result<(IdeaSet, StageTrace), ProposeError> {
    let mut last: Option<(Vec<Idea>, String, String)> = None;
    let mut last_err: Option<ProposeError> = None;
    for _ in 0..2 {
        let request = gateway.build_request(template, binds, &[])?;
        let reply = gateway.chat(&request)?;
        let prompt = request.messages.last().unwrap().content.clone();
        match parse_idea_entries(&reply.text, require_details) {
            Ok(ideas) => {
                let in_band = stage
                    .band()
                    .map(|(lo, hi)| (lo..=hi).contains(&ideas.len()))
                    .unwrap_or(true);
                last = Some((ideas, prompt, reply.text));
                last_err = None;
                if in_band {
                    break;
                }
            }
            Err(e) => last_err = Some(ProposeError::Parse(e.to_string())),
        }
    }
    if let Some(err) = last_err {
        return Err(err);
    }
    let (ideas, prompt, reply) = last.expect("either ideas or error");
    let mut set = IdeaSet::new(stage, ideas);
    set.flag_band_miss();
    let trace = StageTrace {
        stage: stage_name.into(),
        template: template.into(),
        prompt,
        reply,
    };
    Ok((set, trace))
}

/// Generates the initial idea list (about 10 entries; 8–12 accepted, out of
/// band flagged after one retry).
pub fn generate_initial_ideas(
    gateway: &Gateway,
    problem: &ProblemStatement,
    digest: &str,
) -> Result<(IdeaSet, StageTrace), ProposeError> {
    let problem_text = problem.to_prompt_text();
    let binds = bindings(&[
        ("problem", problem_text.as_str()),
        ("related_papers_information", digest),
    ]);
    idea_list_stage(gateway, Stage::Initial, "initial", "initial_idea_generation", &binds, false)
}

/// Free-form brainstorming over the background alone (4–6 entries).
pub fn brainstorm(
    gateway: &Gateway,
    background: &str,
) -> Result<(IdeaSet, StageTrace), ProposeError> {
    if background.trim().is_empty() {
        return Err(ProposeError::EmptyStageInput("brainstorm background".into()));
    }
    let binds = bindings(&[("background", background)]);
    idea_list_stage(gateway, Stage::Brainstormed, "brainstorm", "brainstorming", &binds, false)
}

/// Concatenates idea sets in input order and drops exact title duplicates,
/// keeping the first occurrence.
pub fn merge(sets: &[&IdeaSet]) -> Result<IdeaSet, ProposeError> {
    if sets.is_empty() {
        return Err(ProposeError::EmptyStageInput("merge".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut ideas = Vec::new();
    let mut sources = Vec::new();
    for set in sets {
        sources.push(set.stage.label().to_string());
        for idea in &set.ideas {
            if seen.insert(idea.title_key()) {
                ideas.push(idea.clone());
            }
        }
    }
    let mut merged = IdeaSet::new(Stage::Merged, ideas);
    merged.lineage.sources = sources;
    Ok(merged)
}

/// Selects 5–6 ideas that best fit the background. The model may only pick,
/// never rewrite: replies are matched back to the merged entries by
/// normalized title; unmatched entries are retried once, then dropped with
/// a flag, and the kept ideas are the original texts.
pub fn filter_ideas(
    gateway: &Gateway,
    merged: &IdeaSet,
    background: &str,
) -> Result<(IdeaSet, StageTrace), ProposeError> {
    if merged.is_empty() {
        return Err(ProposeError::EmptyStageInput("filter over empty merged set".into()));
    }
    let idea_block = format_idea_list(&merged.ideas, true);
    let binds = bindings(&[("idea", idea_block.as_str()), ("background", background)]);

    let mut best: Option<(Vec<Idea>, usize, String, String)> = None;
    for _ in 0..2 {
        let request = gateway.build_request("idea_filtering", &binds, &[])?;
        let reply = gateway.chat(&request)?;
        let prompt = request.messages.last().unwrap().content.clone();
        let parsed = match parse_idea_entries(&reply.text, false) {
            Ok(entries) => entries,
            Err(_) => {
                best.get_or_insert((Vec::new(), usize::MAX, prompt, reply.text));
                continue;
            }
        };
        let mut kept = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut unmatched = 0usize;
        for entry in &parsed {
            match merged.ideas.iter().find(|m| m.title_key() == entry.title_key()) {
                Some(original) => {
                    if seen.insert(original.title_key()) {
                        kept.push(original.clone());
                    }
                }
                None => unmatched += 1,
            }
        }
        let candidate = (kept, unmatched, prompt, reply.text);
        let better = match &best {
            Some((_, best_unmatched, _, _)) => candidate.1 < *best_unmatched,
            None => true,
        };
        if better {
            best = Some(candidate);
        }
        if best.as_ref().map(|(_, u, _, _)| *u == 0).unwrap_or(false) {
            break;
        }
    }

    let (kept, unmatched, prompt, reply) = best.expect("at least one attempt recorded");
    let mut set = IdeaSet::new(Stage::Filtered, kept);
    set.lineage.sources = vec![Stage::Merged.label().to_string()];
    if unmatched > 0 && unmatched != usize::MAX {
        set.flags.push(format!(
            "filter reply invented {} entries not present in the merged set (dropped)",
            unmatched
        ));
    }
    if unmatched == usize::MAX {
        set.flags.push("filter reply had no parseable idea entries".into());
    }
    set.flag_band_miss();
    let trace = StageTrace {
        stage: "filter".into(),
        template: "idea_filtering".into(),
        prompt,
        reply,
    };
    Ok((set, trace))
}

/// Refines the filtered ideas into 2–4 detailed entries. Entries must carry
/// an explicit details block; a reply without one is a parse error after
/// the retry.
pub fn refine_ideas(
    gateway: &Gateway,
    filtered: &IdeaSet,
    background: &str,
) -> Result<(IdeaSet, StageTrace), ProposeError> {
    if filtered.is_empty() {
        return Err(ProposeError::EmptyStageInput("refine over empty filtered set".into()));
    }
    let idea_block = format_idea_list(&filtered.ideas, true);
    let binds = bindings(&[("background", background), ("idea", idea_block.as_str())]);
    let (mut set, trace) =
        idea_list_stage(gateway, Stage::Refined, "refine", "idea_improvement", &binds, true)?;
    set.lineage.sources = vec![Stage::Filtered.label().to_string()];
    Ok((set, trace))
}

/// Pipeline-level knobs bundled for [`propose`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProposerConfig {
    pub retrieval: RetrievalConfig,
    pub cluster: ClusterConfig,
    pub digest: DigestConfig,
}

/// Runs one proposal pipeline end to end and returns the refined ideas with
/// the full stage trace. On a stage failure the error carries the
/// exchanges of every stage that did complete.
pub fn propose(
    gateway: &Gateway,
    db: &CorpusDatabase,
    indexes: &Indexes,
    background: &str,
    variant: Variant,
    config: &ProposerConfig,
) -> Result<ProposalOutcome, ProposeError> {
    let mut stages: Vec<StageTrace> = Vec::new();
    let mut sets: Vec<IdeaSet> = Vec::new();

    macro_rules! stage_try {
        ($stage:expr, $result:expr) => {
            match $result {
                Ok(value) => value,
                Err(e) => {
                    return Err(ProposeError::Aborted {
                        stage: $stage.to_string(),
                        completed_stages: stages,
                        cause: Box::new(e.into()),
                    })
                }
            }
        };
    }

    // brainstorm first for the variants that use it; only C routes its text
    // into retrieval
    let mut brainstormed: Option<IdeaSet> = None;
    let mut brainstorm_text: Option<String> = None;
    if matches!(variant, Variant::B | Variant::C) {
        let (mut set, trace) = stage_try!("brainstorm", brainstorm(gateway, background));
        set.lineage.variant = Some(variant);
        brainstorm_text = Some(trace.reply.clone());
        stages.push(trace);
        brainstormed = Some(set);
    }

    let extra_texts: Vec<String> = match (variant, &brainstorm_text) {
        (Variant::C, Some(text)) => vec![text.clone()],
        _ => Vec::new(),
    };
    let retrieval = stage_try!(
        "retrieval",
        retrieve(gateway, background, &extra_texts, &config.retrieval, db, indexes)
    );

    let (clustering, reps) = if config.retrieval.use_clustering {
        let clustering = stage_try!("clustering", cluster(&retrieval.union, db, &config.cluster));
        let reps = representatives(&clustering);
        (Some(clustering), reps)
    } else {
        (None, retrieval.union.iter().cloned().collect())
    };

    let (digest, digest_paper_ids) =
        stage_try!("digest", build_digest(db, &reps, &config.digest));

    let (problem, trace) = stage_try!("problem", summarize_problem(gateway, background, &digest));
    stages.push(trace);

    let (mut initial, trace) =
        stage_try!("initial", generate_initial_ideas(gateway, &problem, &digest));
    initial.lineage.variant = Some(variant);
    stages.push(trace);

    let merge_result = match &brainstormed {
        Some(brainstormed_set) => merge(&[&initial, brainstormed_set]),
        None => merge(&[&initial]),
    };
    let merged = stage_try!("merge", merge_result);

    let (mut filtered, trace) =
        stage_try!("filter", filter_ideas(gateway, &merged, background));
    filtered.lineage.variant = Some(variant);
    stages.push(trace);

    let (mut refined, trace) =
        stage_try!("refine", refine_ideas(gateway, &filtered, background));
    refined.lineage.variant = Some(variant);
    stages.push(trace);

    if let Some(set) = brainstormed {
        sets.push(set);
    }
    sets.push(initial);
    sets.push(merged);
    sets.push(filtered);
    sets.push(refined.clone());

    Ok(ProposalOutcome {
        refined,
        trace: ProposalTrace {
            variant,
            stages,
            retrieval,
            clustering,
            representatives: reps,
            digest_paper_ids,
            problem,
            sets,
        },
    })
}
