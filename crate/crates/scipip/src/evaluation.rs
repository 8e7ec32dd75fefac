//! The evaluation harness: retrospective idea matching (similarity 0–5),
//! novelty scoring (0–10) over literature-search rounds, pairwise and
//! five-way ranking with win-rate aggregation, and recall-at-k for
//! retrieval with cluster-aware matching plus its ablation runner.
//!
//! Judge replies are cached on disk keyed by template version and bindings,
//! so re-running aggregation never re-issues provider calls.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{cluster, ClusterConfig, ClusterError, Clustering};
use crate::corpus::CorpusDatabase;
use crate::index::Indexes;
use crate::providers::{bindings, template, Gateway, LitSearchHit, ProviderError};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalError, RetrievalResult};
use crate::util::sha256_hex;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("judge reply unparseable: {0}")]
    Parse(String),
    #[error("reference idea store is empty")]
    EmptyReferences,
    #[error("rank_ideas needs exactly 2 or 5 ideas, got {0}")]
    WrongArity(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An idea under evaluation, as read from the ideas JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedIdea {
    pub id: String,
    pub text: String,
}

/// A recorded judge exchange (template, rendered prompt, raw reply).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeExchange {
    pub template: String,
    pub prompt: String,
    pub reply: String,
}

// ---------------------------------------------------------------------------
// judgment cache

/// Disk cache keyed by (template version hash, bindings). Hits bypass the
/// provider entirely.
pub struct JudgmentCache {
    dir: PathBuf,
}

impl JudgmentCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn key(template_hash: &str, binds: &BTreeMap<String, String>) -> String {
        let mut parts: Vec<&[u8]> = vec![template_hash.as_bytes()];
        for (k, v) in binds {
            parts.push(k.as_bytes());
            parts.push(v.as_bytes());
        }
        sha256_hex(&parts)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{}.json", key))
    }

    pub fn get(&self, template_hash: &str, binds: &BTreeMap<String, String>) -> Option<String> {
        let path = self.path(&Self::key(template_hash, binds));
        let text = std::fs::read_to_string(path).ok()?;
        let value: serde_json::Value = serde_json::from_str(&text).ok()?;
        value.get("reply")?.as_str().map(|s| s.to_string())
    }

    pub fn put(
        &self,
        template_name: &str,
        template_hash: &str,
        binds: &BTreeMap<String, String>,
        reply: &str,
    ) -> Result<(), EvalError> {
        let key = Self::key(template_hash, binds);
        let payload = serde_json::json!({
            "template": template_name,
            "template_hash": template_hash,
            "reply": reply,
        });
        crate::corpus::write_atomic(&self.path(&key), payload.to_string().as_bytes())?;
        Ok(())
    }
}

/// Renders + sends a judge call, consulting the cache first.
fn judged_chat(
    gateway: &Gateway,
    cache: Option<&JudgmentCache>,
    template_name: &str,
    binds: &BTreeMap<String, String>,
) -> Result<(String, JudgeExchange), EvalError> {
    let tpl = template(template_name)?;
    let hash = tpl.version_hash();
    let prompt = tpl.render(binds)?;
    if let Some(cache) = cache {
        if let Some(reply) = cache.get(&hash, binds) {
            return Ok((
                reply.clone(),
                JudgeExchange { template: template_name.into(), prompt, reply },
            ));
        }
    }
    let response = gateway.chat_template(template_name, binds)?;
    if let Some(cache) = cache {
        cache.put(template_name, &hash, binds, &response.text)?;
    }
    Ok((
        response.text.clone(),
        JudgeExchange { template: template_name.into(), prompt, reply: response.text },
    ))
}

// ---------------------------------------------------------------------------
// reply parsers

/// A reply that is exactly one integer in `[min, max]`. Anything else —
/// prose, out-of-range values, multiple tokens — is rejected.
pub fn parse_bare_integer(reply: &str, min: i64, max: i64) -> Result<i64, EvalError> {
    let trimmed = reply.trim();
    let value: i64 = trimmed
        .parse()
        .map_err(|_| EvalError::Parse(format!("expected a bare integer, got {:?}", head(reply))))?;
    if value < min || value > max {
        return Err(EvalError::Parse(format!(
            "integer {} outside [{}, {}]",
            value, min, max
        )));
    }
    Ok(value)
}

/// Extracts the JSON object from a THOUGHT/RESPONSE reply: the fenced
/// ```json block when present, otherwise the first balanced object.
pub fn parse_json_block(reply: &str) -> Result<serde_json::Value, EvalError> {
    let candidate = if let Some(fence) = reply.find("```json") {
        let rest = &reply[fence + "```json".len()..];
        match rest.find("```") {
            Some(end) => rest[..end].trim().to_string(),
            None => rest.trim().to_string(),
        }
    } else {
        let start = reply
            .find('{')
            .ok_or_else(|| EvalError::Parse("no JSON object in reply".into()))?;
        let mut depth = 0usize;
        let mut end = None;
        for (i, c) in reply[start..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(start + i + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| EvalError::Parse("unbalanced JSON object".into()))?;
        reply[start..end].to_string()
    };
    serde_json::from_str(&candidate)
        .map_err(|e| EvalError::Parse(format!("invalid JSON: {} in {:?}", e, head(&candidate))))
}

/// Parses one novelty round: the JSON must contain both "Query" (a string,
/// possibly empty) and "Novelty Score" (an integer in 0..=10).
pub fn parse_novelty_reply(reply: &str) -> Result<(String, u8), EvalError> {
    let value = parse_json_block(reply)?;
    let query = value
        .get("Query")
        .and_then(|q| q.as_str())
        .ok_or_else(|| EvalError::Parse("JSON missing \"Query\"".into()))?
        .to_string();
    let score = value
        .get("Novelty Score")
        .and_then(|s| s.as_i64())
        .ok_or_else(|| EvalError::Parse("JSON missing integer \"Novelty Score\"".into()))?;
    if !(0..=10).contains(&score) {
        return Err(EvalError::Parse(format!("novelty score {} outside 0..=10", score)));
    }
    Ok((query, score as u8))
}

const RANK_CRITERIA: [&str; 4] = ["Clarity", "Novelty", "Feasibility", "Generalizability"];

/// Per-criterion winner choices keyed by lowercase criterion name.
pub type CriterionChoices = BTreeMap<String, u8>;
/// Per-criterion orders (input indices, best first).
pub type CriterionOrders = BTreeMap<String, Vec<u8>>;

/// Parses the two-way comparison JSON: every criterion plus "summary" must
/// be 1 or 2.
pub fn parse_two_way_reply(reply: &str) -> Result<(CriterionChoices, u8), EvalError> {
    let value = parse_json_block(reply)?;
    let mut fields = BTreeMap::new();
    for criterion in RANK_CRITERIA {
        let choice = value
            .get(criterion)
            .and_then(|v| v.as_i64())
            .ok_or_else(|| EvalError::Parse(format!("JSON missing {:?}", criterion)))?;
        if !(1..=2).contains(&choice) {
            return Err(EvalError::Parse(format!("{} choice {} not in {{1,2}}", criterion, choice)));
        }
        fields.insert(criterion.to_lowercase(), choice as u8);
    }
    let summary = value
        .get("summary")
        .and_then(|v| v.as_i64())
        .ok_or_else(|| EvalError::Parse("JSON missing \"summary\"".into()))?;
    if !(1..=2).contains(&summary) {
        return Err(EvalError::Parse(format!("summary choice {} not in {{1,2}}", summary)));
    }
    Ok((fields, summary as u8))
}

fn parse_permutation(value: &serde_json::Value, len: usize) -> Result<Vec<u8>, EvalError> {
    let array = value
        .as_array()
        .ok_or_else(|| EvalError::Parse("expected a JSON array".into()))?;
    let order: Vec<u8> = array
        .iter()
        .map(|v| v.as_i64().and_then(|x| u8::try_from(x).ok()))
        .collect::<Option<Vec<u8>>>()
        .ok_or_else(|| EvalError::Parse("array holds non-integers".into()))?;
    let sorted: BTreeSet<u8> = order.iter().copied().collect();
    let expected: BTreeSet<u8> = (1..=len as u8).collect();
    if order.len() != len || sorted != expected {
        return Err(EvalError::Parse(format!(
            "{:?} is not a permutation of 1..={}",
            order, len
        )));
    }
    Ok(order)
}

/// Parses the five-way comparison JSON: each criterion and the overall
/// ranking must be a permutation of 1..=5, best first.
pub fn parse_five_way_reply(reply: &str) -> Result<(CriterionOrders, Vec<u8>), EvalError> {
    let value = parse_json_block(reply)?;
    let mut fields = BTreeMap::new();
    for criterion in RANK_CRITERIA {
        let order = value
            .get(criterion)
            .ok_or_else(|| EvalError::Parse(format!("JSON missing {:?}", criterion)))?;
        fields.insert(criterion.to_lowercase(), parse_permutation(order, 5)?);
    }
    let overall = value
        .get("Overall Ranking")
        .ok_or_else(|| EvalError::Parse("JSON missing \"Overall Ranking\"".into()))?;
    Ok((fields, parse_permutation(overall, 5)?))
}

// ---------------------------------------------------------------------------
// similarity

/// A reference idea with its embedding, usually one per corpus paper.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIdea {
    pub id: String,
    pub text: String,
    pub embedding: Vec<f32>,
}

/// The reference idea store for retrospective matching.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceIdeas {
    pub items: Vec<ReferenceIdea>,
}

impl ReferenceIdeas {
    /// One reference idea per paper: detailed ideas when present, otherwise
    /// the main ideas, paired with the stored main-ideas embedding.
    pub fn from_database(db: &CorpusDatabase) -> Self {
        let items = db
            .papers()
            .map(|p| ReferenceIdea {
                id: p.id.clone(),
                text: if p.detailed_ideas.trim().is_empty() {
                    p.main_ideas.clone()
                } else {
                    p.detailed_ideas.clone()
                },
                embedding: p.emb_main_ideas.clone(),
            })
            .collect();
        Self { items }
    }

    /// Top `k` by cosine, descending, ties by ascending id.
    pub fn topk(&self, query: &[f32], k: usize) -> Vec<&ReferenceIdea> {
        let mut scored: Vec<(f32, &ReferenceIdea)> = self
            .items
            .iter()
            .map(|r| {
                let sim: f32 = r.embedding.iter().zip(query).map(|(a, b)| a * b).sum();
                (sim, r)
            })
            .collect();
        scored.sort_by(|(sa, ra), (sb, rb)| sb.total_cmp(sa).then(ra.id.cmp(&rb.id)));
        scored.into_iter().take(k).map(|(_, r)| r).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityJudgment {
    pub generated_id: String,
    pub matched_reference_id: String,
    /// 0–5 per the scoring rubric.
    pub score: u8,
    pub transcript: Vec<JudgeExchange>,
}

/// Retrospective matching: embed the idea, shortlist the ten most similar
/// reference ideas by cosine, ask the judge to pick the closest, then score
/// that pair 0–5. Each judge step retries once on an unparseable reply.
pub fn match_similarity(
    gateway: &Gateway,
    idea: &GeneratedIdea,
    references: &ReferenceIdeas,
    cache: Option<&JudgmentCache>,
) -> Result<SimilarityJudgment, EvalError> {
    if references.items.is_empty() {
        return Err(EvalError::EmptyReferences);
    }
    let query = gateway.embed(&idea.text)?;
    let shortlist = references.topk(&query, 10);

    let numbered: Vec<String> = shortlist
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}. {}", i + 1, r.text))
        .collect();
    let reference_block = numbered.join("\n\n");
    let select_binds =
        bindings(&[("idea", idea.text.as_str()), ("reference_ideas", reference_block.as_str())]);

    let mut transcript = Vec::new();
    let mut selected = None;
    for attempt in 0..2 {
        let (reply, exchange) =
            judged_chat(gateway, cache, "most_similar_selection", &select_binds)?;
        transcript.push(exchange);
        match parse_bare_integer(&reply, 1, shortlist.len() as i64) {
            Ok(choice) => {
                selected = Some(&shortlist[(choice - 1) as usize]);
                break;
            }
            Err(e) if attempt == 1 => return Err(e),
            Err(_) => {}
        }
    }
    let selected = selected.expect("loop either selected or returned");

    let score_binds =
        bindings(&[("idea", idea.text.as_str()), ("reference_idea", selected.text.as_str())]);
    for attempt in 0..2 {
        let (reply, exchange) = judged_chat(gateway, cache, "similarity_scoring", &score_binds)?;
        transcript.push(exchange);
        match parse_bare_integer(&reply, 0, 5) {
            Ok(score) => {
                return Ok(SimilarityJudgment {
                    generated_id: idea.id.clone(),
                    matched_reference_id: selected.id.clone(),
                    score: score as u8,
                    transcript,
                });
            }
            Err(e) if attempt == 1 => return Err(e),
            Err(_) => {}
        }
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// novelty

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyRound {
    pub query: String,
    pub hits: Vec<LitSearchHit>,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyJudgment {
    pub idea_id: String,
    pub rounds: Vec<NoveltyRound>,
    /// 0–10; the last round's score.
    pub final_score: u8,
}

/// Renders search hits into the `last_query_results` slot. Round t+1's
/// prompt receives this string verbatim.
pub fn format_search_hits(hits: &[LitSearchHit]) -> String {
    if hits.is_empty() {
        return "No relevant papers found.".into();
    }
    hits.iter()
        .map(|h| format!("Title: {}\nAbstract: {}", h.title, h.abstract_text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Iterative novelty scoring: each round the judge sees the previous
/// round's search results and answers with a JSON query plus a 0–10 score.
/// An empty query ends the loop early; the final round's score is the
/// verdict.
pub fn score_novelty(
    gateway: &Gateway,
    idea: &GeneratedIdea,
    num_rounds: u32,
    cache: Option<&JudgmentCache>,
) -> Result<NoveltyJudgment, EvalError> {
    let num_rounds = num_rounds.max(1);
    let mut rounds: Vec<NoveltyRound> = Vec::new();
    let mut last_results = String::new();
    for round in 1..=num_rounds {
        let round_str = round.to_string();
        let total_str = num_rounds.to_string();
        let binds = bindings(&[
            ("current_round", round_str.as_str()),
            ("num_rounds", total_str.as_str()),
            ("idea", idea.text.as_str()),
            ("last_query_results", last_results.as_str()),
        ]);
        let mut parsed = None;
        for attempt in 0..2 {
            let (reply, _) = judged_chat(gateway, cache, "novelty_scoring", &binds)?;
            match parse_novelty_reply(&reply) {
                Ok(qs) => {
                    parsed = Some(qs);
                    break;
                }
                Err(e) if attempt == 1 => return Err(e),
                Err(_) => {}
            }
        }
        let (query, score) = parsed.expect("loop either parsed or returned");

        if query.trim().is_empty() || round == num_rounds {
            rounds.push(NoveltyRound { query, hits: Vec::new(), score });
            break;
        }
        let hits = gateway.lit_search(&query)?;
        last_results = format_search_hits(&hits);
        rounds.push(NoveltyRound { query, hits, score });
    }
    let final_score = rounds.last().expect("at least one round").score;
    Ok(NoveltyJudgment { idea_id: idea.id.clone(), rounds, final_score })
}

// ---------------------------------------------------------------------------
// ranking and win rate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingJudgment {
    pub idea_ids: Vec<String>,
    /// Per criterion, the input indices (1-based) best first.
    pub criteria: BTreeMap<String, Vec<u8>>,
    pub overall: Vec<u8>,
    pub transcript: Vec<JudgeExchange>,
}

/// Comparative judging of exactly 2 or 5 ideas. Replies that are not valid
/// choices/permutations are retried once and then rejected.
pub fn rank_ideas(
    gateway: &Gateway,
    ideas: &[GeneratedIdea],
    cache: Option<&JudgmentCache>,
) -> Result<RankingJudgment, EvalError> {
    match ideas.len() {
        2 => {
            let binds = bindings(&[
                ("idea1", ideas[0].text.as_str()),
                ("idea2", ideas[1].text.as_str()),
            ]);
            let mut transcript = Vec::new();
            for attempt in 0..2 {
                let (reply, exchange) =
                    judged_chat(gateway, cache, "two_way_comparison", &binds)?;
                transcript.push(exchange);
                match parse_two_way_reply(&reply) {
                    Ok((fields, summary)) => {
                        let as_order = |winner: u8| -> Vec<u8> {
                            if winner == 1 { vec![1, 2] } else { vec![2, 1] }
                        };
                        return Ok(RankingJudgment {
                            idea_ids: ideas.iter().map(|i| i.id.clone()).collect(),
                            criteria: fields
                                .into_iter()
                                .map(|(k, winner)| (k, as_order(winner)))
                                .collect(),
                            overall: as_order(summary),
                            transcript,
                        });
                    }
                    Err(e) if attempt == 1 => return Err(e),
                    Err(_) => {}
                }
            }
            unreachable!()
        }
        5 => {
            let binds = bindings(&[
                ("idea1", ideas[0].text.as_str()),
                ("idea2", ideas[1].text.as_str()),
                ("idea3", ideas[2].text.as_str()),
                ("idea4", ideas[3].text.as_str()),
                ("idea5", ideas[4].text.as_str()),
            ]);
            let mut transcript = Vec::new();
            for attempt in 0..2 {
                let (reply, exchange) =
                    judged_chat(gateway, cache, "five_way_comparison", &binds)?;
                transcript.push(exchange);
                match parse_five_way_reply(&reply) {
                    Ok((criteria, overall)) => {
                        return Ok(RankingJudgment {
                            idea_ids: ideas.iter().map(|i| i.id.clone()).collect(),
                            criteria,
                            overall,
                            transcript,
                        });
                    }
                    Err(e) if attempt == 1 => return Err(e),
                    Err(_) => {}
                }
            }
            unreachable!()
        }
        n => Err(EvalError::WrongArity(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    /// Bucket → fraction of participated rounds ranked first overall.
    pub win_rate: BTreeMap<u8, f64>,
    pub rounds_participated: BTreeMap<u8, u32>,
    pub wins: BTreeMap<u8, u32>,
}

/// Win-rate protocol: each round samples one idea per non-empty similarity
/// bucket and asks for a ranking (five-way for 5 buckets, two-way for 2);
/// rounds with any other bucket count are skipped. The winner's bucket
/// scores a win; win rate is wins over participated rounds.
pub fn win_rate(
    gateway: &Gateway,
    buckets: &BTreeMap<u8, Vec<GeneratedIdea>>,
    rounds: u32,
    seed: u64,
    cache: Option<&JudgmentCache>,
) -> Result<WinRateReport, EvalError> {
    use rand::Rng;
    use rand::SeedableRng;

    let non_empty: Vec<(&u8, &Vec<GeneratedIdea>)> =
        buckets.iter().filter(|(_, ideas)| !ideas.is_empty()).collect();
    let mut report = WinRateReport {
        win_rate: BTreeMap::new(),
        rounds_participated: BTreeMap::new(),
        wins: BTreeMap::new(),
    };
    if !matches!(non_empty.len(), 2 | 5) {
        return Ok(report);
    }
    for round in 0..rounds {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::util::hash64(&[
            &seed.to_le_bytes(),
            &round.to_le_bytes(),
        ]));
        let sampled: Vec<(u8, GeneratedIdea)> = non_empty
            .iter()
            .map(|(bucket, ideas)| {
                let idea = ideas[rng.gen_range(0..ideas.len())].clone();
                (**bucket, idea)
            })
            .collect();
        let ideas: Vec<GeneratedIdea> = sampled.iter().map(|(_, i)| i.clone()).collect();
        let judgment = rank_ideas(gateway, &ideas, cache)?;
        let winner_bucket = sampled[(judgment.overall[0] - 1) as usize].0;
        for (bucket, _) in &sampled {
            *report.rounds_participated.entry(*bucket).or_default() += 1;
        }
        *report.wins.entry(winner_bucket).or_default() += 1;
    }
    for (bucket, participated) in &report.rounds_participated {
        let wins = report.wins.get(bucket).copied().unwrap_or(0);
        report.win_rate.insert(*bucket, wins as f64 / *participated as f64);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// recall at k

/// One retrospective test case: a background and the ground-truth citation
/// ids it should recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub background: String,
    pub ground_truth: Vec<String>,
}

impl TestCase {
    pub fn parse_jsonl(text: &str) -> Result<Vec<TestCase>, EvalError> {
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let case: TestCase = serde_json::from_str(line).map_err(|e| {
                EvalError::Parse(format!("test set line {}: {}", lineno + 1, e))
            })?;
            out.push(case);
        }
        Ok(out)
    }
}

/// A retrieved group in ranked order: the representative stands for the
/// members; any member counts for cluster-aware recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub representative: String,
    pub members: Vec<String>,
    /// Best semantic score among members, when the semantic channel saw any.
    pub semantic_score: Option<f32>,
}

/// Orders retrieved groups for top-k truncation: groups containing semantic
/// hits first, by descending best member score (ties by representative id),
/// then entity/co-citation-only groups by ascending representative id.
/// Without clustering every paper is its own group.
pub fn rank_retrieved_groups(
    result: &RetrievalResult,
    clustering: Option<&Clustering>,
) -> Vec<RankedGroup> {
    let mut groups: Vec<RankedGroup> = match clustering {
        Some(clustering) => clustering
            .clusters
            .iter()
            .map(|c| RankedGroup {
                representative: c.representative.clone(),
                members: c.members.clone(),
                semantic_score: c
                    .members
                    .iter()
                    .filter_map(|m| result.semantic_scores.get(m).copied())
                    .max_by(|a, b| a.total_cmp(b)),
            })
            .collect(),
        None => result
            .union
            .iter()
            .map(|id| RankedGroup {
                representative: id.clone(),
                members: vec![id.clone()],
                semantic_score: result.semantic_scores.get(id).copied(),
            })
            .collect(),
    };
    groups.sort_by(|a, b| match (&a.semantic_score, &b.semantic_score) {
        (Some(sa), Some(sb)) => sb.total_cmp(sa).then(a.representative.cmp(&b.representative)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.representative.cmp(&b.representative),
    });
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecall {
    pub id: String,
    pub resolvable_ground_truth: Vec<String>,
    /// Per cutoff: ground-truth ids found in the top-k groups' members.
    pub cluster_hits_at: BTreeMap<usize, Vec<String>>,
    /// Per cutoff: ground-truth ids among the top-k representatives.
    pub exact_hits_at: BTreeMap<usize, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub cutoffs: Vec<usize>,
    /// Cluster-aware recall, averaged over included test papers.
    pub recall: BTreeMap<usize, f64>,
    /// Exact-id recall over representatives only.
    pub exact_recall: BTreeMap<usize, f64>,
    pub per_paper: Vec<CaseRecall>,
    /// Test papers excluded for having zero resolvable ground truth.
    pub excluded: Vec<String>,
    pub retrieval_config: RetrievalConfig,
    pub cluster_config: ClusterConfig,
}

pub const DEFAULT_RECALL_CUTOFFS: [usize; 5] = [10, 20, 30, 40, 50];

/// Recall-at-k over a test set: each background is retrieved, the union is
/// grouped (clustered when enabled) and ranked, and a ground-truth citation
/// counts as recalled when it falls inside any of the top-k groups.
pub fn recall_at_k(
    gateway: &Gateway,
    test_cases: &[TestCase],
    retrieval_config: &RetrievalConfig,
    cluster_config: &ClusterConfig,
    db: &CorpusDatabase,
    indexes: &Indexes,
    cutoffs: &[usize],
) -> Result<RecallReport, EvalError> {
    let mut report = RecallReport {
        cutoffs: cutoffs.to_vec(),
        recall: BTreeMap::new(),
        exact_recall: BTreeMap::new(),
        per_paper: Vec::new(),
        excluded: Vec::new(),
        retrieval_config: retrieval_config.clone(),
        cluster_config: *cluster_config,
    };

    for case in test_cases {
        let resolvable: Vec<String> = case
            .ground_truth
            .iter()
            .filter(|id| db.contains(id))
            .cloned()
            .collect();
        if resolvable.is_empty() {
            report.excluded.push(case.id.clone());
            continue;
        }
        let result = retrieve(gateway, &case.background, &[], retrieval_config, db, indexes)?;
        let clustering = if retrieval_config.use_clustering {
            Some(cluster(&result.union, db, cluster_config)?)
        } else {
            None
        };
        let groups = rank_retrieved_groups(&result, clustering.as_ref());

        let mut case_recall = CaseRecall {
            id: case.id.clone(),
            resolvable_ground_truth: resolvable.clone(),
            cluster_hits_at: BTreeMap::new(),
            exact_hits_at: BTreeMap::new(),
        };
        for &k in cutoffs {
            let top = &groups[..k.min(groups.len())];
            let members: BTreeSet<&String> = top.iter().flat_map(|g| g.members.iter()).collect();
            let representatives: BTreeSet<&String> =
                top.iter().map(|g| &g.representative).collect();
            let cluster_hits: Vec<String> = resolvable
                .iter()
                .filter(|gt| members.contains(gt))
                .cloned()
                .collect();
            let exact_hits: Vec<String> = resolvable
                .iter()
                .filter(|gt| representatives.contains(gt))
                .cloned()
                .collect();
            case_recall.cluster_hits_at.insert(k, cluster_hits);
            case_recall.exact_hits_at.insert(k, exact_hits);
        }
        report.per_paper.push(case_recall);
    }

    let included = report.per_paper.len().max(1) as f64;
    for &k in cutoffs {
        let mut cluster_sum = 0.0;
        let mut exact_sum = 0.0;
        for case in &report.per_paper {
            let gt = case.resolvable_ground_truth.len() as f64;
            cluster_sum += case.cluster_hits_at[&k].len() as f64 / gt;
            exact_sum += case.exact_hits_at[&k].len() as f64 / gt;
        }
        report.recall.insert(k, cluster_sum / included);
        report.exact_recall.insert(k, exact_sum / included);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// ablation runner

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<(String, RecallReport)>,
}

/// One recall report per named configuration row.
pub fn run_ablation(
    gateway: &Gateway,
    rows: &[(String, RetrievalConfig)],
    test_cases: &[TestCase],
    cluster_config: &ClusterConfig,
    db: &CorpusDatabase,
    indexes: &Indexes,
    cutoffs: &[usize],
) -> Result<AblationTable, EvalError> {
    let mut out = Vec::new();
    for (name, config) in rows {
        let report =
            recall_at_k(gateway, test_cases, config, cluster_config, db, indexes, cutoffs)?;
        out.push((name.clone(), report));
    }
    Ok(AblationTable { rows: out })
}

impl AblationTable {
    /// Aligned text table, one row per configuration.
    pub fn render_text(&self) -> String {
        let cutoffs = self.rows.first().map(|(_, r)| r.cutoffs.clone()).unwrap_or_default();
        let name_width = self
            .rows
            .iter()
            .map(|(name, _)| name.len())
            .chain(["config".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!("{:<width$}", "config", width = name_width);
        for k in &cutoffs {
            out.push_str(&format!("  recall@{:<3}", k));
        }
        out.push('\n');
        for (name, report) in &self.rows {
            out.push_str(&format!("{:<width$}", name, width = name_width));
            for k in &cutoffs {
                out.push_str(&format!("  {:>9.3}  ", report.recall[k]));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with a `name` column then one recall column per cutoff.
    pub fn render_csv(&self) -> String {
        let cutoffs = self.rows.first().map(|(_, r)| r.cutoffs.clone()).unwrap_or_default();
        let mut out = String::from("config");
        for k in &cutoffs {
            out.push_str(&format!(",recall@{}", k));
        }
        out.push('\n');
        for (name, report) in &self.rows {
            out.push_str(name);
            for k in &cutoffs {
                out.push_str(&format!(",{:.6}", report.recall[k]));
            }
            out.push('\n');
        }
        out
    }
}

fn head(text: &str) -> String {
    text.chars().take(80).collect()
}
