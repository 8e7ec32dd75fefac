//! Derivation of every stored field a raw paper lacks: entities, the
//! background/summary/main-ideas triplet, detailed ideas, core references
//! and embeddings. Running all five stages over a raw corpus yields a
//! [`CorpusDatabase`].
//!
//! Parse-sensitive stages retry once before giving up; cardinality misses
//! are flagged in the per-paper report rather than failing the paper.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_entity, CorpusDatabase, PaperRecord, RawPaper, StoreError};
use crate::ideas::parse_idea_entries;
use crate::providers::{bindings, templates::ENTITY_EXTRACTION_EXAMPLES, Gateway, Message, ProviderError};
use crate::util::parallel_map;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("unparseable reply: {0}")]
    Parse(String),
    #[error("no parseable entities in reply")]
    NoEntities,
    #[error("every paper failed extraction ({0} reports)")]
    AllPapersFailed(usize),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Outcome of running the five extraction stages over one paper. A paper
/// enters the database only when all five stages completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub paper_id: String,
    pub stages_completed: BTreeSet<String>,
    pub failures: Vec<(String, String)>,
    pub flags: Vec<String>,
}

pub const STAGES: [&str; 5] =
    ["entities", "summary_triplet", "detailed_ideas", "core_refs", "embeddings"];

/// Splits a comma-separated entity reply, normalizes each candidate and
/// keeps the ones with a word count inside `[min_words, 5]`, first
/// occurrence order, optionally capped.
pub fn parse_entity_reply(reply: &str, min_words: usize, cap: Option<usize>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for candidate in reply.split(',') {
        let entity = normalize_entity(candidate.trim_matches(|c: char| c == '.' || c.is_whitespace()));
        if entity.is_empty() {
            continue;
        }
        let words = entity.split_whitespace().count();
        if words < min_words || words > 5 {
            continue;
        }
        if !out.contains(&entity) {
            out.push(entity);
        }
        if let Some(cap) = cap {
            if out.len() == cap {
                break;
            }
        }
    }
    out
}

/// Entity extraction over one content block: at most 5 entities of 2–5
/// words each; rule violators are dropped, not fatal. Retries once when the
/// reply yields nothing parseable.
pub fn extract_entities(gateway: &Gateway, content: &str) -> Result<Vec<String>, ExtractError> {
    let binds = bindings(&[("examples", ENTITY_EXTRACTION_EXAMPLES), ("content", content)]);
    for attempt in 0..2 {
        let reply = gateway.chat_template("entity_extraction", &binds)?;
        let entities = parse_entity_reply(&reply.text, 2, Some(5));
        if !entities.is_empty() {
            return Ok(entities);
        }
        if attempt == 1 {
            return Err(ExtractError::NoEntities);
        }
    }
    unreachable!()
}

/// The two-turn summary dialogue: turn one yields the single-sentence
/// summary, turn two (with the full first turn kept in history) yields the
/// motivations/details reply parsed into background and main ideas.
pub fn extract_summary_triplet(
    gateway: &Gateway,
    title: &str,
    abstract_text: &str,
    introduction: &str,
) -> Result<(String, String, String), ExtractError> {
    let binds =
        bindings(&[("title", title), ("abstract", abstract_text), ("introduction", introduction)]);
    let first_request = gateway.build_request("summary_first_turn", &binds, &[])?;

    let mut summary = None;
    for attempt in 0..2 {
        let reply = gateway.chat(&first_request)?;
        let text = reply.text.trim().to_string();
        if text.starts_with("The problem of") {
            summary = Some(text);
            break;
        }
        if attempt == 1 {
            return Err(ExtractError::Parse(format!(
                "summary does not follow the required sentence format: {:?}",
                head(&text)
            )));
        }
    }
    let summary = summary.expect("loop either set summary or returned");

    let first_user = first_request
        .messages
        .iter()
        .find(|m| matches!(m.role, crate::providers::Role::User))
        .expect("first turn has a user message")
        .clone();
    let history = vec![first_user, Message::assistant(summary.clone())];
    let second_request = gateway.build_request("summary_second_turn", &Default::default(), &history)?;

    for attempt in 0..2 {
        let reply = gateway.chat(&second_request)?;
        match parse_motivations_details(&reply.text) {
            Ok((background, main_ideas)) => return Ok((background, summary, main_ideas)),
            Err(e) if attempt == 1 => return Err(e),
            Err(_) => {}
        }
    }
    unreachable!()
}

fn parse_motivations_details(reply: &str) -> Result<(String, String), ExtractError> {
    let motivations_at = reply
        .find("Motivations:")
        .ok_or_else(|| ExtractError::Parse("reply missing \"Motivations:\"".into()))?;
    let details_at = reply
        .find("Details:")
        .ok_or_else(|| ExtractError::Parse("reply missing \"Details:\"".into()))?;
    if details_at < motivations_at {
        return Err(ExtractError::Parse("\"Details:\" precedes \"Motivations:\"".into()));
    }
    let background = reply[motivations_at + "Motivations:".len()..details_at].trim().to_string();
    let main_ideas = reply[details_at + "Details:".len()..].trim().to_string();
    if background.is_empty() || main_ideas.is_empty() {
        return Err(ExtractError::Parse("empty motivations or details section".into()));
    }
    Ok((background, main_ideas))
}

/// Refines contribution entries against the method text. The reply must
/// carry 2–4 `**Idea k**` entries; anything else is retried once, then
/// flagged while the raw text is kept.
pub fn extract_detailed_ideas(
    gateway: &Gateway,
    abstract_text: &str,
    contributions: &str,
    method_text: &str,
) -> Result<(String, Option<String>), ExtractError> {
    let binds = bindings(&[
        ("abstract", abstract_text),
        ("contribution", contributions),
        ("text", method_text),
    ]);
    let mut last = String::new();
    for _ in 0..2 {
        let reply = gateway.chat_template("detailed_ideas", &binds)?;
        last = reply.text;
        let count = parse_idea_entries(&last, false).map(|v| v.len()).unwrap_or(0);
        if (2..=4).contains(&count) {
            return Ok((last, None));
        }
    }
    let count = parse_idea_entries(&last, false).map(|v| v.len()).unwrap_or(0);
    let flag = format!("detailed ideas reply has {} entries, expected 2-4", count);
    Ok((last, Some(flag)))
}

/// Bibliography entries whose numeric bracket markers (`[k]`, 1-based,
/// comma lists allowed) occur in the introduction or method text, in
/// bibliography order. Unmatched markers are ignored.
pub fn extract_core_references(
    introduction: &str,
    method: &str,
    bibliography: &[String],
) -> Vec<String> {
    let mut cited = BTreeSet::new();
    for text in [introduction, method] {
        scan_markers(text, &mut cited);
    }
    bibliography
        .iter()
        .enumerate()
        .filter(|(i, _)| cited.contains(&(i + 1)))
        .map(|(_, id)| id.clone())
        .collect()
}

fn scan_markers(text: &str, cited: &mut BTreeSet<usize>) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(open) = text[i..].find('[') {
        let start = i + open + 1;
        let Some(close) = text[start..].find(']') else { break };
        let inner = &text[start..start + close];
        if !inner.is_empty()
            && inner.chars().all(|c| c.is_ascii_digit() || c == ',' || c.is_whitespace())
        {
            for part in inner.split(',') {
                if let Ok(k) = part.trim().parse::<usize>() {
                    if k >= 1 {
                        cited.insert(k);
                    }
                }
            }
        }
        i = start + close + 1;
        if i >= bytes.len() {
            break;
        }
    }
}

/// Runs the five stages for one raw paper. On success the record is
/// complete; the report carries completed stages, failures and flags.
pub fn extract_paper(
    gateway: &Gateway,
    raw: &RawPaper,
) -> (Option<PaperRecord>, ExtractionReport) {
    let mut report = ExtractionReport {
        paper_id: raw.id.clone(),
        stages_completed: BTreeSet::new(),
        failures: Vec::new(),
        flags: Vec::new(),
    };
    let fail = |report: &mut ExtractionReport, stage: &str, err: String| {
        report.failures.push((stage.to_string(), err));
    };

    let entities = match extract_entities(gateway, &raw.abstract_text) {
        Ok(e) => {
            report.stages_completed.insert("entities".into());
            e
        }
        Err(e) => {
            fail(&mut report, "entities", e.to_string());
            return (None, report);
        }
    };

    let (background, summary, main_ideas) = match extract_summary_triplet(
        gateway,
        &raw.title,
        &raw.abstract_text,
        &raw.introduction,
    ) {
        Ok(t) => {
            report.stages_completed.insert("summary_triplet".into());
            t
        }
        Err(e) => {
            fail(&mut report, "summary_triplet", e.to_string());
            return (None, report);
        }
    };

    let detailed_ideas = match extract_detailed_ideas(gateway, &raw.abstract_text, &main_ideas, &raw.method)
    {
        Ok((text, flag)) => {
            report.stages_completed.insert("detailed_ideas".into());
            if let Some(flag) = flag {
                report.flags.push(flag);
            }
            text
        }
        Err(e) => {
            fail(&mut report, "detailed_ideas", e.to_string());
            return (None, report);
        }
    };

    let core_reference_ids = extract_core_references(&raw.introduction, &raw.method, &raw.references);
    report.stages_completed.insert("core_refs".into());

    let embed3 = gateway.embed(&background).and_then(|b| {
        let s = gateway.embed(&summary)?;
        let i = gateway.embed(&main_ideas)?;
        Ok((b, s, i))
    });
    let (emb_background, emb_summary, emb_main_ideas) = match embed3 {
        Ok(t) => {
            report.stages_completed.insert("embeddings".into());
            t
        }
        Err(e) => {
            fail(&mut report, "embeddings", e.to_string());
            return (None, report);
        }
    };

    let record = PaperRecord {
        id: raw.id.clone(),
        title: raw.title.clone(),
        abstract_text: raw.abstract_text.clone(),
        introduction: raw.introduction.clone(),
        method: raw.method.clone(),
        reference_ids: raw.references.clone(),
        core_reference_ids,
        background,
        summary,
        main_ideas,
        detailed_ideas,
        entities: entities.into_iter().collect(),
        emb_background,
        emb_summary,
        emb_main_ideas,
        venue: raw.venue.clone(),
        year: raw.year,
    };
    (Some(record), report)
}

/// Builds a database from a raw corpus. Papers extract independently (up to
/// the gateway's parallelism bound) and merge in ascending-id order, so the
/// resulting database is identical for any thread count. Failures are
/// reported per paper; the build only errors when nothing succeeds.
pub fn build_database(
    mut corpus: Vec<RawPaper>,
    gateway: &Gateway,
) -> Result<(CorpusDatabase, Vec<ExtractionReport>), ExtractError> {
    corpus.sort_by(|a, b| a.id.cmp(&b.id));
    let results = parallel_map(corpus, gateway.parallelism, |raw| extract_paper(gateway, &raw));

    let mut db = CorpusDatabase::new(gateway.embedding_dim);
    let mut reports = Vec::new();
    let total = results.len();
    for (record, report) in results {
        if let Some(record) = record {
            db.put_paper(record)?;
        }
        if !report.failures.is_empty() || !report.flags.is_empty() {
            reports.push(report);
        }
    }
    if db.is_empty() && total > 0 {
        return Err(ExtractError::AllPapersFailed(reports.len()));
    }
    Ok((db, reports))
}

fn head(text: &str) -> String {
    text.chars().take(60).collect()
}
