//! Three-channel literature retrieval with provenance.
//!
//! Channel one ranks corpus backgrounds against the query embedding (top-K
//! cosine). Channel two expands the query's entities — model synonyms first,
//! then co-occurrence neighbors filtered by a minimum pair count and kept
//! only for the rarest few — and unions the postings of the expanded set.
//! Channel three follows citation co-occurrence from everything found so
//! far. The union of the three carries per-paper provenance so downstream
//! stages can tell which channel produced what.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusDatabase;
use crate::extraction::{extract_entities, parse_entity_reply, ExtractError};
use crate::index::Indexes;
use crate::providers::{bindings, Gateway, ProviderError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error("background text is empty")]
    EmptyBackground,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Store(#[from] crate::corpus::StoreError),
}

/// Stage switches and the constants of the retrieval channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Semantic neighbors kept (K).
    pub k_semantic: usize,
    /// Minimum papers an entity pair must share to qualify (m).
    pub min_co_papers: u32,
    /// Neighborhood entities kept after rarest-first truncation (n).
    pub n_rare: usize,
    /// Co-citation partners taken per already-retrieved paper.
    pub co_cite_top: usize,
    pub use_semantics: bool,
    pub use_entities: bool,
    pub use_cocitation: bool,
    pub use_clustering: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_semantic: 55,
            min_co_papers: 2,
            n_rare: 5,
            co_cite_top: 2,
            use_semantics: true,
            use_entities: true,
            use_cocitation: true,
            use_clustering: true,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k_semantic < 1 || self.min_co_papers < 1 || self.n_rare < 1 || self.co_cite_top < 1
        {
            return Err(RetrievalError::InvalidConfig(
                "all retrieval counts must be at least 1".into(),
            ));
        }
        if !self.use_semantics && !self.use_entities {
            return Err(RetrievalError::InvalidConfig(
                "at least one of semantics/entities must stay enabled".into(),
            ));
        }
        Ok(())
    }
}

/// Retrieval channels, used as provenance tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Semantic,
    Entity,
    Cocite,
}

/// The query entity set in its three disjoint layers: seeds extracted from
/// the background (and any extra texts), model-generated synonyms, and
/// co-occurrence neighbors that survived both filters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpandedEntitySet {
    pub seeds: Vec<String>,
    /// Seeds that came from extra texts (brainstorm output), a subset of
    /// `seeds`.
    pub extra_seeds: Vec<String>,
    pub synonyms: Vec<String>,
    /// In selection order: ascending document frequency, ties lexicographic.
    pub neighborhood: Vec<String>,
    pub flags: Vec<String>,
}

impl ExpandedEntitySet {
    /// E1: seeds plus synonyms.
    pub fn e1(&self) -> BTreeSet<String> {
        self.seeds.iter().chain(&self.synonyms).cloned().collect()
    }

    /// The full expanded set.
    pub fn all(&self) -> BTreeSet<String> {
        self.seeds
            .iter()
            .chain(&self.synonyms)
            .chain(&self.neighborhood)
            .cloned()
            .collect()
    }
}

/// Union of the three channels with full provenance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub n1: BTreeSet<String>,
    pub n2: BTreeSet<String>,
    pub n3: BTreeSet<String>,
    pub union: BTreeSet<String>,
    pub provenance: BTreeMap<String, BTreeSet<Channel>>,
    /// Cosine score per semantic hit.
    pub semantic_scores: BTreeMap<String, f32>,
    /// Expanded entities that matched, per entity-channel hit.
    pub matched_entities: BTreeMap<String, BTreeSet<String>>,
    pub expanded: ExpandedEntitySet,
    pub config: RetrievalConfig,
}

/// Semantic channel: top-K corpus backgrounds by cosine against the
/// embedded query background.
pub fn retrieve_semantic(
    gateway: &Gateway,
    background: &str,
    config: &RetrievalConfig,
    indexes: &Indexes,
) -> Result<(BTreeSet<String>, BTreeMap<String, f32>), RetrievalError> {
    let query = gateway.embed(background)?;
    let ranked = indexes.background.topk_cosine(&query, config.k_semantic)?;
    let mut scores = BTreeMap::new();
    let mut hits = BTreeSet::new();
    for (id, score) in ranked {
        hits.insert(id.clone());
        scores.insert(id, score);
    }
    Ok((hits, scores))
}

/// Builds the expanded entity set. Seeds come from the background (plus any
/// extra texts); one synonym-generation turn covers the whole seed batch; a
/// failure there degrades the synonym layer to empty with a flag rather
/// than failing retrieval. Neighborhood candidates need a pair count of at
/// least `m` with some E1 entity and only the `n` rarest survive.
pub fn expand_entities(
    gateway: &Gateway,
    background: &str,
    extra_texts: &[String],
    config: &RetrievalConfig,
    indexes: &Indexes,
) -> Result<ExpandedEntitySet, RetrievalError> {
    let mut set = ExpandedEntitySet {
        seeds: extract_entities(gateway, background)?,
        ..Default::default()
    };
    for extra in extra_texts {
        for entity in extract_entities(gateway, extra)? {
            if !set.extra_seeds.contains(&entity) {
                set.extra_seeds.push(entity.clone());
            }
            if !set.seeds.contains(&entity) {
                set.seeds.push(entity);
            }
        }
    }

    let seed_list = set.seeds.join(", ");
    match gateway.chat_template("synonym_generation", &bindings(&[("entities", &seed_list)])) {
        Ok(reply) => {
            for synonym in parse_entity_reply(&reply.text, 1, None) {
                if !set.seeds.contains(&synonym) && !set.synonyms.contains(&synonym) {
                    set.synonyms.push(synonym);
                }
            }
        }
        Err(e) => set.flags.push(format!("synonym expansion degraded: {}", e)),
    }

    let e1 = set.e1();
    let mut candidates: BTreeSet<String> = BTreeSet::new();
    for entity in &e1 {
        for (candidate, _count) in indexes
            .entity_graph
            .co_occurring_entities(entity, config.min_co_papers)
        {
            if !e1.contains(&candidate) {
                candidates.insert(candidate);
            }
        }
    }
    let mut ranked: Vec<(usize, String)> = candidates
        .into_iter()
        .map(|c| (indexes.entity_graph.document_frequency(&c), c))
        .collect();
    ranked.sort_by(|(fa, ea), (fb, eb)| fa.cmp(fb).then(ea.cmp(eb)));
    set.neighborhood = ranked.into_iter().take(config.n_rare).map(|(_, e)| e).collect();
    Ok(set)
}

/// Entity channel: union of postings over the expanded set, with the
/// matching entities recorded per hit. An empty entity set yields an empty
/// channel, not an error.
pub fn retrieve_by_entities(
    entities: &BTreeSet<String>,
    indexes: &Indexes,
) -> (BTreeSet<String>, BTreeMap<String, BTreeSet<String>>) {
    let mut hits = BTreeSet::new();
    let mut matched: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for entity in entities {
        for paper in indexes.entity_graph.papers_with_entity(entity) {
            hits.insert(paper.clone());
            matched.entry(paper).or_default().insert(entity.clone());
        }
    }
    (hits, matched)
}

/// Co-citation channel: for every base paper, its most co-cited in-corpus
/// partners. Partners already in the base are still part of the channel;
/// set semantics deduplicate in the union.
pub fn retrieve_co_cited(
    base: &BTreeSet<String>,
    config: &RetrievalConfig,
    indexes: &Indexes,
    db: &CorpusDatabase,
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for paper in base {
        for (partner, _count) in indexes.cocitation.top_co_cited(paper, config.co_cite_top, db) {
            out.insert(partner);
        }
    }
    out
}

/// Runs the enabled channels and assembles the union with provenance.
/// `extra_texts` (brainstorm output) contribute their entities to the seed
/// layer before expansion.
pub fn retrieve(
    gateway: &Gateway,
    background: &str,
    extra_texts: &[String],
    config: &RetrievalConfig,
    db: &CorpusDatabase,
    indexes: &Indexes,
) -> Result<RetrievalResult, RetrievalError> {
    config.validate()?;
    if background.trim().is_empty() {
        return Err(RetrievalError::EmptyBackground);
    }
    let mut result = RetrievalResult { config: config.clone(), ..Default::default() };

    if config.use_semantics {
        let (n1, scores) = retrieve_semantic(gateway, background, config, indexes)?;
        result.n1 = n1;
        result.semantic_scores = scores;
    }
    if config.use_entities {
        result.expanded = expand_entities(gateway, background, extra_texts, config, indexes)?;
        let (n2, matched) = retrieve_by_entities(&result.expanded.all(), indexes);
        result.n2 = n2;
        result.matched_entities = matched;
    }
    if config.use_cocitation {
        let base: BTreeSet<String> = result.n1.union(&result.n2).cloned().collect();
        result.n3 = retrieve_co_cited(&base, config, indexes, db);
    }

    for id in &result.n1 {
        result.provenance.entry(id.clone()).or_default().insert(Channel::Semantic);
    }
    for id in &result.n2 {
        result.provenance.entry(id.clone()).or_default().insert(Channel::Entity);
    }
    for id in &result.n3 {
        result.provenance.entry(id.clone()).or_default().insert(Channel::Cocite);
    }
    result.union = result.provenance.keys().cloned().collect();
    Ok(result)
}
