//! Query-time structures over a corpus database: exact top-k cosine search,
//! the paper–entity graph with co-occurrence counts and document
//! frequencies, and the co-citation index.
//!
//! Everything here is immutable after build and safe for unrestricted
//! concurrent reads; a rebuild produces a fresh instance. Search is exact —
//! at the corpus scales involved a full scan is cheap and the retrospective
//! harness needs determinism.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::corpus::{write_atomic, CorpusDatabase, StoreError};

const ENTITY_INDEX_FILE: &str = "index.entity";
const COCITE_INDEX_FILE: &str = "index.cocite";

/// Which stored embedding a vector index ranks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingField {
    Background,
    Summary,
    MainIdeas,
}

/// Dense matrix of unit vectors in ascending-id row order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    ids: Vec<String>,
    matrix: Vec<f32>,
    dim: usize,
    pub field: EmbeddingField,
}

impl VectorIndex {
    pub fn build(db: &CorpusDatabase, field: EmbeddingField) -> Self {
        let dim = db.embedding_dim();
        let mut ids = Vec::with_capacity(db.len());
        let mut matrix = Vec::with_capacity(db.len() * dim);
        for paper in db.papers() {
            ids.push(paper.id.clone());
            let row = match field {
                EmbeddingField::Background => &paper.emb_background,
                EmbeddingField::Summary => &paper.emb_summary,
                EmbeddingField::MainIdeas => &paper.emb_main_ideas,
            };
            matrix.extend_from_slice(row);
        }
        Self { ids, matrix, dim, field }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Exact top-k by cosine: `min(k, n)` results, descending similarity,
    /// ties broken by ascending id. Rows are unit vectors, so cosine is the
    /// dot product.
    pub fn topk_cosine(&self, query: &[f32], k: usize) -> Result<Vec<(String, f32)>, StoreError> {
        if query.len() != self.dim {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        if k == 0 || self.ids.is_empty() {
            return Ok(Vec::new());
        }
        // bounded selection: keep the k best seen so far in a sorted buffer
        let mut best: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
        for (row, id_idx) in self.matrix.chunks_exact(self.dim).zip(0..) {
            let sim: f32 = row.iter().zip(query).map(|(a, b)| a * b).sum();
            if best.len() == k {
                let (worst_sim, worst_idx) = *best.last().unwrap();
                if !better(sim, id_idx, worst_sim, worst_idx, &self.ids) {
                    continue;
                }
            }
            let pos = best
                .partition_point(|&(s, i)| better(s, i, sim, id_idx, &self.ids));
            best.insert(pos, (sim, id_idx));
            best.truncate(k);
        }
        Ok(best
            .into_iter()
            .map(|(sim, idx)| (self.ids[idx].clone(), sim))
            .collect())
    }
}

/// True when candidate (sim_a, a) ranks strictly before (sim_b, b).
fn better(sim_a: f32, a: usize, sim_b: f32, b: usize, ids: &[String]) -> bool {
    match sim_a.total_cmp(&sim_b) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => ids[a] < ids[b],
    }
}

/// Bipartite paper↔entity occurrence structure plus entity–entity
/// co-occurrence counts and per-entity document frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntityGraph {
    postings: BTreeMap<String, BTreeSet<String>>,
    paper_entities: BTreeMap<String, BTreeSet<String>>,
    cooccurrence: BTreeMap<(String, String), u32>,
}

impl EntityGraph {
    pub fn build(db: &CorpusDatabase) -> Self {
        let mut postings: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut paper_entities: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut cooccurrence: BTreeMap<(String, String), u32> = BTreeMap::new();
        for paper in db.papers() {
            paper_entities.insert(paper.id.clone(), paper.entities.clone());
            let entities: Vec<&String> = paper.entities.iter().collect();
            for entity in &entities {
                postings
                    .entry((*entity).clone())
                    .or_default()
                    .insert(paper.id.clone());
            }
            for i in 0..entities.len() {
                for j in (i + 1)..entities.len() {
                    *cooccurrence
                        .entry((entities[i].clone(), entities[j].clone()))
                        .or_default() += 1;
                }
            }
        }
        Self { postings, paper_entities, cooccurrence }
    }

    /// Exact postings set; empty for an unknown entity.
    pub fn papers_with_entity(&self, entity: &str) -> BTreeSet<String> {
        self.postings.get(entity).cloned().unwrap_or_default()
    }

    pub fn entities_of_paper(&self, id: &str) -> BTreeSet<String> {
        self.paper_entities.get(id).cloned().unwrap_or_default()
    }

    /// Number of papers containing the entity.
    pub fn document_frequency(&self, entity: &str) -> usize {
        self.postings.get(entity).map(|p| p.len()).unwrap_or(0)
    }

    /// Papers containing both entities (order-insensitive lookup).
    pub fn cooccurrence_count(&self, a: &str, b: &str) -> u32 {
        if a == b {
            return 0;
        }
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.cooccurrence.get(&key).copied().unwrap_or(0)
    }

    /// All entities co-occurring with `entity` in at least `min_papers`
    /// papers, excluding the entity itself.
    pub fn co_occurring_entities(&self, entity: &str, min_papers: u32) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for ((a, b), count) in &self.cooccurrence {
            if *count < min_papers.max(1) {
                continue;
            }
            if a == entity {
                out.insert(b.clone(), *count);
            } else if b == entity {
                out.insert(a.clone(), *count);
            }
        }
        out
    }

    pub fn entities(&self) -> impl Iterator<Item = &String> {
        self.postings.keys()
    }

    /// Bipartite symmetry: postings and paper→entity maps describe the same
    /// edge set, and stored pair counts equal posting intersections.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (entity, papers) in &self.postings {
            for paper in papers {
                if !self
                    .paper_entities
                    .get(paper)
                    .map(|es| es.contains(entity))
                    .unwrap_or(false)
                {
                    return Err(format!("postings edge {entity:?}->{paper:?} missing reverse"));
                }
            }
        }
        for (paper, entities) in &self.paper_entities {
            for entity in entities {
                if !self
                    .postings
                    .get(entity)
                    .map(|ps| ps.contains(paper))
                    .unwrap_or(false)
                {
                    return Err(format!("paper edge {paper:?}->{entity:?} missing posting"));
                }
            }
        }
        for ((a, b), count) in &self.cooccurrence {
            let inter = self
                .papers_with_entity(a)
                .intersection(&self.papers_with_entity(b))
                .count() as u32;
            if inter != *count {
                return Err(format!("pair ({a:?},{b:?}) count {count} != intersection {inter}"));
            }
        }
        Ok(())
    }

    fn serialize(&self) -> String {
        let mut out = String::new();
        for (entity, papers) in &self.postings {
            out.push_str(entity);
            out.push('\t');
            out.push_str(&papers.iter().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn parse(text: &str, db: &CorpusDatabase) -> Result<Self, StoreError> {
        let mut postings: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (entity, papers) = line
                .split_once('\t')
                .ok_or_else(|| StoreError::Corrupt(format!("entity index line {:?}", line)))?;
            let set: BTreeSet<String> = papers
                .split(',')
                .filter(|p| !p.is_empty())
                .map(|p| p.to_string())
                .collect();
            postings.insert(entity.to_string(), set);
        }
        let rebuilt = Self::build(db);
        if rebuilt.postings != postings {
            return Err(StoreError::Corrupt(
                "entity index disagrees with database records".into(),
            ));
        }
        Ok(rebuilt)
    }
}

/// Unordered paper-id pair → number of distinct citing papers whose
/// bibliographies contain both. Dangling ids participate in the counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoCitationIndex {
    counts: BTreeMap<(String, String), u32>,
}

impl CoCitationIndex {
    pub fn build(db: &CorpusDatabase) -> Self {
        let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
        for citing in db.papers() {
            let refs: BTreeSet<&String> = citing.reference_ids.iter().collect();
            let refs: Vec<&String> = refs.into_iter().collect();
            for i in 0..refs.len() {
                for j in (i + 1)..refs.len() {
                    *counts
                        .entry((refs[i].clone(), refs[j].clone()))
                        .or_default() += 1;
                }
            }
        }
        Self { counts }
    }

    pub fn count(&self, p: &str, q: &str) -> u32 {
        if p == q {
            return 0;
        }
        let key = if p < q {
            (p.to_string(), q.to_string())
        } else {
            (q.to_string(), p.to_string())
        };
        self.counts.get(&key).copied().unwrap_or(0)
    }

    /// Up to `c` most co-cited in-corpus partners of `id`: count ≥ 1,
    /// descending count, ties by ascending partner id. Out-of-corpus
    /// partners are counted but never returned.
    pub fn top_co_cited(&self, id: &str, c: usize, db: &CorpusDatabase) -> Vec<(String, u32)> {
        let mut partners: Vec<(String, u32)> = Vec::new();
        for ((a, b), count) in &self.counts {
            let partner = if a == id {
                b
            } else if b == id {
                a
            } else {
                continue;
            };
            if *count >= 1 && db.contains(partner) {
                partners.push((partner.clone(), *count));
            }
        }
        partners.sort_by(|(ida, ca), (idb, cb)| cb.cmp(ca).then(ida.cmp(idb)));
        partners.truncate(c);
        partners
    }

    pub fn pair_count(&self) -> usize {
        self.counts.len()
    }

    fn serialize(&self) -> String {
        let mut out = String::new();
        for ((a, b), count) in &self.counts {
            out.push_str(&format!("{}\t{}\t{}\n", a, b, count));
        }
        out
    }

    fn parse(text: &str) -> Result<Self, StoreError> {
        let mut counts = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut parts = line.split('\t');
            let (Some(a), Some(b), Some(count)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(StoreError::Corrupt(format!("co-citation line {:?}", line)));
            };
            let count: u32 = count
                .parse()
                .map_err(|_| StoreError::Corrupt(format!("co-citation count {:?}", count)))?;
            counts.insert((a.to_string(), b.to_string()), count);
        }
        Ok(Self { counts })
    }
}

/// All query-time structures for one database.
#[derive(Debug, Clone, PartialEq)]
pub struct Indexes {
    pub background: VectorIndex,
    pub entity_graph: EntityGraph,
    pub cocitation: CoCitationIndex,
}

impl Indexes {
    pub fn build(db: &CorpusDatabase) -> Self {
        Self {
            background: VectorIndex::build(db, EmbeddingField::Background),
            entity_graph: EntityGraph::build(db),
            cocitation: CoCitationIndex::build(db),
        }
    }

    /// Writes `index.entity` and `index.cocite` next to the database files.
    /// The vector side needs no extra file: `papers.emb` already stores the
    /// matrices in row order.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        write_atomic(&dir.join(ENTITY_INDEX_FILE), self.entity_graph.serialize().as_bytes())?;
        write_atomic(&dir.join(COCITE_INDEX_FILE), self.cocitation.serialize().as_bytes())?;
        Ok(())
    }

    /// Loads serialized indexes when present (validating them against the
    /// database), otherwise rebuilds from the records.
    pub fn load_or_build(dir: &Path, db: &CorpusDatabase) -> Result<Self, StoreError> {
        let entity_path = dir.join(ENTITY_INDEX_FILE);
        let cocite_path = dir.join(COCITE_INDEX_FILE);
        let entity_graph = if entity_path.exists() {
            EntityGraph::parse(&fs::read_to_string(&entity_path)?, db)?
        } else {
            EntityGraph::build(db)
        };
        let cocitation = if cocite_path.exists() {
            let parsed = CoCitationIndex::parse(&fs::read_to_string(&cocite_path)?)?;
            if parsed != CoCitationIndex::build(db) {
                return Err(StoreError::Corrupt(
                    "co-citation index disagrees with database records".into(),
                ));
            }
            parsed
        } else {
            CoCitationIndex::build(db)
        };
        Ok(Self {
            background: VectorIndex::build(db, EmbeddingField::Background),
            entity_graph,
            cocitation,
        })
    }
}
