//! Paper records and the on-disk corpus database.
//!
//! A database is a directory holding three files:
//!
//! - `papers.meta` — one JSON record per line, UTF-8, ascending id; every
//!   field of a paper except its embedding vectors
//! - `papers.emb`  — little-endian 32-bit floats, row-major; three rows per
//!   paper (background, summary, main ideas), papers in ascending-id order
//! - `manifest`    — JSON with `schema_version`, `embedding_dim` and counts
//!
//! Raw papers enter through [`RawPaper`] (line-delimited JSON) and are turned
//! into full [`PaperRecord`]s by the extraction pipeline. Reference ids may
//! point outside the store; dangling references are legal and reported by
//! [`CorpusDatabase::dangling_references`], not rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

const META_FILE: &str = "papers.meta";
const EMB_FILE: &str = "papers.emb";
const MANIFEST_FILE: &str = "manifest";

/// Embeddings stored per paper, in on-disk row order.
pub const EMBEDDINGS_PER_PAPER: usize = 3;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("record invariant violated: {0}")]
    Invariant(String),
    #[error("unsupported schema version {found} (supported: {supported})")]
    UnsupportedSchema { found: u32, supported: u32 },
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A raw corpus record as it appears in the line-delimited ingestion format.
///
/// Citation markers in `introduction` and `method` are numeric brackets
/// `[k]` (optionally comma-separated, `[1, 3]`) where `k` is the 1-based
/// position in `references`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPaper {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub introduction: String,
    pub method: String,
    pub references: Vec<String>,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub year: i32,
}

impl RawPaper {
    /// Parses a line-delimited corpus file. Blank lines are skipped.
    pub fn parse_corpus(text: &str) -> Result<Vec<RawPaper>, StoreError> {
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let paper: RawPaper = serde_json::from_str(line).map_err(|e| {
                StoreError::Corrupt(format!("corpus line {}: {}", lineno + 1, e))
            })?;
            out.push(paper);
        }
        Ok(out)
    }

    pub fn read_corpus(path: &Path) -> Result<Vec<RawPaper>, StoreError> {
        let text = fs::read_to_string(path)?;
        Self::parse_corpus(&text)
    }
}

/// One paper with raw sections, extracted fields and embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub introduction: String,
    pub method: String,
    /// Raw bibliography, in bibliography order.
    pub reference_ids: Vec<String>,
    /// References cited in the introduction or method sections.
    pub core_reference_ids: Vec<String>,
    pub background: String,
    pub summary: String,
    pub main_ideas: String,
    pub detailed_ideas: String,
    /// Normalized entity strings: lowercase, whitespace-collapsed, 1–5 words.
    pub entities: BTreeSet<String>,
    #[serde(skip)]
    pub emb_background: Vec<f32>,
    #[serde(skip)]
    pub emb_summary: Vec<f32>,
    #[serde(skip)]
    pub emb_main_ideas: Vec<f32>,
    pub venue: String,
    pub year: i32,
}

impl PaperRecord {
    /// Validates the record's own invariants against a database dimension.
    pub fn validate(&self, embedding_dim: usize) -> Result<(), StoreError> {
        if self.id.is_empty() {
            return Err(StoreError::Invariant("empty paper id".into()));
        }
        let refs: BTreeSet<&String> = self.reference_ids.iter().collect();
        for core in &self.core_reference_ids {
            if !refs.contains(core) {
                return Err(StoreError::Invariant(format!(
                    "paper {}: core reference {} not in bibliography",
                    self.id, core
                )));
            }
        }
        for (name, emb) in [
            ("background", &self.emb_background),
            ("summary", &self.emb_summary),
            ("main_ideas", &self.emb_main_ideas),
        ] {
            if emb.len() != embedding_dim {
                return Err(StoreError::DimensionMismatch {
                    expected: embedding_dim,
                    got: emb.len(),
                });
            }
            let norm = l2_norm(emb);
            if (norm - 1.0).abs() > 1e-6 {
                return Err(StoreError::Invariant(format!(
                    "paper {}: {} embedding norm {} not unit",
                    self.id, name, norm
                )));
            }
        }
        for entity in &self.entities {
            if *entity != normalize_entity(entity) {
                return Err(StoreError::Invariant(format!(
                    "paper {}: entity {:?} not normalized",
                    self.id, entity
                )));
            }
            let words = entity.split_whitespace().count();
            if !(1..=5).contains(&words) {
                return Err(StoreError::Invariant(format!(
                    "paper {}: entity {:?} has {} words (expected 1–5)",
                    self.id, entity, words
                )));
            }
        }
        Ok(())
    }
}

/// Lowercase, trim, and collapse internal whitespace. Applied once at
/// ingestion; all downstream entity matching is exact string equality.
pub fn normalize_entity(raw: &str) -> String {
    crate::util::normalize_ws_lower(raw)
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    embedding_dim: usize,
    paper_count: usize,
    vector_count: usize,
}

/// The literature database: papers keyed by id plus a fixed embedding
/// dimension. Iteration is always ascending by id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDatabase {
    papers: BTreeMap<String, PaperRecord>,
    embedding_dim: usize,
    schema_version: u32,
}

impl CorpusDatabase {
    pub fn new(embedding_dim: usize) -> Self {
        Self {
            papers: BTreeMap::new(),
            embedding_dim,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    /// Inserts or atomically overwrites the record with the same id.
    pub fn put_paper(&mut self, record: PaperRecord) -> Result<(), StoreError> {
        record.validate(self.embedding_dim)?;
        self.papers.insert(record.id.clone(), record);
        Ok(())
    }

    /// Absence is a value, not an error.
    pub fn get_paper(&self, id: &str) -> Option<&PaperRecord> {
        self.papers.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.papers.contains_key(id)
    }

    pub fn remove_paper(&mut self, id: &str) -> Option<PaperRecord> {
        self.papers.remove(id)
    }

    /// Papers in ascending-id order.
    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.papers.keys()
    }

    /// Reference ids that do not resolve to a stored paper, per citing paper.
    /// Papers without dangling references are omitted.
    pub fn dangling_references(&self) -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        for paper in self.papers.values() {
            let mut missing: Vec<String> = paper
                .reference_ids
                .iter()
                .filter(|r| !self.papers.contains_key(*r))
                .cloned()
                .collect();
            missing.sort();
            missing.dedup();
            if !missing.is_empty() {
                out.insert(paper.id.clone(), missing);
            }
        }
        out
    }

    /// Writes `papers.meta`, `papers.emb` and `manifest` into `dir`,
    /// creating it if needed. Each file is written atomically.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;

        let mut meta = String::new();
        let mut emb: Vec<u8> =
            Vec::with_capacity(self.papers.len() * EMBEDDINGS_PER_PAPER * self.embedding_dim * 4);
        for paper in self.papers.values() {
            meta.push_str(
                &serde_json::to_string(paper)
                    .map_err(|e| StoreError::Corrupt(format!("serialize {}: {}", paper.id, e)))?,
            );
            meta.push('\n');
            for row in [&paper.emb_background, &paper.emb_summary, &paper.emb_main_ideas] {
                for value in row.iter() {
                    emb.extend_from_slice(&value.to_le_bytes());
                }
            }
        }

        let manifest = Manifest {
            schema_version: self.schema_version,
            embedding_dim: self.embedding_dim,
            paper_count: self.papers.len(),
            vector_count: self.papers.len() * EMBEDDINGS_PER_PAPER,
        };
        let manifest_json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;

        write_atomic(&dir.join(META_FILE), meta.as_bytes())?;
        write_atomic(&dir.join(EMB_FILE), &emb)?;
        write_atomic(&dir.join(MANIFEST_FILE), manifest_json.as_bytes())?;
        Ok(())
    }

    /// Loads a database saved by [`CorpusDatabase::save`]. Field-for-field
    /// equal to the saved value, embeddings bit-exact.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| StoreError::Corrupt(format!("manifest: {}", e)))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(StoreError::UnsupportedSchema {
                found: manifest.schema_version,
                supported: SCHEMA_VERSION,
            });
        }

        let mut db = CorpusDatabase::new(manifest.embedding_dim);
        let meta = BufReader::new(fs::File::open(dir.join(META_FILE))?);
        let mut emb = BufReader::new(fs::File::open(dir.join(EMB_FILE))?);
        let mut row = vec![0u8; manifest.embedding_dim * 4];
        let mut read_row = |emb: &mut BufReader<fs::File>| -> Result<Vec<f32>, StoreError> {
            emb.read_exact(&mut row)
                .map_err(|_| StoreError::Corrupt("embedding file truncated".into()))?;
            Ok(row
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };

        let mut count = 0usize;
        for line in meta.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut paper: PaperRecord = serde_json::from_str(&line)
                .map_err(|e| StoreError::Corrupt(format!("meta line: {}", e)))?;
            paper.emb_background = read_row(&mut emb)?;
            paper.emb_summary = read_row(&mut emb)?;
            paper.emb_main_ideas = read_row(&mut emb)?;
            count += 1;
            db.put_paper(paper)?;
        }
        if count != manifest.paper_count {
            return Err(StoreError::Corrupt(format!(
                "manifest says {} papers, meta holds {}",
                manifest.paper_count, count
            )));
        }
        let mut rest = Vec::new();
        emb.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(StoreError::Corrupt(format!(
                "{} trailing bytes in embedding file",
                rest.len()
            )));
        }
        Ok(db)
    }
}

/// Write-to-temp then rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::test_support::{record, unit_vec};
    use tempfile::tempdir;

    #[test]
    fn put_then_get_round_trips() {
        let mut db = CorpusDatabase::new(4);
        let r = record("p1", 4, &[]);
        db.put_paper(r.clone()).unwrap();
        assert_eq!(db.get_paper("p1"), Some(&r));
    }

    #[test]
    fn second_put_with_same_id_wins() {
        let mut db = CorpusDatabase::new(4);
        let mut r = record("p1", 4, &[]);
        db.put_paper(r.clone()).unwrap();
        r.title = "second".into();
        db.put_paper(r.clone()).unwrap();
        assert_eq!(db.get_paper("p1").unwrap().title, "second");
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn unknown_id_is_absent() {
        let db = CorpusDatabase::new(4);
        assert!(db.get_paper("nope").is_none());
    }

    #[test]
    fn get_reflects_latest_state_after_remove() {
        let mut db = CorpusDatabase::new(4);
        db.put_paper(record("p1", 4, &[])).unwrap();
        db.remove_paper("p1");
        assert!(db.get_paper("p1").is_none());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut db = CorpusDatabase::new(8);
        let r = record("p1", 4, &[]);
        assert!(matches!(
            db.put_paper(r),
            Err(StoreError::DimensionMismatch { expected: 8, got: 4 })
        ));
    }

    #[test]
    fn non_unit_embedding_rejected() {
        let mut db = CorpusDatabase::new(4);
        let mut r = record("p1", 4, &[]);
        r.emb_summary = vec![0.5, 0.0, 0.0, 0.0];
        assert!(matches!(db.put_paper(r), Err(StoreError::Invariant(_))));
    }

    #[test]
    fn core_refs_must_be_subset_of_refs() {
        let mut db = CorpusDatabase::new(4);
        let mut r = record("p1", 4, &["p2"]);
        r.core_reference_ids = vec!["p9".into()];
        assert!(matches!(db.put_paper(r), Err(StoreError::Invariant(_))));
    }

    #[test]
    fn unnormalized_entity_rejected() {
        let mut db = CorpusDatabase::new(4);
        let mut r = record("p1", 4, &[]);
        r.entities = BTreeSet::from(["Graph  Learning".to_string()]);
        assert!(matches!(db.put_paper(r), Err(StoreError::Invariant(_))));
    }

    #[test]
    fn entity_word_count_bounded() {
        let mut db = CorpusDatabase::new(4);
        let mut r = record("p1", 4, &[]);
        r.entities = BTreeSet::from(["one two three four five six".to_string()]);
        assert!(matches!(db.put_paper(r), Err(StoreError::Invariant(_))));
    }

    /// Audit must equal a brute-force scan over a synthetic 5-paper corpus.
    #[test]
    fn dangling_audit_matches_brute_force() {
        let mut db = CorpusDatabase::new(4);
        db.put_paper(record("p1", 4, &["p2", "x1"])).unwrap();
        db.put_paper(record("p2", 4, &["p1"])).unwrap();
        db.put_paper(record("p3", 4, &["x1", "x2", "p1"])).unwrap();
        db.put_paper(record("p4", 4, &[])).unwrap();
        db.put_paper(record("p5", 4, &["x2", "x2"])).unwrap();

        // independent scan
        let mut expected: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in db.papers() {
            let mut missing: Vec<String> = p
                .reference_ids
                .iter()
                .filter(|r| db.get_paper(r).is_none())
                .cloned()
                .collect();
            missing.sort();
            missing.dedup();
            if !missing.is_empty() {
                expected.insert(p.id.clone(), missing);
            }
        }
        assert_eq!(db.dangling_references(), expected);
        assert_eq!(expected.get("p1").unwrap(), &vec!["x1".to_string()]);
        assert!(!expected.contains_key("p2"));
    }

    #[test]
    fn dangling_reference_accepted_on_put() {
        let mut db = CorpusDatabase::new(4);
        db.put_paper(record("p1", 4, &["ghost"])).unwrap();
        assert_eq!(
            db.dangling_references().get("p1").unwrap(),
            &vec!["ghost".to_string()]
        );
    }

    #[test]
    fn iteration_is_ascending_by_id() {
        let mut db = CorpusDatabase::new(4);
        for id in ["p3", "p1", "p2"] {
            db.put_paper(record(id, 4, &[])).unwrap();
        }
        let ids: Vec<&String> = db.ids().collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn empty_db_round_trip() {
        let dir = tempdir().unwrap();
        let db = CorpusDatabase::new(16);
        db.save(dir.path()).unwrap();
        let loaded = CorpusDatabase::load(dir.path()).unwrap();
        assert_eq!(db, loaded);
    }

    #[test]
    fn three_paper_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let mut db = CorpusDatabase::new(6);
        for (i, id) in ["a", "b", "c"].iter().enumerate() {
            let mut r = record(id, 6, &["b", "x"]);
            r.emb_background = unit_vec(6, i);
            r.emb_summary = unit_vec(6, i + 1);
            r.emb_main_ideas = unit_vec(6, i + 2);
            r.year = 2020 + i as i32;
            db.put_paper(r).unwrap();
        }
        db.save(dir.path()).unwrap();
        let loaded = CorpusDatabase::load(dir.path()).unwrap();
        assert_eq!(db, loaded);
        for (p, q) in db.papers().zip(loaded.papers()) {
            assert_eq!(p.emb_background, q.emb_background);
            assert_eq!(p.emb_summary, q.emb_summary);
            assert_eq!(p.emb_main_ideas, q.emb_main_ideas);
        }
    }

    #[test]
    fn newer_schema_version_is_an_explicit_error() {
        let dir = tempdir().unwrap();
        let db = CorpusDatabase::new(4);
        db.save(dir.path()).unwrap();
        let manifest = dir.path().join("manifest");
        let text = fs::read_to_string(&manifest)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        fs::write(&manifest, text).unwrap();
        assert!(matches!(
            CorpusDatabase::load(dir.path()),
            Err(StoreError::UnsupportedSchema { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn truncated_embeddings_are_corrupt() {
        let dir = tempdir().unwrap();
        let mut db = CorpusDatabase::new(4);
        db.put_paper(record("p1", 4, &[])).unwrap();
        db.save(dir.path()).unwrap();
        let emb = dir.path().join("papers.emb");
        let bytes = fs::read(&emb).unwrap();
        fs::write(&emb, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            CorpusDatabase::load(dir.path()),
            Err(StoreError::Corrupt(_))
        ));
    }

    #[test]
    fn raw_corpus_parses_and_flags_bad_lines() {
        let good = r#"{"id":"p1","title":"t","abstract":"a","introduction":"i [1]","method":"m","references":["r1"],"venue":"V","year":2024}"#;
        let papers = RawPaper::parse_corpus(&format!("{}\n\n", good)).unwrap();
        assert_eq!(papers.len(), 1);
        assert_eq!(papers[0].abstract_text, "a");
        assert!(RawPaper::parse_corpus("not json").is_err());
    }

    #[test]
    fn normalize_entity_collapses_case_and_whitespace() {
        assert_eq!(normalize_entity("  Graph   Neural\tNetworks "), "graph neural networks");
    }
}
