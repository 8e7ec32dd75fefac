//! Greedy leader clustering of retrieved papers.
//!
//! Each paper is represented by a weighted blend of its summary and
//! main-ideas embeddings. Papers are visited in ascending-id order; a paper
//! joins the first cluster whose leader is within the cosine threshold,
//! otherwise it founds a new cluster. One representative per cluster — the
//! member closest to the renormalized centroid — stands in for the group.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusDatabase, PaperRecord};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("paper {0} is not in the database")]
    UnknownPaper(String),
    #[error("paper {0}: blended embedding is the zero vector")]
    DegenerateBlend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub w_summary: f64,
    pub w_ideas: f64,
    /// Cosine threshold for joining a cluster, in (0, 1).
    pub threshold: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { w_summary: 0.5, w_ideas: 0.5, threshold: 0.85 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.w_summary < 0.0 || self.w_ideas < 0.0 {
            return Err(ClusterError::InvalidConfig("weights must be non-negative".into()));
        }
        if (self.w_summary + self.w_ideas - 1.0).abs() > 1e-9 {
            return Err(ClusterError::InvalidConfig(format!(
                "weights must sum to 1 (got {})",
                self.w_summary + self.w_ideas
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ClusterError::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Ascending-id member list.
    pub members: Vec<String>,
    pub leader: String,
    pub representative: String,
    pub centroid: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Clusters in founding order.
    pub clusters: Vec<Cluster>,
    /// The ascending-id order the greedy pass consumed.
    pub input_ids: Vec<String>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Members of the cluster containing `id`, if any.
    pub fn cluster_of(&self, id: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.members.iter().any(|m| m == id))
    }
}

/// Weighted sum of the summary and main-ideas embeddings, renormalized to
/// unit length. Computed in f64 so degenerate weights reproduce the input
/// embedding to f32 precision.
pub fn blended_embedding(paper: &PaperRecord, config: &ClusterConfig) -> Result<Vec<f32>, ClusterError> {
    config.validate()?;
    let blended: Vec<f64> = paper
        .emb_summary
        .iter()
        .zip(&paper.emb_main_ideas)
        .map(|(s, i)| config.w_summary * (*s as f64) + config.w_ideas * (*i as f64))
        .collect();
    let norm = blended.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ClusterError::DegenerateBlend(paper.id.clone()));
    }
    Ok(blended.into_iter().map(|x| (x / norm) as f32).collect())
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64) * (*y as f64)).sum()
}

/// Greedy leader clustering over `papers` in ascending-id order. Every
/// member's cosine to its cluster leader was at least the threshold at join
/// time; representatives are centroid-nearest members, ties by ascending id.
pub fn cluster(
    papers: &BTreeSet<String>,
    db: &CorpusDatabase,
    config: &ClusterConfig,
) -> Result<Clustering, ClusterError> {
    config.validate()?;
    let mut vectors: Vec<(String, Vec<f32>)> = Vec::with_capacity(papers.len());
    for id in papers {
        let record = db.get_paper(id).ok_or_else(|| ClusterError::UnknownPaper(id.clone()))?;
        vectors.push((id.clone(), blended_embedding(record, config)?));
    }

    struct Draft {
        members: Vec<usize>,
        leader: usize,
    }
    let mut drafts: Vec<Draft> = Vec::new();
    for (idx, (_, vector)) in vectors.iter().enumerate() {
        let joined = drafts.iter_mut().find(|d| {
            dot(&vectors[d.leader].1, vector) >= config.threshold
        });
        match joined {
            Some(d) => d.members.push(idx),
            None => drafts.push(Draft { members: vec![idx], leader: idx }),
        }
    }

    let clusters = drafts
        .into_iter()
        .map(|draft| {
            let dim = vectors[draft.leader].1.len();
            let mut mean = vec![0f64; dim];
            for &m in &draft.members {
                for (acc, x) in mean.iter_mut().zip(&vectors[m].1) {
                    *acc += *x as f64;
                }
            }
            let count = draft.members.len() as f64;
            for x in mean.iter_mut() {
                *x /= count;
            }
            let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            let centroid: Vec<f32> = if norm == 0.0 {
                vectors[draft.leader].1.clone()
            } else {
                mean.iter().map(|x| (x / norm) as f32).collect()
            };
            // centroid-nearest member, ascending id on exact ties
            let representative = draft
                .members
                .iter()
                .map(|&m| (dot(&vectors[m].1, &centroid), &vectors[m].0))
                .max_by(|(sa, ida), (sb, idb)| {
                    sa.total_cmp(sb).then_with(|| idb.cmp(ida))
                })
                .map(|(_, id)| id.clone())
                .expect("cluster has at least one member");
            Cluster {
                members: draft.members.iter().map(|&m| vectors[m].0.clone()).collect(),
                leader: vectors[draft.leader].0.clone(),
                representative,
                centroid,
            }
        })
        .collect();

    Ok(Clustering { clusters, input_ids: vectors.into_iter().map(|(id, _)| id).collect() })
}

/// One representative per cluster, in founding order.
pub fn representatives(clustering: &Clustering) -> Vec<String> {
    clustering.clusters.iter().map(|c| c.representative.clone()).collect()
}
