//! Small shared helpers: stable hashing and a bounded parallel map.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256, used for template version hashes and cache keys.
pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{:02x}", byte));
    }
    out
}

/// Lowercase with internal whitespace collapsed to single spaces.
pub fn normalize_ws_lower(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First eight bytes of the SHA-256 digest as a little-endian u64.
/// Stable across runs and platforms, unlike the std hasher.
pub fn hash64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Applies `f` to every item using up to `parallelism` worker threads.
/// Results come back in input order regardless of scheduling, so callers
/// stay deterministic under any thread count.
pub fn parallel_map<T, R, F>(items: Vec<T>, parallelism: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let workers = parallelism.max(1);
    if workers == 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let total = items.len();
    let mut slots: Vec<Option<R>> = Vec::with_capacity(total);
    slots.resize_with(total, || None);
    let queue: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(queue);
    let results = std::sync::Mutex::new(&mut slots);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(total) {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop();
                match next {
                    Some((idx, item)) => {
                        let value = f(item);
                        results.lock().unwrap()[idx] = Some(value);
                    }
                    None => break,
                }
            });
        }
    });

    slots.into_iter().map(|slot| slot.expect("worker completed")).collect()
}

/// Builders for hand-constructed corpora, shared by unit, integration and
/// acceptance tests.
pub mod test_support {
    use crate::corpus::PaperRecord;
    use std::collections::BTreeSet;

    /// Unit vector with a single 1.0 at `axis % dim`.
    pub fn unit_vec(dim: usize, axis: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[axis % dim] = 1.0;
        v
    }

    /// A 2-d rotation embedded in `dim` dimensions: `[cos, sin, 0, ...]`
    /// placed at `(x_axis, y_axis)`. Always unit norm.
    pub fn planar_vec(dim: usize, x_axis: usize, y_axis: usize, x: f64) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        let y = (1.0 - x * x).max(0.0).sqrt();
        v[x_axis % dim] = x as f32;
        v[y_axis % dim] = y as f32;
        v
    }

    /// Minimal valid record: unit embeddings along `dim`-cycled axes and the
    /// given bibliography. Core references default to empty.
    pub fn record(id: &str, dim: usize, references: &[&str]) -> PaperRecord {
        PaperRecord {
            id: id.to_string(),
            title: format!("Title of {}", id),
            abstract_text: format!("Abstract of {}", id),
            introduction: String::new(),
            method: String::new(),
            reference_ids: references.iter().map(|s| s.to_string()).collect(),
            core_reference_ids: Vec::new(),
            background: format!("Background of {}", id),
            summary: format!("The problem of {} can be addressed by testing.", id),
            main_ideas: format!("Main ideas of {}", id),
            detailed_ideas: String::new(),
            entities: BTreeSet::new(),
            emb_background: unit_vec(dim, 0),
            emb_summary: unit_vec(dim, 1),
            emb_main_ideas: unit_vec(dim, 2),
            venue: "TestVenue".into(),
            year: 2024,
        }
    }

    /// Record with explicit background embedding and entity set.
    pub fn paper_with(
        id: &str,
        emb_background: Vec<f32>,
        entities: &[&str],
        references: &[&str],
    ) -> PaperRecord {
        let dim = emb_background.len();
        let mut r = record(id, dim, references);
        r.emb_background = emb_background;
        r.entities = entities.iter().map(|s| s.to_string()).collect();
        r
    }
}
