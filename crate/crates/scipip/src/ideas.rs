//! Idea lists and the `**Idea k**` entry grammar shared by the extraction
//! and proposal stages.
//!
//! An entry starts on a line `**Idea <k>**: <title>`; an optional
//! `- **Details**: <text>` block follows and runs until the next entry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::normalize_ws_lower;

#[derive(Debug, Error)]
#[error("idea list parse error: {0}")]
pub struct IdeaParseError(pub String);

/// Pipeline variants: direct proposal (A), proposal with independent
/// brainstorming (B), and brainstorming that also feeds retrieval (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Variant::A),
            "B" => Ok(Variant::B),
            "C" => Ok(Variant::C),
            other => Err(format!("unknown variant {:?} (expected A, B or C)", other)),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::A => write!(f, "A"),
            Variant::B => write!(f, "B"),
            Variant::C => write!(f, "C"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Brainstormed,
    Initial,
    Merged,
    Filtered,
    Refined,
}

impl Stage {
    /// Accepted entry-count band, where one exists for the stage.
    pub fn band(self) -> Option<(usize, usize)> {
        match self {
            Stage::Brainstormed => Some((4, 6)),
            Stage::Initial => Some((8, 12)),
            Stage::Merged => None,
            Stage::Filtered => Some((5, 6)),
            Stage::Refined => Some((2, 4)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Brainstormed => "brainstormed",
            Stage::Initial => "initial",
            Stage::Merged => "merged",
            Stage::Filtered => "filtered",
            Stage::Refined => "refined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Idea {
    pub title: String,
    #[serde(default)]
    pub details: String,
}

impl Idea {
    pub fn titled(title: impl Into<String>) -> Self {
        Self { title: title.into(), details: String::new() }
    }

    /// Case- and whitespace-insensitive key used for dedup and the filter
    /// identity check.
    pub fn title_key(&self) -> String {
        normalize_ws_lower(&self.title)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Lineage {
    pub variant: Option<Variant>,
    /// Labels of the stages this set was derived from.
    pub sources: Vec<String>,
}

/// An ordered list of ideas at one pipeline stage, plus any quality flags
/// raised while producing it (band misses are flagged, never fatal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaSet {
    pub stage: Stage,
    pub ideas: Vec<Idea>,
    pub lineage: Lineage,
    pub flags: Vec<String>,
}

impl IdeaSet {
    pub fn new(stage: Stage, ideas: Vec<Idea>) -> Self {
        Self { stage, ideas, lineage: Lineage::default(), flags: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ideas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ideas.is_empty()
    }

    /// Flags the set when its size misses the stage band.
    pub fn flag_band_miss(&mut self) {
        if let Some((lo, hi)) = self.stage.band() {
            let n = self.ideas.len();
            if n < lo || n > hi {
                self.flags.push(format!(
                    "{} stage has {} entries, expected {}-{}",
                    self.stage.label(),
                    n,
                    lo,
                    hi
                ));
            }
        }
    }

    pub fn in_band(&self) -> bool {
        self.stage
            .band()
            .map(|(lo, hi)| (lo..=hi).contains(&self.ideas.len()))
            .unwrap_or(true)
    }
}

/// Parses `**Idea k**` entries. `require_details` demands an explicit
/// `**Details**` block per entry.
pub fn parse_idea_entries(text: &str, require_details: bool) -> Result<Vec<Idea>, IdeaParseError> {
    let mut ideas: Vec<Idea> = Vec::new();
    let mut in_details = false;
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(title) = parse_entry_header(trimmed) {
            ideas.push(Idea::titled(title));
            in_details = false;
            continue;
        }
        let Some(current) = ideas.last_mut() else { continue };
        if let Some(details) = parse_details_header(trimmed) {
            if !current.details.is_empty() {
                current.details.push('\n');
            }
            current.details.push_str(details);
            in_details = true;
        } else if !trimmed.is_empty() {
            if in_details {
                current.details.push('\n');
                current.details.push_str(trimmed);
            } else {
                current.title.push(' ');
                current.title.push_str(trimmed);
            }
        }
    }
    if ideas.is_empty() {
        return Err(IdeaParseError("no **Idea k** entries found".into()));
    }
    if require_details {
        for (i, idea) in ideas.iter().enumerate() {
            if idea.details.trim().is_empty() {
                return Err(IdeaParseError(format!(
                    "idea {} ({:?}) is missing its **Details** block",
                    i + 1,
                    idea.title
                )));
            }
        }
    }
    Ok(ideas)
}

fn parse_entry_header(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("**Idea")?.trim_start();
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = rest[digits..].strip_prefix("**")?;
    Some(rest.trim_start_matches(':').trim())
}

fn parse_details_header(line: &str) -> Option<&str> {
    let rest = line
        .strip_prefix("- **Details**")
        .or_else(|| line.strip_prefix("**Details**"))?;
    Some(rest.trim_start_matches(':').trim())
}

/// Formats ideas back into the entry grammar, numbering from 1.
pub fn format_idea_list(ideas: &[Idea], include_details: bool) -> String {
    let mut out = String::new();
    for (i, idea) in ideas.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("**Idea {}**: {}", i + 1, idea.title));
        if include_details && !idea.details.trim().is_empty() {
            out.push_str(&format!("\n\n- **Details**: {}", idea.details));
        }
    }
    out
}
