//! Prompt templates as versioned text assets.
//!
//! Every template is a (system message, user message) pair with `{name}`
//! placeholders. Rendering is a single pass: placeholder slots are replaced
//! verbatim with the bound values and bound values are never re-scanned, so
//! braces inside values survive untouched.

use std::collections::BTreeMap;

use super::ProviderError;
use crate::util::sha256_hex;

/// Which provider a template's requests are routed to when per-stage
/// providers are configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProviderStage {
    /// Database construction (entity/summary/idea extraction).
    Construction,
    /// Idea proposal (problem, ideas, brainstorm, filter, refine).
    Proposal,
    /// Judging (similarity, novelty, rankings).
    Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub system_message: &'static str,
    pub user_message: &'static str,
    /// Extraction and judging default to 0.0; ideation to 1.0.
    pub temperature: f32,
    pub stage: ProviderStage,
}

const EXTRACTOR_SYSTEM: &str = include_str!("assets/entity_extraction.system.txt");
const IDEATION_SYSTEM: &str = include_str!("assets/initial_idea_generation.system.txt");

/// Default one-shot block bound to the `{examples}` slot of entity
/// extraction when the caller has nothing better.
pub const ENTITY_EXTRACTION_EXAMPLES: &str = include_str!("assets/entity_extraction_examples.txt");

pub const TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate {
        name: "entity_extraction",
        system_message: EXTRACTOR_SYSTEM,
        user_message: include_str!("assets/entity_extraction.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Construction,
    },
    PromptTemplate {
        name: "summary_first_turn",
        system_message: EXTRACTOR_SYSTEM,
        user_message: include_str!("assets/summary_first_turn.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Construction,
    },
    PromptTemplate {
        name: "summary_second_turn",
        system_message: EXTRACTOR_SYSTEM,
        user_message: include_str!("assets/summary_second_turn.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Construction,
    },
    PromptTemplate {
        name: "detailed_ideas",
        system_message: EXTRACTOR_SYSTEM,
        user_message: include_str!("assets/detailed_ideas.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Construction,
    },
    PromptTemplate {
        name: "synonym_generation",
        system_message: EXTRACTOR_SYSTEM,
        user_message: include_str!("assets/synonym_generation.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "problem_generation",
        system_message: include_str!("assets/problem_generation.system.txt"),
        user_message: include_str!("assets/problem_generation.user.txt"),
        temperature: 1.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "initial_idea_generation",
        system_message: IDEATION_SYSTEM,
        user_message: include_str!("assets/initial_idea_generation.user.txt"),
        temperature: 1.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "idea_filtering",
        system_message: include_str!("assets/idea_filtering.system.txt"),
        user_message: include_str!("assets/idea_filtering.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "idea_improvement",
        system_message: IDEATION_SYSTEM,
        user_message: include_str!("assets/idea_improvement.user.txt"),
        temperature: 1.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "brainstorming",
        system_message: include_str!("assets/brainstorming.system.txt"),
        user_message: include_str!("assets/brainstorming.user.txt"),
        temperature: 1.0,
        stage: ProviderStage::Proposal,
    },
    PromptTemplate {
        name: "most_similar_selection",
        system_message: "",
        user_message: include_str!("assets/most_similar_selection.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Evaluation,
    },
    PromptTemplate {
        name: "similarity_scoring",
        system_message: "",
        user_message: include_str!("assets/similarity_scoring.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Evaluation,
    },
    PromptTemplate {
        name: "novelty_scoring",
        system_message: include_str!("assets/novelty_scoring.system.txt"),
        user_message: include_str!("assets/novelty_scoring.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Evaluation,
    },
    PromptTemplate {
        name: "two_way_comparison",
        system_message: include_str!("assets/two_way_comparison.system.txt"),
        user_message: include_str!("assets/two_way_comparison.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Evaluation,
    },
    PromptTemplate {
        name: "five_way_comparison",
        system_message: include_str!("assets/five_way_comparison.system.txt"),
        user_message: include_str!("assets/five_way_comparison.user.txt"),
        temperature: 0.0,
        stage: ProviderStage::Evaluation,
    },
];

pub fn template(name: &str) -> Result<&'static PromptTemplate, ProviderError> {
    TEMPLATES
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| ProviderError::UnknownTemplate(name.to_string()))
}

impl PromptTemplate {
    /// Version hash over both message texts; changes whenever an asset does.
    pub fn version_hash(&self) -> String {
        sha256_hex(&[self.system_message.as_bytes(), self.user_message.as_bytes()])
    }

    /// Substitutes every `{placeholder}` in the user message. Fails on a
    /// placeholder without a binding and on bindings that match no
    /// placeholder, naming the offender.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, ProviderError> {
        let mut used: Vec<&str> = Vec::new();
        let out = substitute(self.user_message, bindings, &mut used)?;
        for key in bindings.keys() {
            if !used.contains(&key.as_str()) {
                return Err(ProviderError::UnusedBinding(key.clone()));
            }
        }
        Ok(out)
    }

    /// Renders the system message; only `novelty_scoring` has placeholders
    /// there, all other templates return the text as-is.
    pub fn render_system(
        &self,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String, ProviderError> {
        let mut used = Vec::new();
        substitute(self.system_message, bindings, &mut used)
    }
}

fn substitute<'a>(
    text: &str,
    bindings: &'a BTreeMap<String, String>,
    used: &mut Vec<&'a str>,
) -> Result<String, ProviderError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| ProviderError::MalformedTemplate("unclosed '{'".into()))?;
        let name = &after[..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
            return Err(ProviderError::MalformedTemplate(format!(
                "invalid placeholder name {:?}",
                name
            )));
        }
        let (key, value) = bindings
            .get_key_value(name)
            .ok_or_else(|| ProviderError::MissingPlaceholder(name.to_string()))?;
        out.push_str(value);
        if !used.contains(&key.as_str()) {
            used.push(key);
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Convenience for building binding maps: `bindings(&[("a", "x")])`.
pub fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Version hashes of every template, keyed by name. Embedded into output
/// artifacts for provenance.
pub fn template_hashes() -> BTreeMap<String, String> {
    TEMPLATES
        .iter()
        .map(|t| (t.name.to_string(), t.version_hash()))
        .collect()
}
