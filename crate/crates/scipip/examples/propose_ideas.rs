//! Run all three proposal pipelines over one background and inspect the
//! stage traces.
//!
//! Run: `cargo run --example propose_ideas`

use scipip::extraction::build_database;
use scipip::ideas::Variant;
use scipip::index::Indexes;
use scipip::proposer::{propose, ProposerConfig};
use scipip::{Gateway, RawPaper};

fn corpus() -> Vec<RawPaper> {
    [
        ("src-1", "Graph Models", "Graph neural models improve link prediction over sparse citation networks."),
        ("src-2", "Retrieval Tuning", "Dense retrieval tuning with contrastive negatives boosts recall substantially."),
        ("src-3", "Prompt Stability", "Prompt structure stability affects downstream extraction quality across domains."),
        ("src-4", "Citation Dynamics", "Citation dynamics reveal latent topical bridges between research communities."),
    ]
    .iter()
    .map(|(id, title, abstract_text)| RawPaper {
        id: id.to_string(),
        title: title.to_string(),
        abstract_text: abstract_text.to_string(),
        introduction: format!("Context [1]. {}", abstract_text),
        method: "The method is staged and ablated.".into(),
        references: vec!["src-1".into()],
        venue: "VEN".into(),
        year: 2024,
    })
    .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = Gateway::mock(23, 64);
    let (db, _) = build_database(corpus(), &gateway)?;
    let indexes = Indexes::build(&db);
    let background = "Idea generation systems produce repetitive suggestions because retrieval misses semantically related but differently phrased prior work.";
    let config = ProposerConfig::default();

    for variant in [Variant::A, Variant::B, Variant::C] {
        let outcome = propose(&gateway, &db, &indexes, background, variant, &config)?;
        println!("=== variant {} ===", variant);
        println!("stages: {:?}", outcome.trace.stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>());
        println!("retrieved union: {} papers, digest over {:?}",
                 outcome.trace.retrieval.union.len(), outcome.trace.digest_paper_ids);
        if variant == Variant::C {
            println!("brainstorm-derived seed entities: {:?}",
                     outcome.trace.retrieval.expanded.extra_seeds);
        }
        println!("problem: {}", outcome.trace.problem.problem);
        for set in &outcome.trace.sets {
            println!("  {:<12} {:>2} idea(s)", set.stage.label(), set.len());
        }
        for (i, idea) in outcome.refined.ideas.iter().enumerate() {
            println!("  refined {}: {}", i + 1, idea.title);
        }
        println!();
    }
    Ok(())
}
