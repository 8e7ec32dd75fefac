//! The judge pipelines: similarity matching against a reference store,
//! multi-round novelty scoring with literature search, and comparative
//! ranking with win-rate aggregation.
//!
//! Run: `cargo run --example judge_ideas`

use std::collections::BTreeMap;

use scipip::evaluation::{
    match_similarity, rank_ideas, score_novelty, win_rate, GeneratedIdea, JudgmentCache,
    ReferenceIdeas,
};
use scipip::extraction::build_database;
use scipip::{Gateway, RawPaper};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = Gateway::mock(57, 64);

    // reference store: one idea per corpus paper
    let corpus: Vec<RawPaper> = [
        ("ref-1", "Reward Models", "Iterative code refinement guided by learned reward models and error severity."),
        ("ref-2", "Context Diversity", "Co-citation graphs diversify retrieved context for generation tasks."),
        ("ref-3", "Template Audits", "Perturbation testing calibrates prompt templates before deployment."),
    ]
    .iter()
    .map(|(id, title, abstract_text)| RawPaper {
        id: id.to_string(),
        title: title.to_string(),
        abstract_text: abstract_text.to_string(),
        introduction: format!("Why this matters [1]. {}", abstract_text),
        method: "Protocolized procedure with baselines.".into(),
        references: vec!["ref-1".into()],
        venue: "VEN".into(),
        year: 2024,
    })
    .collect();
    let (db, _) = build_database(corpus, &gateway)?;
    let references = ReferenceIdeas::from_database(&db);

    // judgments are cached on disk: re-running never re-issues provider calls
    let cache_dir = tempfile::tempdir()?;
    let cache = JudgmentCache::new(cache_dir.path())?;

    let idea = GeneratedIdea {
        id: "gen-1".into(),
        text: "Refine generated programs iteratively using a reward model scored by error resolution.".into(),
    };
    let similarity = match_similarity(&gateway, &idea, &references, Some(&cache))?;
    println!("similarity: idea {} matched {} with score {}",
             similarity.generated_id, similarity.matched_reference_id, similarity.score);

    let novelty = score_novelty(&gateway, &idea, 3, Some(&cache))?;
    println!("\nnovelty: final score {} after {} round(s)", novelty.final_score, novelty.rounds.len());
    for (i, round) in novelty.rounds.iter().enumerate() {
        println!("  round {}: query {:?}, {} hit(s), score {}",
                 i + 1, round.query, round.hits.len(), round.score);
    }

    let pair = vec![
        idea.clone(),
        GeneratedIdea { id: "gen-2".into(), text: "Cluster retrieved papers and keep one representative per cluster.".into() },
    ];
    let ranking = rank_ideas(&gateway, &pair, Some(&cache))?;
    println!("\npairwise ranking (best first): {:?}", ranking.overall);
    for (criterion, order) in &ranking.criteria {
        println!("  {:<16} {:?}", criterion, order);
    }

    // win-rate protocol: one idea sampled per similarity bucket per round
    let buckets: BTreeMap<u8, Vec<GeneratedIdea>> = (0..5u8)
        .map(|b| {
            let ideas = (0..3)
                .map(|i| GeneratedIdea {
                    id: format!("b{}i{}", b, i),
                    text: format!("Bucket {} candidate {} exploring staged retrieval filters.", b, i),
                })
                .collect();
            (b, ideas)
        })
        .collect();
    let report = win_rate(&gateway, &buckets, 8, 99, Some(&cache))?;
    println!("\nwin rates over 8 rounds:");
    for (bucket, rate) in &report.win_rate {
        println!("  similarity bucket {}: {:.2}", bucket, rate);
    }
    Ok(())
}
