//! Three-channel literature retrieval with entity expansion, clustering and
//! per-paper provenance.
//!
//! Run: `cargo run --example retrieve_literature`

use scipip::clustering::{cluster, representatives, ClusterConfig};
use scipip::extraction::build_database;
use scipip::index::Indexes;
use scipip::retrieval::{retrieve, RetrievalConfig};
use scipip::{Gateway, RawPaper};

fn corpus() -> Vec<RawPaper> {
    let topics = [
        ("lit-01", "Graph Models", "Graph neural models improve link prediction over sparse citation networks."),
        ("lit-02", "Retrieval Tuning", "Dense retrieval tuning with contrastive negatives boosts recall substantially."),
        ("lit-03", "Prompt Stability", "Prompt structure stability affects downstream extraction quality across domains."),
        ("lit-04", "Sparse Attention", "Sparse attention kernels reduce memory pressure for long document transformers."),
        ("lit-05", "Citation Dynamics", "Citation dynamics reveal latent topical bridges between research communities."),
        ("lit-06", "Synonym Mining", "Synonym mining aligns query vocabulary with corpus terminology for search."),
    ];
    topics
        .iter()
        .map(|(id, title, abstract_text)| RawPaper {
            id: id.to_string(),
            title: title.to_string(),
            abstract_text: abstract_text.to_string(),
            introduction: format!("Motivation citing [1]. {}", abstract_text),
            method: "Stages: extraction, filtering, refinement, ablations.".into(),
            references: vec!["lit-01".into(), "lit-02".into()],
            venue: "VEN".into(),
            year: 2024,
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = Gateway::mock(11, 64);
    let (db, _) = build_database(corpus(), &gateway)?;
    let indexes = Indexes::build(&db);

    let background = "Retrieval quality for literature recommendation degrades when queries use synonyms of corpus terminology.";
    let config = RetrievalConfig { k_semantic: 4, ..Default::default() };
    let result = retrieve(&gateway, background, &[], &config, &db, &indexes)?;

    println!("background: {}\n", background);
    println!("expanded entity set:");
    println!("  seeds:        {:?}", result.expanded.seeds);
    println!("  synonyms:     {:?}", result.expanded.synonyms);
    println!("  neighborhood: {:?}", result.expanded.neighborhood);

    println!("\nchannels: |N1|={} |N2|={} |N3|={} union={}",
             result.n1.len(), result.n2.len(), result.n3.len(), result.union.len());
    for (id, channels) in &result.provenance {
        let score = result
            .semantic_scores
            .get(id)
            .map(|s| format!("{:.3}", s))
            .unwrap_or_else(|| "  -  ".into());
        println!("  {}  sem={}  via {:?}", id, score, channels);
    }

    let clustering = cluster(&result.union, &db, &ClusterConfig::default())?;
    println!("\n{} cluster(s):", clustering.len());
    for c in &clustering.clusters {
        println!("  leader {}  members {:?}  representative {}", c.leader, c.members, c.representative);
    }
    println!("representatives: {:?}", representatives(&clustering));
    Ok(())
}
