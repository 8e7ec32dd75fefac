//! Exact top-k cosine search plus entity-graph and co-citation queries.
//!
//! Run: `cargo run --example semantic_search`

use scipip::corpus::CorpusDatabase;
use scipip::index::{CoCitationIndex, EmbeddingField, EntityGraph, VectorIndex};
use scipip::util::test_support::paper_with;
use scipip::Gateway;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gateway = Gateway::mock(7, 64);

    // hand-assembled records: the encoder embeds each background text
    let specs: Vec<(&str, &str, Vec<&str>, Vec<&str>)> = vec![
        ("p1", "dense retrieval for open domain question answering",
         vec!["dense retrieval", "question answering"], vec!["p2", "p4"]),
        ("p2", "hard negative mining for retrieval encoders",
         vec!["dense retrieval", "negative mining"], vec!["p1", "p4"]),
        ("p3", "graph attention networks for molecules",
         vec!["graph attention", "molecular property"], vec!["p1", "p4"]),
        ("p4", "sparse attention kernels for long documents",
         vec!["sparse attention", "long documents"], vec![]),
        ("p5", "question answering over structured tables",
         vec!["question answering", "table reasoning"], vec!["p1", "p2"]),
    ];
    let mut db = CorpusDatabase::new(64);
    for (id, background, entities, refs) in specs {
        let mut record = paper_with(id, gateway.embed(background)?, &entities, &refs);
        record.background = background.to_string();
        db.put_paper(record)?;
    }

    let index = VectorIndex::build(&db, EmbeddingField::Background);
    let query = "open domain question answering with retrieval";
    println!("query: {:?}", query);
    for (id, score) in index.topk_cosine(&gateway.embed(query)?, 3)? {
        println!("  {:.4}  {}  {}", score, id, db.get_paper(&id).unwrap().background);
    }

    let graph = EntityGraph::build(&db);
    println!("\npapers with entity \"question answering\": {:?}",
             graph.papers_with_entity("question answering"));
    println!("entities co-occurring with \"dense retrieval\" (m=2): {:?}",
             graph.co_occurring_entities("dense retrieval", 2));
    println!("document frequency of \"question answering\": {}",
             graph.document_frequency("question answering"));

    let cocite = CoCitationIndex::build(&db);
    println!("\nco-citation count (p1, p4): {}", cocite.count("p1", "p4"));
    println!("top co-cited partners of p1: {:?}", cocite.top_co_cited("p1", 2, &db));
    Ok(())
}
