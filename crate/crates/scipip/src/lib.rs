//! Literature retrieval and idea proposal over a locally built paper corpus.
//!
//! The crate is organized around a persistent corpus database and a set of
//! query-time structures built on top of it:
//!
//! - [`corpus`] — paper records, on-disk database layout, ingestion format
//! - [`providers`] — chat / embedding / literature-search contracts with
//!   deterministic mocks and HTTP-backed implementations
//! - [`extraction`] — derives entities, summaries, ideas, core references and
//!   embeddings for every paper, i.e. the database construction pipeline
//! - [`index`] — exact top-k cosine search, the paper–entity graph and the
//!   co-citation index
//! - [`retrieval`] — three-channel retrieval over semantics, entities and
//!   citation co-occurrence, with full provenance
//! - [`clustering`] — greedy leader clustering of retrieved papers and
//!   representative selection
//! - [`proposer`] — the staged idea pipelines (variants A, B, C)
//! - [`evaluation`] — similarity / novelty / ranking judges and the
//!   recall-at-k harness with its ablation runner
//! - [`config`] + [`cli`] — run configuration and the command-line front end
//!
//! Runnable demos for each capability live under `examples/`; the `scipip`
//! binary exposes the same functionality as `build-db`, `retrieve`,
//! `propose` and `eval` subcommands.

pub mod cli;
pub mod clustering;
pub mod config;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod ideas;
pub mod index;
pub mod proposer;
pub mod providers;
pub mod retrieval;
pub mod util;

pub use corpus::{CorpusDatabase, PaperRecord, RawPaper};
pub use providers::{Gateway, ProviderError};
