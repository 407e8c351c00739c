//! Content-based image retrieval: upright SURF features, a k-means visual
//! vocabulary, bag-of-visual-words retrieval by cosine similarity, and
//! precision/recall simulation over labelled corpora.
//!
//! The [`executor::Engine`] ties a [`store::Store`] to a
//! [`features::FeatureExtractor`] and an [`index::FeatureIndexer`]; see the
//! guide in `book/` for a walkthrough.

mod codec;
pub mod config;
pub mod error;
pub mod executor;
pub mod features;
pub mod index;
pub mod model;
pub mod simulation;
pub mod store;
pub mod synthetic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/architecture.md")]
    mod architecture {}
    #[doc = include_str!("../../../book/src/store.md")]
    mod store {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/vocabulary.md")]
    mod vocabulary {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
