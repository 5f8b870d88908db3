//! Conditional independence testing and causal structure search.
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod bench;
pub mod citests;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod pcsearch;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};

// Book chapters run as doc-tests so their snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/cci.md")]
    mod cci {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
