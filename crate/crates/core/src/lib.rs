//! Rezoning school attendance boundaries to reduce segregation, and the
//! statistics behind a cluster-randomized outreach experiment.

pub mod error;
pub mod lab;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/districts.md")]
    mod districts {}
    #[doc = include_str!("../../../book/src/dissimilarity.md")]
    mod dissimilarity {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/outreach.md")]
    mod outreach {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
