//! Rational Speech Act models of exhaustivity and anti-exhaustivity.
//!
//! Nine model variants over a two-world, three-message scenario, a generic
//! recursive evaluator that serves as their oracle, analytic condition
//! checkers, and a maximum-likelihood fitting pipeline for joint
//! production and comprehension data.

pub mod analysis;
pub mod data;
pub mod engine;
pub mod fitting;
pub mod math;
pub mod models;
pub mod oracle;
pub mod scenario;

/// The guide's code listings, run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/conditions.md")]
    mod conditions {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
