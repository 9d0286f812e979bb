//! Universal mixture prediction for binary sequences.
//!
//! The crate builds Bayes mixtures `ξ` over finite classes of sequence
//! measures, computes the expected error, distance and relative-entropy
//! functionals of probabilistic and thresholding predictors by exact tree
//! enumeration or seeded Monte Carlo, and checks the error bounds relating
//! `ξ`, the informed predictor `μ`, and arbitrary predictors `ρ`.
//!
//! Modules, bottom up:
//!
//! - [`measures`]: binary strings, the [`measures::SequenceMeasure`] trait,
//!   Bernoulli / Markov / deterministic families.
//! - [`semimeasure`]: bounded enumeration of a toy monotone machine and its
//!   normalization.
//! - [`universal`]: weighted classes, the mixture `ξ`, complexity surrogates.
//! - [`predictors`]: predictors, thresholding, per-step quantities and
//!   expectation reports.
//! - [`bounds`]: relation checks on exact reports.
//! - [`inequality_lab`]: grid scans of the pointwise inequalities behind the
//!   bounds.
//! - [`dicegame`]: the two-dice betting game.

#![forbid(unsafe_code)]

pub mod bounds;
pub mod dicegame;
pub mod error;
pub mod inequality_lab;
pub mod measures;
pub mod predictors;
pub mod semimeasure;
pub mod universal;

pub use error::{Error, Result};
