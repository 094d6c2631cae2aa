//! Reputation mechanism for a cross-venue peer-review system.
//!
//! Users both author and review papers. Each user carries a reputation score
//! in the open interval `(0, 1)` that is updated once per active time interval
//! from the honest/faulty verdicts of their interactions. The crate provides:
//!
//! - [`domain`]: users, tags, papers, venues and interaction records.
//! - [`reputation`]: punishment factor, gain function and the interval update.
//! - [`scoring`]: tag similarity, reviewer competence, weighted paper score
//!   and the accept/reject/borderline pipeline.
//! - [`game`]: the author/reviewer normal-form game and its pure equilibria.
//! - [`attack`]: exact and Monte Carlo majority-cluster attack probabilities.
//! - [`sim`]: a deterministic multi-interval world and the recovery experiment.
//! - [`ledger`]: an append-only, SHA-256 hash-chained event log with replay.

pub mod attack;
pub mod domain;
mod error;
pub mod game;
pub mod ledger;
pub mod reputation;
pub mod rng;
pub mod scoring;
pub mod sim;

pub use error::{Error, Result};
