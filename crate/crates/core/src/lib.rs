//! Stake-based federated learning simulator.
//!
//! Clients take turns proposing local model updates and voting on the
//! aggregated candidate with their private validation data. Votes decide
//! whether the candidate is committed, and tokens move from the losing side
//! to the winning side after every round. Each round is sealed into a
//! hash-chained ledger.
//!
//! - [`learner`]: logistic / MLP classifier, SGD, FedAVG, partitioning.
//! - [`clients`]: honest and malicious proposing and voting.
//! - [`protocol`]: selection, tally, settlement, the round engine.
//! - [`ledger`]: blocks, verification, JSON-lines export.
//! - [`analysis`]: expected-return check, series, survival, costs, export.
//! - [`experiment`]: experiment specs and the batch commands.

pub mod analysis;
pub mod clients;
pub mod error;
pub mod experiment;
pub mod ledger;
pub mod learner;
pub mod protocol;
pub mod seed;

pub use error::{Error, Result};
