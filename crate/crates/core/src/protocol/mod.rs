//! The round engine: selection, training, candidate aggregation, private
//! validation, majority voting, settlement and block creation.

mod engine;
pub mod settlement;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clients::{ClientId, Vote};
use crate::error::{Error, Result};

pub use engine::{build_population, run_simulation, PopulationInfo, PopulationSpec, Simulation};
pub use settlement::{settle_proposers, settle_voters, Settlement, TokenAccount};

/// Outcome of the majority vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn sign(self) -> i8 {
        match self {
            Decision::Accept => 1,
            Decision::Reject => -1,
        }
    }

    pub fn agrees_with(self, vote: Vote) -> bool {
        self.sign() == vote.sign()
    }

    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

/// Escrow for forfeited proposer and voter stakes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pools {
    pub pool_p: f64,
    pub pool_v: f64,
}

impl Pools {
    pub fn total(&self) -> f64 {
        self.pool_p + self.pool_v
    }
}

/// Whether candidates go to a vote or are committed unconditionally
/// (plain FedAVG baseline, no settlement).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Voting,
    AlwaysAccept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundConfig {
    /// Share of active clients drawn as proposers each round.
    pub proposer_fraction: f64,
    /// Share of the remaining active clients drawn as voters.
    pub voter_fraction: f64,
    /// Tolerated relative drop in validation score.
    pub epsilon: f64,
    pub gamma_p: f64,
    pub gamma_v: f64,
    pub initial_tokens: f64,
    pub rounds: u64,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            proposer_fraction: 0.10,
            voter_fraction: 1.0,
            epsilon: 0.05,
            gamma_p: 8.0,
            gamma_v: 4.0,
            initial_tokens: 64.0,
            rounds: 200,
            seed: 0,
            aggregation: Aggregation::Voting,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.proposer_fraction > 0.0 && self.proposer_fraction < 1.0) {
            return Err(Error::invalid("proposer_fraction", "must lie in (0, 1)"));
        }
        if !(self.voter_fraction > 0.0 && self.voter_fraction <= 1.0) {
            return Err(Error::invalid("voter_fraction", "must lie in (0, 1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
        }
        for (key, v) in [
            ("gamma_p", self.gamma_p),
            ("gamma_v", self.gamma_v),
            ("initial_tokens", self.initial_tokens),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, "must be positive"));
            }
        }
        Ok(())
    }
}

/// One voter's private score and ballot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: ClientId,
    pub score: f64,
    pub vote: Vote,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based round number.
    pub round: u64,
    pub proposers: Vec<ClientId>,
    pub voters: Vec<ClientId>,
    pub ballots: Vec<Ballot>,
    pub decision: Decision,
    /// Voters whose ballot matched the decision.
    pub majority_set: Vec<ClientId>,
    pub token_deltas: Vec<(ClientId, f64)>,
    pub removed: Vec<ClientId>,
    pub pools_after: Pools,
    /// Every client's balance after settlement, indexed by client id.
    pub balances: Vec<f64>,
    /// Mean validation score of the committed model over honest clients.
    pub global_score: f64,
    /// Accuracy of the committed model on the held-out test set, if any.
    pub test_accuracy: Option<f64>,
}

impl RoundReport {
    pub fn empty(round: u64) -> Self {
        Self {
            round,
            proposers: Vec::new(),
            voters: Vec::new(),
            ballots: Vec::new(),
            decision: Decision::Reject,
            majority_set: Vec::new(),
            token_deltas: Vec::new(),
            removed: Vec::new(),
            pools_after: Pools::default(),
            balances: Vec::new(),
            global_score: 0.0,
            test_accuracy: None,
        }
    }
}

/// `Accept` iff the ballot sum is strictly positive; ties reject.
pub fn tally_votes(votes: &[Vote]) -> Result<Decision> {
    if votes.is_empty() {
        return Err(Error::Protocol("cannot tally an empty vote set".into()));
    }
    let sum: i64 = votes.iter().map(|v| i64::from(v.sign())).sum();
    Ok(if sum > 0 { Decision::Accept } else { Decision::Reject })
}

/// Number of proposers for `active` clients: `max(1, round(fraction·active))`,
/// leaving at least one client to vote.
pub fn proposer_count(active: usize, fraction: f64) -> usize {
    ((fraction * active as f64).round() as usize).clamp(1, active.saturating_sub(1).max(1))
}

/// Draws disjoint proposer and voter sets, each returned in ascending order.
/// With `with_voters == false` only proposers are drawn.
pub fn select_participants<R: Rng + ?Sized>(
    active: &[ClientId],
    cfg: &RoundConfig,
    with_voters: bool,
    rng: &mut R,
) -> Result<(Vec<ClientId>, Vec<ClientId>)> {
    let n = active.len();
    if n < 2 {
        return Err(Error::PopulationExhausted { active: n });
    }
    let n_p = proposer_count(n, cfg.proposer_fraction);
    let picked = sample(rng, n, n);
    let order: Vec<usize> = picked.into_iter().collect();
    let mut proposers: Vec<ClientId> = order[..n_p].iter().map(|&i| active[i]).collect();
    proposers.sort_unstable();
    let mut voters = Vec::new();
    if with_voters {
        let rest = n - n_p;
        let n_v = ((cfg.voter_fraction * rest as f64).round() as usize).clamp(1, rest);
        voters = order[n_p..n_p + n_v].iter().map(|&i| active[i]).collect();
        voters.sort_unstable();
    }
    Ok((proposers, voters))
}
