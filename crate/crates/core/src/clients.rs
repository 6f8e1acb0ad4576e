//! Client state and the honest/malicious proposing and voting policies.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{
    evaluate, local_train, local_train_with, Architecture, EvalScore, LocalSplit, ParamVector,
    Proximal, TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(pub u32);

impl ClientId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// A ballot: approve (+1) or reject (-1) the candidate aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    Accept,
    Reject,
}

impl Vote {
    pub fn sign(self) -> i8 {
        match self {
            Vote::Accept => 1,
            Vote::Reject => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Vote> {
        match sign {
            1 => Some(Vote::Accept),
            -1 => Some(Vote::Reject),
            _ => None,
        }
    }

    pub fn flipped(self) -> Vote {
        match self {
            Vote::Accept => Vote::Reject,
            Vote::Reject => Vote::Accept,
        }
    }
}

/// How a malicious client actually behaves in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Behavior {
    /// Trains on flipped labels when proposing.
    pub poison_proposals: bool,
    /// Inverts the honest vote.
    pub invert_votes: bool,
}

impl Behavior {
    pub const HONEST: Behavior = Behavior {
        poison_proposals: false,
        invert_votes: false,
    };
}

/// Data-poisoning attack parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// Probability that each training label is flipped.
    pub flip_rate: f64,
    /// Weight of the `||θ - θ_global||²` penalty keeping the update close.
    pub proximal_weight: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            flip_rate: 1.0,
            proximal_weight: 0.1,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.flip_rate > 0.0 && self.flip_rate <= 1.0) {
            return Err(Error::invalid("flip_rate", "must lie in (0, 1]"));
        }
        if !(self.proximal_weight.is_finite() && self.proximal_weight >= 0.0) {
            return Err(Error::invalid("proximal_weight", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: ClientId,
    pub tokens: f64,
    /// Ground-truth membership in the malicious set.
    pub malicious: bool,
    pub behavior: Behavior,
    pub active: bool,
    pub data: Arc<LocalSplit>,
    /// Validation score of the last accepted model this client scored.
    pub last_score: EvalScore,
}

impl ClientState {
    pub fn new(id: ClientId, tokens: f64, malicious: bool, behavior: Behavior, data: Arc<LocalSplit>) -> Self {
        Self {
            id,
            tokens,
            malicious,
            behavior,
            active: tokens > 0.0,
            data,
            last_score: EvalScore::new(0.0).expect("0 is a valid score"),
        }
    }

    /// Number of local training examples reported to the aggregator.
    pub fn n_k(&self) -> usize {
        self.data.train.len()
    }
}

fn require_active(client: &ClientState) -> Result<()> {
    if client.active {
        Ok(())
    } else {
        Err(Error::Protocol(format!("client {} is inactive", client.id)))
    }
}

/// Trains a local update from the global parameters.
///
/// Honest clients train on their clean split. Poisoning clients flip each
/// label with probability `flip_rate` and keep a proximal pull toward the
/// global parameters. `n_k` is always reported truthfully.
pub fn propose(
    client: &ClientState,
    global: &ParamVector,
    cfg: &TrainConfig,
    attack: &AttackConfig,
) -> Result<(ParamVector, usize)> {
    require_active(client)?;
    let params = if client.malicious && client.behavior.poison_proposals {
        attack.validate()?;
        let mut flip_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let poisoned = client
            .data
            .train
            .map_labels(|_, l| if flip_rng.random_bool(attack.flip_rate) { 1 - l } else { l });
        let prox = Proximal {
            anchor: global,
            weight: attack.proximal_weight,
        };
        local_train_with(global, &poisoned, cfg, Some(prox))?
    } else {
        local_train(global, &client.data.train, cfg)?
    };
    Ok((params, client.n_k()))
}

/// Scores a candidate on the client's private validation split.
pub fn local_validate(client: &ClientState, candidate: &ParamVector, arch: &Architecture) -> Result<EvalScore> {
    require_active(client)?;
    evaluate(candidate, arch, &client.data.validation)
}

/// The honest rule accepts iff `s_new >= (1 - ε) · last_score`; dishonest
/// voters return the opposite ballot.
pub fn cast_vote(client: &ClientState, s_new: EvalScore, epsilon: f64) -> Vote {
    let honest = honest_vote(s_new.value(), client.last_score.value(), epsilon);
    if client.malicious && client.behavior.invert_votes {
        honest.flipped()
    } else {
        honest
    }
}

pub fn honest_vote(s_new: f64, last_score: f64, epsilon: f64) -> Vote {
    if s_new >= (1.0 - epsilon) * last_score {
        Vote::Accept
    } else {
        Vote::Reject
    }
}
