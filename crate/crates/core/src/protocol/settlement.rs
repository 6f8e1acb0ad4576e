//! Reward-and-slash settlement for proposers and voters.
//!
//! Stakes are escrowed logically: only the losing side is debited. A client
//! that cannot cover its stake forfeits what it has and is removed, and so is
//! any client whose balance lands on exactly zero.

use super::{Decision, Pools};
use crate::clients::{ClientId, ClientState, Vote};

/// Anything holding a token balance, indexed by client id in a slice.
pub trait TokenAccount {
    fn tokens(&self) -> f64;
    fn set_tokens(&mut self, tokens: f64);
}

impl TokenAccount for f64 {
    fn tokens(&self) -> f64 {
        *self
    }

    fn set_tokens(&mut self, tokens: f64) {
        *self = tokens;
    }
}

impl TokenAccount for ClientState {
    fn tokens(&self) -> f64 {
        self.tokens
    }

    fn set_tokens(&mut self, tokens: f64) {
        self.tokens = tokens;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settlement {
    /// Signed balance change per settled participant, in input order.
    pub deltas: Vec<(ClientId, f64)>,
    /// Clients whose balance reached zero and who leave the system.
    pub removed: Vec<ClientId>,
}

/// Debits `stake` from a losing participant into `pool`.
fn slash<A: TokenAccount>(account: &mut A, id: ClientId, stake: f64, pool: &mut f64, out: &mut Settlement) {
    let before = account.tokens();
    let paid = if before >= stake { stake } else { before };
    let after = if before >= stake { before - stake } else { 0.0 };
    account.set_tokens(after);
    *pool += paid;
    out.deltas.push((id, -paid));
    if after <= 0.0 {
        out.removed.push(id);
    }
}

/// Proposer settlement. On rejection every proposer pays `gamma_p` into
/// `pool_p` (or forfeits everything and is removed). On acceptance a positive
/// `pool_p` is split equally among the proposers and emptied.
pub fn settle_proposers<A: TokenAccount>(
    decision: Decision,
    proposers: &[ClientId],
    pools: &mut Pools,
    gamma_p: f64,
    accounts: &mut [A],
) -> Settlement {
    let mut out = Settlement::default();
    match decision {
        Decision::Reject => {
            for &id in proposers {
                slash(&mut accounts[id.index()], id, gamma_p, &mut pools.pool_p, &mut out);
            }
        }
        Decision::Accept => {
            if pools.pool_p > 0.0 && !proposers.is_empty() {
                let share = pools.pool_p / proposers.len() as f64;
                for &id in proposers {
                    let acct = &mut accounts[id.index()];
                    acct.set_tokens(acct.tokens() + share);
                    out.deltas.push((id, share));
                }
                pools.pool_p = 0.0;
            }
        }
    }
    out
}

/// Voter settlement. Voters whose ballot differs from the decision pay
/// `gamma_v` into `pool_v` (or forfeit everything and are removed); the pool
/// is then split equally among the majority and emptied.
pub fn settle_voters<A: TokenAccount>(
    decision: Decision,
    ballots: &[(ClientId, Vote)],
    pools: &mut Pools,
    gamma_v: f64,
    accounts: &mut [A],
) -> Settlement {
    let mut out = Settlement::default();
    let majority: Vec<ClientId> = ballots
        .iter()
        .filter(|(_, v)| decision.agrees_with(*v))
        .map(|&(id, _)| id)
        .collect();
    for &(id, vote) in ballots {
        if !decision.agrees_with(vote) {
            slash(&mut accounts[id.index()], id, gamma_v, &mut pools.pool_v, &mut out);
        }
    }
    if !majority.is_empty() {
        let share = pools.pool_v / majority.len() as f64;
        for &id in &majority {
            let acct = &mut accounts[id.index()];
            acct.set_tokens(acct.tokens() + share);
            out.deltas.push((id, share));
        }
        pools.pool_v = 0.0;
    }
    out
}
