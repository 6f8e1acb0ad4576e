use std::sync::Arc;

use log::warn;
use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::settlement::{settle_proposers, settle_voters};
use super::{select_participants, tally_votes, Aggregation, Ballot, Decision, Pools, RoundConfig, RoundReport};
use crate::clients::{cast_vote, local_validate, propose, AttackConfig, Behavior, ClientId, ClientState, Vote};
use crate::error::{Error, Result};
use crate::ledger::{append_block, model_digest, Chain};
use crate::learner::{
    evaluate, fedavg, init_params, local_split, partition, Dataset, EvalScore, ParamVector, PartitionMode,
    TrainConfig,
};
use crate::seed::derive_seed;

/// How to carve a training set into a client population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub clients: usize,
    /// Fraction of clients that are malicious; rounded to a whole count.
    pub eta: f64,
    pub behavior: Behavior,
    pub partition: PartitionMode,
    pub seed: u64,
}

/// What analysis needs to know about a run's population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationInfo {
    pub initial_tokens: f64,
    pub malicious: Vec<bool>,
}

impl PopulationInfo {
    pub fn from_clients(clients: &[ClientState], initial_tokens: f64) -> Self {
        Self {
            initial_tokens,
            malicious: clients.iter().map(|c| c.malicious).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.malicious.len()
    }

    pub fn is_empty(&self) -> bool {
        self.malicious.is_empty()
    }
}

/// Partitions `train` across `spec.clients` clients, splits each share 80/20
/// into local train/validation, and marks `round(eta·K)` uniformly chosen
/// clients malicious.
pub fn build_population(train: &Dataset, spec: &PopulationSpec, initial_tokens: f64) -> Result<Vec<ClientState>> {
    if !(0.0..=1.0).contains(&spec.eta) {
        return Err(Error::invalid("eta", "must lie in [0, 1]"));
    }
    if spec.eta >= 0.5 {
        warn!("eta = {} violates the honest-majority assumption", spec.eta);
    }
    let parts = partition(train, spec.clients, spec.partition, derive_seed(spec.seed, "partition", 0))?;
    let n_malicious = (spec.eta * spec.clients as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "malicious", 0));
    let mut malicious = vec![false; spec.clients];
    for i in sample(&mut rng, spec.clients, n_malicious) {
        malicious[i] = true;
    }
    parts
        .iter()
        .enumerate()
        .map(|(i, part)| {
            let split = local_split(part, derive_seed(spec.seed, "local-split", i as u64))?;
            Ok(ClientState::new(
                ClientId(i as u32),
                initial_tokens,
                malicious[i],
                spec.behavior,
                Arc::new(split),
            ))
        })
        .collect()
}

/// A running simulation. Owns the client population, committed model, pools
/// and chain; advances one round per [`Simulation::run_round`].
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: RoundConfig,
    train: TrainConfig,
    attack: AttackConfig,
    clients: Vec<ClientState>,
    global: ParamVector,
    pools: Pools,
    chain: Chain,
    rng: ChaCha8Rng,
    round: u64,
    test_set: Option<Dataset>,
}

impl Simulation {
    /// Sets every client's reference score by validating the initial model.
    pub fn new(
        cfg: RoundConfig,
        train: TrainConfig,
        attack: AttackConfig,
        mut clients: Vec<ClientState>,
        initial_model: ParamVector,
        test_set: Option<Dataset>,
    ) -> Result<Self> {
        cfg.validate()?;
        train.validate()?;
        attack.validate()?;
        if clients.iter().enumerate().any(|(i, c)| c.id.index() != i) {
            return Err(Error::config("client ids must equal their position"));
        }
        for c in &mut clients {
            c.last_score = evaluate(&initial_model, &train.architecture, &c.data.validation)?;
        }
        if let Some(test) = &test_set {
            evaluate(&initial_model, &train.architecture, test)?;
        }
        let chain = Chain::new(model_digest(&initial_model));
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "rounds", 0));
        Ok(Self {
            cfg,
            train,
            attack,
            clients,
            global: initial_model,
            pools: Pools::default(),
            chain,
            rng,
            round: 0,
            test_set,
        })
    }

    pub fn config(&self) -> &RoundConfig {
        &self.cfg
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn clients_mut(&mut self) -> &mut [ClientState] {
        &mut self.clients
    }

    pub fn global(&self) -> &ParamVector {
        &self.global
    }

    /// Replaces the committed model and resets every client's reference
    /// score against it.
    pub fn set_global(&mut self, model: ParamVector) -> Result<()> {
        for c in &mut self.clients {
            c.last_score = evaluate(&model, &self.train.architecture, &c.data.validation)?;
        }
        self.global = model;
        Ok(())
    }

    pub fn pools(&self) -> Pools {
        self.pools
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn into_chain(self) -> Chain {
        self.chain
    }

    pub fn rounds_completed(&self) -> u64 {
        self.round
    }

    pub fn population_info(&self) -> PopulationInfo {
        PopulationInfo::from_clients(&self.clients, self.cfg.initial_tokens)
    }

    /// Σ balances + both pools.
    pub fn total_tokens(&self) -> f64 {
        self.clients.iter().map(|c| c.tokens).sum::<f64>() + self.pools.total()
    }

    pub fn active_ids(&self) -> Vec<ClientId> {
        self.clients.iter().filter(|c| c.active).map(|c| c.id).collect()
    }

    /// Mean validation score of `model` over honest clients, active or not.
    fn honest_score(&self, model: &ParamVector) -> Result<f64> {
        let honest: Vec<&ClientState> = self.clients.iter().filter(|c| !c.malicious).collect();
        if honest.is_empty() {
            return Ok(f64::NAN);
        }
        let mut total = 0.0;
        for c in &honest {
            total += evaluate(model, &self.train.architecture, &c.data.validation)?.value();
        }
        Ok(total / honest.len() as f64)
    }

    pub fn run_round(&mut self) -> Result<RoundReport> {
        let voting = self.cfg.aggregation == Aggregation::Voting;
        let active = self.active_ids();
        let (proposers, voters) = select_participants(&active, &self.cfg, voting, &mut self.rng)?;
        let round_seed = self.rng.next_u64();
        let round = self.round + 1;

        let mut updates = Vec::with_capacity(proposers.len());
        for &id in &proposers {
            let cfg = self.train.with_seed(derive_seed(round_seed, "train", u64::from(id.0)));
            updates.push(propose(&self.clients[id.index()], &self.global, &cfg, &self.attack)?);
        }
        let candidate = fedavg(&updates)?;

        let mut ballots = Vec::with_capacity(voters.len());
        for &id in &voters {
            let client = &self.clients[id.index()];
            let score = local_validate(client, &candidate, &self.train.architecture)?;
            ballots.push(Ballot {
                voter: id,
                score: score.value(),
                vote: cast_vote(client, score, self.cfg.epsilon),
            });
        }
        let decision = if voting {
            let votes: Vec<Vote> = ballots.iter().map(|b| b.vote).collect();
            tally_votes(&votes)?
        } else {
            Decision::Accept
        };

        if decision.is_accept() {
            self.global = candidate;
            for b in &ballots {
                self.clients[b.voter.index()].last_score = EvalScore::new(b.score)?;
            }
        }

        let mut token_deltas = Vec::new();
        let mut removed = Vec::new();
        if voting {
            let p = settle_proposers(decision, &proposers, &mut self.pools, self.cfg.gamma_p, &mut self.clients);
            let pairs: Vec<(ClientId, Vote)> = ballots.iter().map(|b| (b.voter, b.vote)).collect();
            let v = settle_voters(decision, &pairs, &mut self.pools, self.cfg.gamma_v, &mut self.clients);
            for s in [p, v] {
                token_deltas.extend(s.deltas);
                removed.extend(s.removed);
            }
            token_deltas.sort_by_key(|&(id, _)| id);
            removed.sort_unstable();
            for id in &removed {
                self.clients[id.index()].active = false;
            }
        }

        let majority_set = ballots
            .iter()
            .filter(|b| decision.agrees_with(b.vote))
            .map(|b| b.voter)
            .collect();
        let test_accuracy = match &self.test_set {
            Some(test) => Some(evaluate(&self.global, &self.train.architecture, test)?.value()),
            None => None,
        };
        let report = RoundReport {
            round,
            proposers,
            voters,
            ballots,
            decision,
            majority_set,
            token_deltas,
            removed,
            pools_after: self.pools,
            balances: self.clients.iter().map(|c| c.tokens).collect(),
            global_score: self.honest_score(&self.global)?,
            test_accuracy,
        };
        append_block(&mut self.chain, &report, &self.global);
        self.round = round;
        Ok(report)
    }

    /// Runs the configured number of rounds, stopping early when fewer than
    /// two clients remain.
    pub fn run(&mut self) -> Result<Vec<RoundReport>> {
        let mut reports = Vec::with_capacity(self.cfg.rounds as usize);
        while self.round < self.cfg.rounds {
            match self.run_round() {
                Ok(r) => reports.push(r),
                Err(Error::PopulationExhausted { active }) => {
                    warn!("stopping after round {}: {active} active client(s) left", self.round);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(reports)
    }
}

/// Builds the population from `train`, initializes the model from the run
/// seed, and plays every round.
pub fn run_simulation(
    cfg: &RoundConfig,
    train_cfg: &TrainConfig,
    attack: &AttackConfig,
    population: &PopulationSpec,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<(Chain, Vec<RoundReport>, PopulationInfo)> {
    let clients = build_population(train, population, cfg.initial_tokens)?;
    let init = init_params(&train_cfg.architecture, train.dim(), derive_seed(cfg.seed, "init", 0))?;
    let mut sim = Simulation::new(cfg.clone(), train_cfg.clone(), *attack, clients, init, test.cloned())?;
    let reports = sim.run()?;
    let info = sim.population_info();
    Ok((sim.into_chain(), reports, info))
}
