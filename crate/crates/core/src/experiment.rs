//! Experiment specs, config parsing, scenario wiring, and the batch commands
//! behind the `stakefl` binary.

use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, award_slash_counts, mc_expected_return, survival_stats, token_timeseries, ExportFormat, Group, RunTag,
    TheoremParams, TimeSeries,
};
use crate::clients::{AttackConfig, Behavior};
use crate::error::{Error, Result};
use crate::ledger::{export_chain, verify_chain_file, Chain, FileVerdict};
use crate::learner::{
    evaluate, init_params, load_csv, local_train, make_synthetic, Dataset, PartitionMode, TrainConfig,
};
use crate::protocol::{build_population, run_simulation, Aggregation, PopulationInfo, PopulationSpec, RoundConfig, RoundReport};
use crate::seed::derive_seed;

/// Environment variable that replaces the default output root.
pub const OUTPUT_ENV: &str = "STAKEFL_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
/// Rounds averaged for the reported final accuracy.
pub const FINAL_ACCURACY_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    /// Malicious clients poison proposals and vote dishonestly.
    #[default]
    Full,
    /// Malicious clients propose honestly but invert their votes.
    HonestProposersMaliciousVoters,
    /// Malicious clients poison proposals but vote honestly.
    MaliciousProposersHonestVoters,
    /// Plain FedAVG with poisoning clients: no vote, every candidate commits.
    FedavgWithMalicious,
    /// Plain FedAVG with no malicious clients.
    FedavgNoMalicious,
    /// One learner trained centrally on the pooled client data.
    Oracle,
}

impl Scenario {
    pub fn behavior(self) -> Behavior {
        match self {
            Scenario::Full => Behavior {
                poison_proposals: true,
                invert_votes: true,
            },
            Scenario::HonestProposersMaliciousVoters => Behavior {
                poison_proposals: false,
                invert_votes: true,
            },
            Scenario::MaliciousProposersHonestVoters | Scenario::FedavgWithMalicious => Behavior {
                poison_proposals: true,
                invert_votes: false,
            },
            Scenario::FedavgNoMalicious | Scenario::Oracle => Behavior::HONEST,
        }
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            Scenario::FedavgWithMalicious | Scenario::FedavgNoMalicious | Scenario::Oracle => Aggregation::AlwaysAccept,
            _ => Aggregation::Voting,
        }
    }

    /// Malicious share actually used for this scenario.
    pub fn effective_eta(self, eta: f64) -> f64 {
        match self {
            Scenario::FedavgNoMalicious | Scenario::Oracle => 0.0,
            _ => eta,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Full => "full",
            Scenario::HonestProposersMaliciousVoters => "honest_proposers_malicious_voters",
            Scenario::MaliciousProposersHonestVoters => "malicious_proposers_honest_voters",
            Scenario::FedavgWithMalicious => "fedavg_with_malicious",
            Scenario::FedavgNoMalicious => "fedavg_no_malicious",
            Scenario::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic { n: usize, d: usize, separation: f64, seed: u64 },
    Csv { path: PathBuf, label_column: String },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n: 6000,
            d: 10,
            separation: 4.0,
            seed: 1,
        }
    }
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Synthetic { n, d, separation, seed } => make_synthetic(*n, *d, *separation, *seed),
            DatasetSpec::Csv { path, label_column } => load_csv(path, label_column),
        }
    }

    /// `synthetic` or `csv:<path>:<label_column>`.
    pub fn parse_flag(s: &str) -> Result<Self> {
        if s == "synthetic" {
            return Ok(DatasetSpec::default());
        }
        if let Some(rest) = s.strip_prefix("csv:") {
            if let Some((path, label)) = rest.rsplit_once(':') {
                if !path.is_empty() && !label.is_empty() {
                    return Ok(DatasetSpec::Csv {
                        path: PathBuf::from(path),
                        label_column: label.to_string(),
                    });
                }
            }
        }
        Err(Error::invalid("dataset", "expected `synthetic` or `csv:<path>:<label_column>`"))
    }
}

/// A full experiment: scenario, population, protocol constants, learner,
/// attack, data, and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub eta: f64,
    pub gamma_p: f64,
    pub gamma_v: f64,
    pub epsilon: f64,
    pub clients: usize,
    pub rounds: u64,
    pub seeds: Vec<u64>,
    pub initial_tokens: f64,
    pub proposer_fraction: f64,
    pub voter_fraction: f64,
    /// Share of the dataset held out as the global test set.
    pub test_fraction: f64,
    pub dataset: DatasetSpec,
    pub partition: PartitionMode,
    pub attack: AttackConfig,
    pub train: TrainConfig,
    pub format: ExportFormat,
    pub output_dir: Option<PathBuf>,
    /// Permits `eta >= 0.5` for stress runs.
    pub force: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let round = RoundConfig::default();
        Self {
            scenario: Scenario::default(),
            eta: 0.2,
            gamma_p: round.gamma_p,
            gamma_v: round.gamma_v,
            epsilon: round.epsilon,
            clients: 50,
            rounds: round.rounds,
            seeds: vec![0],
            initial_tokens: round.initial_tokens,
            proposer_fraction: round.proposer_fraction,
            voter_fraction: round.voter_fraction,
            test_fraction: 0.2,
            dataset: DatasetSpec::default(),
            partition: PartitionMode::default(),
            attack: AttackConfig::default(),
            train: TrainConfig::default(),
            format: ExportFormat::default(),
            output_dir: None,
            force: false,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub eta: Option<f64>,
    pub gamma_p: Option<f64>,
    pub gamma_v: Option<f64>,
    pub epsilon: Option<f64>,
    pub clients: Option<usize>,
    pub rounds: Option<u64>,
    pub scenario: Option<Scenario>,
    pub dataset: Option<String>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

impl ExperimentSpec {
    pub fn round_config(&self, seed: u64) -> RoundConfig {
        RoundConfig {
            proposer_fraction: self.proposer_fraction,
            voter_fraction: self.voter_fraction,
            epsilon: self.epsilon,
            gamma_p: self.gamma_p,
            gamma_v: self.gamma_v,
            initial_tokens: self.initial_tokens,
            rounds: self.rounds,
            seed,
            aggregation: self.scenario.aggregation(),
        }
    }

    pub fn population_spec(&self, seed: u64) -> PopulationSpec {
        PopulationSpec {
            clients: self.clients,
            eta: self.scenario.effective_eta(self.eta),
            behavior: self.scenario.behavior(),
            partition: self.partition,
            seed,
        }
    }

    /// The stake that names output files: voter stake when only voters
    /// misbehave, proposer stake otherwise.
    pub fn naming_gamma(&self) -> f64 {
        match self.scenario {
            Scenario::HonestProposersMaliciousVoters => self.gamma_v,
            _ => self.gamma_p,
        }
    }

    pub fn output_root(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
    }

    pub fn validate(&self) -> Result<()> {
        let max_eta = if self.force { 1.0 } else { 0.5 };
        if !(self.eta >= 0.0 && self.eta < max_eta) {
            let reason = if self.force {
                "must lie in [0, 1)".to_string()
            } else {
                format!("{} must lie in [0, 0.5) (honest majority); pass --force for stress runs", self.eta)
            };
            return Err(Error::invalid("eta", reason));
        }
        if self.force && self.eta >= 0.5 {
            warn!("eta = {} breaks the honest-majority assumption", self.eta);
        }
        if self.clients < 2 {
            return Err(Error::invalid("clients", "need at least 2 clients"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "need at least one seed"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction", "must lie in (0, 1)"));
        }
        if let DatasetSpec::Synthetic { n, d, separation, .. } = &self.dataset {
            if *n < 2 {
                return Err(Error::invalid("dataset.n", "need at least 2 rows"));
            }
            if *d == 0 {
                return Err(Error::invalid("dataset.d", "must be positive"));
            }
            if !(separation.is_finite() && *separation >= 0.0) {
                return Err(Error::invalid("dataset.separation", "must be finite and non-negative"));
            }
        }
        self.round_config(0).validate()?;
        self.attack.validate()?;
        self.train.validate()
    }

    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(v) = o.eta {
            self.eta = v;
        }
        if let Some(v) = o.gamma_p {
            self.gamma_p = v;
        }
        if let Some(v) = o.gamma_v {
            self.gamma_v = v;
        }
        if let Some(v) = o.epsilon {
            self.epsilon = v;
        }
        if let Some(v) = o.clients {
            self.clients = v;
        }
        if let Some(v) = o.rounds {
            self.rounds = v;
        }
        if let Some(v) = o.scenario {
            self.scenario = v;
        }
        if let Some(d) = &o.dataset {
            self.dataset = DatasetSpec::parse_flag(d)?;
        }
        if let Some(p) = &o.out {
            self.output_dir = Some(p.clone());
        }
        self.force |= o.force;
        Ok(())
    }

    /// Renders the spec as TOML; parsing it back yields the same spec.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("spec serializes to TOML")
    }
}

fn classify_toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(key) = rest.split('`').next() {
            return Error::UnknownKey(key.to_string());
        }
    }
    Error::config(msg)
}

/// Parses TOML config text (empty text gives every default), applies flag
/// overrides, and validates.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(classify_toml_error)?;
    spec.apply(overrides)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config_file(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentSpec> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}

/// Artifacts of one seeded run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub chain: Chain,
    pub reports: Vec<RoundReport>,
    pub population: PopulationInfo,
    /// Held-out test accuracy after each round.
    pub accuracy: Vec<f64>,
}

impl RunOutput {
    /// Mean test accuracy over the last `window` rounds.
    pub fn final_accuracy(&self, window: usize) -> Option<f64> {
        let tail = &self.accuracy[self.accuracy.len().saturating_sub(window)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Loads the data, holds out the global test set, and runs one seed of the
/// configured scenario.
pub fn run_experiment(spec: &ExperimentSpec, seed: u64) -> Result<RunOutput> {
    spec.validate()?;
    let data = spec.dataset.load()?;
    let (train, test) = data.split(spec.test_fraction, derive_seed(seed, "test-split", 0))?;
    if spec.scenario == Scenario::Oracle {
        return run_oracle(spec, seed, &train, &test);
    }
    let (chain, reports, population) = run_simulation(
        &spec.round_config(seed),
        &spec.train,
        &spec.attack,
        &spec.population_spec(seed),
        &train,
        Some(&test),
    )?;
    let accuracy = reports.iter().filter_map(|r| r.test_accuracy).collect();
    Ok(RunOutput {
        seed,
        chain,
        reports,
        population,
        accuracy,
    })
}

/// Centralized baseline: one learner, one local epoch per round over the
/// union of every client's training split.
fn run_oracle(spec: &ExperimentSpec, seed: u64, train: &Dataset, test: &Dataset) -> Result<RunOutput> {
    let clients = build_population(train, &spec.population_spec(seed), spec.initial_tokens)?;
    let pooled = Dataset::concat(clients.iter().map(|c| &c.data.train))?;
    let mut model = init_params(&spec.train.architecture, train.dim(), derive_seed(seed, "init", 0))?;
    let chain = Chain::new(crate::ledger::model_digest(&model));
    let mut accuracy = Vec::with_capacity(spec.rounds as usize);
    for round in 0..spec.rounds {
        let cfg = TrainConfig {
            local_epochs: 1,
            seed: derive_seed(seed, "oracle", round),
            ..spec.train.clone()
        };
        model = local_train(&model, &pooled, &cfg)?;
        accuracy.push(evaluate(&model, &spec.train.architecture, test)?.value());
    }
    Ok(RunOutput {
        seed,
        chain,
        reports: Vec::new(),
        population: PopulationInfo::from_clients(&clients, spec.initial_tokens),
        accuracy,
    })
}

/// Runs every seed (in parallel), returned in seed order.
pub fn run_seeds(spec: &ExperimentSpec) -> Vec<(u64, Result<RunOutput>)> {
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| (seed, scope.spawn(move || run_experiment(spec, seed))))
            .collect();
        handles
            .into_iter()
            .map(|(seed, h)| {
                let result = h
                    .join()
                    .unwrap_or_else(|_| Err(Error::Protocol(format!("run for seed {seed} panicked"))));
                (seed, result)
            })
            .collect()
    })
}

fn token_series(out: &RunOutput) -> Vec<TimeSeries> {
    [Group::Honest, Group::Malicious]
        .into_iter()
        .filter_map(|g| token_timeseries(&out.reports, &out.population, g))
        .collect()
}

/// Writes one run's chain and analysis files under `<root>/seed_<seed>/`.
pub fn write_run(spec: &ExperimentSpec, out: &RunOutput, root: &Path) -> Result<Vec<PathBuf>> {
    let dir = root.join(format!("seed_{}", out.seed));
    let tag = RunTag {
        eta: spec.scenario.effective_eta(spec.eta),
        gamma: spec.naming_gamma(),
        seed: out.seed.to_string(),
    };
    let mut series = token_series(out);
    series.push(analysis::TimeSeries {
        label: "test_accuracy".into(),
        points: out
            .accuracy
            .iter()
            .enumerate()
            .map(|(i, &a)| analysis::SeriesPoint {
                round: i as u64 + 1,
                mean: a,
                std: 0.0,
            })
            .collect(),
    });
    let records = survival_stats(&out.reports, &out.population);
    let mut paths = analysis::export(&out.reports, &series, &records, &dir, &tag, spec.format)?;
    let chain_path = dir.join(analysis::file_name("chain", &tag, ExportFormat::Jsonl));
    export_chain(&out.chain, &chain_path)?;
    paths.push(chain_path);
    Ok(paths)
}

/// Writes cross-seed mean/std of every series to `<root>/aggregate_*`.
pub fn write_aggregate(spec: &ExperimentSpec, runs: &[&RunOutput], root: &Path) -> Result<PathBuf> {
    let tag = RunTag {
        eta: spec.scenario.effective_eta(spec.eta),
        gamma: spec.naming_gamma(),
        seed: "all".into(),
    };
    let per_run: Vec<Vec<TimeSeries>> = runs.iter().map(|o| token_series(o)).collect();
    let mut aggregates = Vec::new();
    for label in ["honest_tokens", "malicious_tokens"] {
        let series: Vec<TimeSeries> = per_run
            .iter()
            .filter_map(|s| s.iter().find(|t| t.label == label).cloned())
            .collect();
        if !series.is_empty() {
            aggregates.push(analysis::aggregate_series(label, &series));
        }
    }
    let accuracy: Vec<TimeSeries> = runs
        .iter()
        .map(|o| TimeSeries {
            label: "test_accuracy".into(),
            points: o
                .accuracy
                .iter()
                .enumerate()
                .map(|(i, &a)| analysis::SeriesPoint {
                    round: i as u64 + 1,
                    mean: a,
                    std: 0.0,
                })
                .collect(),
        })
        .collect();
    aggregates.push(analysis::aggregate_series("test_accuracy", &accuracy));
    let path = root.join(analysis::file_name("aggregate", &tag, spec.format));
    analysis::export::write_series(&aggregates, &path, spec.format)?;
    Ok(path)
}

/// One-line run summary.
pub fn summary_line(spec: &ExperimentSpec, out: &RunOutput) -> String {
    let counts = award_slash_counts(&out.reports);
    let removed = survival_stats(&out.reports, &out.population)
        .iter()
        .filter(|r| r.removal_round.is_some())
        .count();
    let acc = out
        .final_accuracy(FINAL_ACCURACY_WINDOW)
        .map_or("n/a".to_string(), |a| format!("{a:.4}"));
    format!(
        "scenario={} seed={} rounds={} final_accuracy={} removed={} awards={} slashes={}",
        spec.scenario.name(),
        out.seed,
        out.reports.len().max(out.accuracy.len()),
        acc,
        removed,
        counts.awards,
        counts.slashes
    )
}

/// Runs every seed, writes all artifacts, and prints a summary per run.
/// Returns the process exit code.
pub fn cmd_simulate(spec: &ExperimentSpec) -> i32 {
    let root = spec.output_root();
    let mut code = 0;
    let mut done = Vec::new();
    for (seed, result) in run_seeds(spec) {
        match result.and_then(|out| write_run(spec, &out, &root).map(|_| out)) {
            Ok(out) => {
                println!("{}", summary_line(spec, &out));
                done.push(out);
            }
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                code = 1;
            }
        }
    }
    if !done.is_empty() {
        let refs: Vec<&RunOutput> = done.iter().collect();
        if let Err(e) = write_aggregate(spec, &refs, &root) {
            eprintln!("aggregate: {e}");
            code = 1;
        }
    }
    code
}

/// Compares the Monte-Carlo estimate with the closed form for each stake;
/// exit code 0 iff all lie within `k_sigma` standard errors.
pub fn cmd_validate_theorem(gammas: &[f64], n_samples: u64, seed: u64, k_sigma: f64) -> i32 {
    if n_samples < 2 {
        eprintln!("warning: {n_samples} sample(s) is insufficient to estimate a standard error");
    }
    let mut ok = true;
    for &gamma_v in gammas {
        match mc_expected_return(&TheoremParams {
            gamma_v,
            n_samples,
            seed,
        }) {
            Ok(r) => {
                let pass = r.within(k_sigma);
                ok &= pass;
                println!(
                    "gamma_v={gamma_v} estimate={:.6} closed_form={:.6} std_error={:.6} {}",
                    r.estimate,
                    r.closed_form,
                    r.std_error,
                    if pass { "PASS" } else { "FAIL" }
                );
            }
            Err(e) => {
                eprintln!("gamma_v={gamma_v}: {e}");
                ok = false;
            }
        }
    }
    i32::from(!ok)
}

/// Verifies an exported chain: 0 valid, 1 corrupt, 2 unreadable.
pub fn cmd_verify_chain(path: &Path) -> i32 {
    match verify_chain_file(path) {
        Ok(FileVerdict::Valid { blocks }) => {
            println!("valid: {blocks} block(s)");
            0
        }
        Ok(FileVerdict::BadHeader) => {
            println!("invalid: chain header is corrupt");
            1
        }
        Ok(FileVerdict::BadBlock { index }) => {
            println!("invalid: first bad block {index}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let spec = parse_config("", &Overrides::default()).unwrap();
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!((spec.clients, spec.initial_tokens, spec.epsilon), (50, 64.0, 0.05));
        assert_eq!(spec.proposer_fraction, 0.10);
        assert_eq!(spec.seeds.len(), 1);
    }

    #[test]
    fn eta_range_and_force() {
        let err = parse_config("eta = 0.6", &Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidValue { ref key, .. } if key == "eta"));
        let forced = Overrides {
            force: true,
            ..Overrides::default()
        };
        assert_eq!(parse_config("eta = 0.6", &forced).unwrap().eta, 0.6);
    }

    #[test]
    fn flags_beat_file() {
        let o = Overrides {
            gamma_p: Some(16.0),
            ..Overrides::default()
        };
        assert_eq!(parse_config("gamma_p = 8.0", &o).unwrap().gamma_p, 16.0);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("gamma = 3.0", &Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownKey(ref k) if k == "gamma"), "{err}");
        let err = parse_config("[train]\nlr = 0.1", &Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownKey(ref k) if k == "lr"), "{err}");
    }

    #[test]
    fn dump_round_trips() {
        let mut spec = ExperimentSpec {
            scenario: Scenario::MaliciousProposersHonestVoters,
            seeds: vec![3, 1, 4],
            partition: PartitionMode::LabelShard { shards_per_client: 2 },
            output_dir: Some(PathBuf::from("/tmp/x")),
            ..ExperimentSpec::default()
        };
        spec.train.architecture = crate::learner::Architecture::Mlp { hidden: vec![8, 4] };
        let again = parse_config(&spec.dump(), &Overrides::default()).unwrap();
        assert_eq!(again, spec);

        let csv = ExperimentSpec {
            dataset: DatasetSpec::Csv {
                path: "loans.csv".into(),
                label_column: "loan_status".into(),
            },
            ..ExperimentSpec::default()
        };
        assert_eq!(parse_config(&csv.dump(), &Overrides::default()).unwrap(), csv);
    }

    #[test]
    fn dataset_flag() {
        assert_eq!(DatasetSpec::parse_flag("synthetic").unwrap(), DatasetSpec::default());
        assert_eq!(
            DatasetSpec::parse_flag("csv:data/a.csv:loan_status").unwrap(),
            DatasetSpec::Csv {
                path: "data/a.csv".into(),
                label_column: "loan_status".into()
            }
        );
        assert!(DatasetSpec::parse_flag("parquet").is_err());
    }
}
