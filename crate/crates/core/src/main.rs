use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stakefl::experiment::{
    cmd_simulate, cmd_validate_theorem, cmd_verify_chain, parse_config_file, Overrides, Scenario, OUTPUT_ENV,
};

#[derive(Parser)]
#[command(name = "stakefl", version, about = "Stake-based federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment for every seed and write chain and analysis files.
    Simulate(SimulateArgs),
    /// Check the dishonest-voter expected return by Monte Carlo.
    ValidateTheorem {
        #[arg(long = "gamma-v", value_delimiter = ',', default_values_t = [2.0, 4.0, 8.0, 16.0, 32.0])]
        gamma_v: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tolerance in standard errors.
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
    /// Verify an exported chain file.
    VerifyChain { path: PathBuf },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, alias = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "gamma-p")]
    gamma_p: Option<f64>,
    #[arg(long = "gamma-v")]
    gamma_v: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// `synthetic` or `csv:<path>:<label_column>`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, env = OUTPUT_ENV)]
    out: Option<PathBuf>,
    /// Allow eta >= 0.5.
    #[arg(long)]
    force: bool,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate(a) => {
            let overrides = Overrides {
                seeds: a.seeds,
                eta: a.eta,
                gamma_p: a.gamma_p,
                gamma_v: a.gamma_v,
                epsilon: a.epsilon,
                clients: a.clients,
                rounds: a.rounds,
                scenario: a.scenario,
                dataset: a.dataset,
                out: a.out,
                force: a.force,
            };
            match parse_config_file(a.config.as_deref(), &overrides) {
                Ok(spec) if a.dump_config => {
                    print!("{}", spec.dump());
                    0
                }
                Ok(spec) => cmd_simulate(&spec),
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        Command::ValidateTheorem {
            gamma_v,
            samples,
            seed,
            sigmas,
        } => cmd_validate_theorem(&gamma_v, samples, seed, sigmas),
        Command::VerifyChain { path } => cmd_verify_chain(&path),
    };
    ExitCode::from(code as u8)
}

