//! Drive the engine by hand: build a population, run rounds one at a time,
//! and inspect ballots and settlements as they happen.
//!
//!     cargo run --release --example step_rounds

use stakefl::clients::{AttackConfig, Behavior};
use stakefl::learner::{init_params, make_synthetic, Architecture, PartitionMode, TrainConfig};
use stakefl::protocol::{build_population, PopulationSpec, RoundConfig, Simulation};

fn main() -> stakefl::Result<()> {
    let data = make_synthetic(2000, 6, 3.0, 11)?;
    let (train, test) = data.split(0.2, 1)?;
    let population = PopulationSpec {
        clients: 12,
        eta: 0.25,
        behavior: Behavior {
            poison_proposals: true,
            invert_votes: true,
        },
        partition: PartitionMode::Iid,
        seed: 3,
    };
    let clients = build_population(&train, &population, 64.0)?;
    let malicious: Vec<_> = clients.iter().filter(|c| c.malicious).map(|c| c.id.to_string()).collect();
    println!("malicious: {}", malicious.join(" "));

    let cfg = RoundConfig {
        proposer_fraction: 0.25,
        rounds: 12,
        seed: 3,
        ..RoundConfig::default()
    };
    let init = init_params(&Architecture::Logistic, train.dim(), 0)?;
    let mut sim = Simulation::new(cfg, TrainConfig::default(), AttackConfig::default(), clients, init, Some(test))?;
    for _ in 0..12 {
        let r = sim.run_round()?;
        let accepts = r.ballots.iter().filter(|b| b.vote.sign() > 0).count();
        let proposers: Vec<_> = r.proposers.iter().map(ToString::to_string).collect();
        println!(
            "round {:>2} {:?}: proposers [{}], votes {accepts}/{}, pool_p {:>5.1}, removed {:?}, test acc {:.3}",
            r.round,
            r.decision,
            proposers.join(" "),
            r.ballots.len(),
            r.pools_after.pool_p,
            r.removed,
            r.test_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("total tokens {:.1} + pools {:.1}", sim.total_tokens(), sim.pools().total());
    Ok(())
}
