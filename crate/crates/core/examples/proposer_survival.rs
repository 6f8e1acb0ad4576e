//! How long poisoning proposers last as the proposer stake grows. Clients
//! that survive all rounds are counted at rounds + 1.
//!
//!     cargo run --release --example proposer_survival

use stakefl::analysis::{mean_removal_round, survival_stats, Group};
use stakefl::experiment::{run_seeds, ExperimentSpec, Scenario};

fn main() {
    println!("{:>8} {:>16} {:>16}", "gamma_p", "malicious", "honest");
    for gamma_p in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let spec = ExperimentSpec {
            scenario: Scenario::MaliciousProposersHonestVoters,
            eta: 0.3,
            gamma_p,
            seeds: (0..5).collect(),
            ..ExperimentSpec::default()
        };
        let mut sums = [0.0; 2];
        let mut n = 0.0;
        for (_, out) in run_seeds(&spec) {
            let Ok(out) = out else { continue };
            let records = survival_stats(&out.reports, &out.population);
            let rounds = out.reports.len() as u64;
            sums[0] += mean_removal_round(&records, Group::Malicious, rounds).unwrap_or(f64::NAN);
            sums[1] += mean_removal_round(&records, Group::Honest, rounds).unwrap_or(f64::NAN);
            n += 1.0;
        }
        println!("{gamma_p:>8} {:>16.1} {:>16.1}", sums[0] / n, sums[1] / n);
    }
}
