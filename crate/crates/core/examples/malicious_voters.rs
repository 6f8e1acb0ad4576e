//! Honest proposers, dishonest voters: watch the dishonest voters' stake
//! drain to zero for each voter stake size.
//!
//!     cargo run --release --example malicious_voters

use stakefl::analysis::{survival_stats, token_timeseries, Group};
use stakefl::experiment::{run_experiment, ExperimentSpec, Scenario};

fn main() -> stakefl::Result<()> {
    for gamma_v in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let spec = ExperimentSpec {
            scenario: Scenario::HonestProposersMaliciousVoters,
            eta: 0.4,
            gamma_v,
            rounds: 60,
            ..ExperimentSpec::default()
        };
        let out = run_experiment(&spec, 0)?;
        let honest = token_timeseries(&out.reports, &out.population, Group::Honest).unwrap();
        let malicious = token_timeseries(&out.reports, &out.population, Group::Malicious).unwrap();
        let gone = survival_stats(&out.reports, &out.population)
            .iter()
            .filter(|r| r.malicious)
            .filter_map(|r| r.removal_round)
            .max();
        print!("gamma_v={gamma_v:>4}  last malicious removal: {gone:?}\n  round ");
        for t in (0..=60).step_by(10) {
            print!("{t:>8}");
        }
        for (label, s) in [("honest", &honest), ("malic.", &malicious)] {
            print!("\n  {label}");
            for t in (0..=60).step_by(10) {
                print!("{:>8.1}", s.points[t].mean);
            }
        }
        println!();
    }
    Ok(())
}
