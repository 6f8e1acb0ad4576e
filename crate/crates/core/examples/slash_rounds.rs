//! Accepted ("award") versus rejected ("slash") rounds as the share of
//! poisoning proposers grows.
//!
//!     cargo run --release --example slash_rounds

use stakefl::analysis::award_slash_counts;
use stakefl::experiment::{run_seeds, ExperimentSpec, Scenario};

fn main() {
    for eta in [0.1, 0.2, 0.3, 0.4] {
        let spec = ExperimentSpec {
            scenario: Scenario::MaliciousProposersHonestVoters,
            eta,
            seeds: (0..5).collect(),
            ..ExperimentSpec::default()
        };
        let counts: Vec<_> = run_seeds(&spec)
            .into_iter()
            .filter_map(|(_, r)| r.ok())
            .map(|o| award_slash_counts(&o.reports))
            .collect();
        let awards: u64 = counts.iter().map(|c| c.awards).sum();
        let slashes: u64 = counts.iter().map(|c| c.slashes).sum();
        let first = &counts[0].cumulative;
        let at = |t: usize| first.get(t - 1).map_or((0, 0), |&(_, a, s)| (a, s));
        println!(
            "eta={eta}: {awards} awards / {slashes} slashes over {} runs; seed 0 cumulative (a, s) at 50/100/200: {:?} {:?} {:?}",
            counts.len(),
            at(50),
            at(100),
            at(200)
        );
    }
}
