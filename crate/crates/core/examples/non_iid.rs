//! The same protocol on label-skewed client data: each client holds a few
//! contiguous shards of a label-sorted dataset.
//!
//!     cargo run --release --example non_iid

use stakefl::analysis::award_slash_counts;
use stakefl::experiment::{run_experiment, ExperimentSpec, Scenario, FINAL_ACCURACY_WINDOW};
use stakefl::learner::PartitionMode;

fn main() -> stakefl::Result<()> {
    for partition in [PartitionMode::Iid, PartitionMode::LabelShard { shards_per_client: 2 }] {
        for scenario in [Scenario::Full, Scenario::FedavgWithMalicious] {
            let spec = ExperimentSpec {
                scenario,
                eta: 0.3,
                partition,
                ..ExperimentSpec::default()
            };
            let out = run_experiment(&spec, 0)?;
            let counts = award_slash_counts(&out.reports);
            println!(
                "{partition:?} {:<22} accuracy {:.4}  awards {:>3}  slashes {:>3}",
                scenario.name(),
                out.final_accuracy(FINAL_ACCURACY_WINDOW).unwrap_or(f64::NAN),
                counts.awards,
                counts.slashes
            );
        }
    }
    Ok(())
}
