//! Final test accuracy of the voting protocol against plain FedAVG (with and
//! without poisoning clients) and a centrally trained model, across eta.
//!
//!     cargo run --release --example baseline_comparison

use stakefl::experiment::{run_seeds, ExperimentSpec, Scenario, FINAL_ACCURACY_WINDOW};

fn main() {
    let scenarios = [
        Scenario::Full,
        Scenario::FedavgWithMalicious,
        Scenario::FedavgNoMalicious,
        Scenario::Oracle,
    ];
    print!("{:>5}", "eta");
    for s in scenarios {
        print!("{:>24}", s.name());
    }
    println!();
    for eta in [0.1, 0.2, 0.3, 0.4] {
        print!("{eta:>5}");
        for scenario in scenarios {
            let spec = ExperimentSpec {
                scenario,
                eta,
                seeds: (0..5).collect(),
                ..ExperimentSpec::default()
            };
            let accs: Vec<f64> = run_seeds(&spec)
                .into_iter()
                .filter_map(|(_, r)| r.ok()?.final_accuracy(FINAL_ACCURACY_WINDOW))
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            print!("{mean:>24.4}");
        }
        println!();
    }
}
