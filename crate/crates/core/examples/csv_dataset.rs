//! Run on tabular data from a CSV file. Without an argument a small
//! loan-style file is generated; otherwise pass `<path> <label_column>`.
//!
//!     cargo run --release --example csv_dataset [path label_column]

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stakefl::experiment::{run_experiment, DatasetSpec, ExperimentSpec, FINAL_ACCURACY_WINDOW};

fn demo_csv(path: &PathBuf) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("loan_amnt,int_rate,annual_inc,dti,loan_status\n");
    for _ in 0..3000 {
        let bad = rng.random_bool(0.3);
        let rate = if bad { rng.random_range(14.0..26.0) } else { rng.random_range(5.0..16.0) };
        let dti = if bad { rng.random_range(15.0..40.0) } else { rng.random_range(0.0..25.0) };
        let status = if bad { "Charged Off" } else { "Fully Paid" };
        let amount = rng.random_range(1000..35000);
        let income = rng.random_range(20_000..150_000);
        writeln!(text, "{amount},{rate:.2},{income},{dti:.1},{status}").unwrap();
    }
    std::fs::write(path, text)
}

fn main() -> stakefl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let _tmp;
    let (path, label) = if let [path, label] = args.as_slice() {
        (PathBuf::from(path), label.clone())
    } else {
        _tmp = tempfile::tempdir().map_err(|e| stakefl::Error::io(std::env::temp_dir(), e))?;
        let p = _tmp.path().join("loans.csv");
        demo_csv(&p).map_err(|e| stakefl::Error::io(&p, e))?;
        (p, "loan_status".to_string())
    };
    let spec = ExperimentSpec {
        dataset: DatasetSpec::Csv {
            path,
            label_column: label,
        },
        eta: 0.3,
        rounds: 100,
        ..ExperimentSpec::default()
    };
    let out = run_experiment(&spec, 0)?;
    println!(
        "final accuracy {:.4} after {} rounds",
        out.final_accuracy(FINAL_ACCURACY_WINDOW).unwrap_or(f64::NAN),
        out.reports.len()
    );
    Ok(())
}
