//! On-chain storage and per-client traffic for a given model size.
//!
//!     cargo run --release --example cost_report [model_kib] [clients]

use stakefl::analysis::cost_report;

fn main() -> stakefl::Result<()> {
    let mut args = std::env::args().skip(1);
    let kib: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(587);
    let clients: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let r = cost_report(kib * 1024, 1, clients)?;
    println!("model per client per round: {:.2} KiB", r.per_client_kib());
    println!("chain storage for {clients} clients: {:.2} MiB", r.chain_storage_mib());
    // The simulator's own logistic model on 10 features, as f64.
    let own = cost_report(11, 8, clients)?;
    println!("this simulator's model: {} bytes/client, {} bytes on chain", own.per_client_comm_bytes, own.chain_storage_bytes);
    Ok(())
}
