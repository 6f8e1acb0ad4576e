//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stakefl::analysis::{
    award_slash_counts, closed_form_return, cost_report, mc_expected_return, mean_removal_round, survival_stats,
    token_timeseries, Group, TheoremParams,
};
use stakefl::clients::{ClientId, Vote};
use stakefl::experiment::{run_experiment, run_seeds, write_run, ExperimentSpec, RunOutput, Scenario};
use stakefl::learner::{
    init_params, make_synthetic, objective_and_gradient, Architecture, ParamVector, Proximal,
};
use stakefl::ledger::{export_chain_string, parse_chain, verify_chain, FileVerdict};
use stakefl::protocol::{settle_proposers, settle_voters, tally_votes, Decision, Pools};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn runs(spec: &ExperimentSpec) -> Result<Vec<RunOutput>, String> {
    run_seeds(spec)
        .into_iter()
        .map(|(seed, r)| r.map_err(|e| format!("seed {seed}: {e}")))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn theorem() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for gamma_v in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let r = mc_expected_return(&TheoremParams {
            gamma_v,
            n_samples: 1_000_000,
            seed: 7,
        })
        .map_err(|e| e.to_string())?;
        // Independent closed form: -(ln 0.5 + 1) * gamma.
        let expected = -(0.5f64.ln() + 1.0) * gamma_v;
        ensure(close(r.closed_form, expected), format!("closed form {} != {expected}", r.closed_form))?;
        let z = (r.estimate - expected).abs() / r.std_error;
        worst = worst.max(z);
        ensure(z < 3.0, format!("gamma_v={gamma_v}: estimate {} is {z:.2} SE from {expected}", r.estimate))?;
    }
    ensure(
        (closed_form_return(32.0) - -9.8193).abs() < 5e-5,
        "closed form at 32 is not -9.8193",
    )?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, format!("took {secs:.2}s"))?;
    Ok(format!("worst |z| = {worst:.2}, {secs:.2}s"))
}

/// Malicious mean tokens sampled at round 0 and after every accepted round
/// never increase.
fn decreasing_at_accepts(means: &[f64], reports: &[stakefl::protocol::RoundReport]) -> bool {
    let mut reference = means[0];
    for (i, rep) in reports.iter().enumerate() {
        if rep.decision == Decision::Accept {
            if means[i + 1] > reference + 1e-9 {
                return false;
            }
            reference = means[i + 1];
        }
    }
    true
}

/// For the whole (eta, gamma_v) grid, at least 4/5 seeds both remove every
/// malicious voter within 100 rounds and keep the malicious mean weakly
/// decreasing; mean elimination round strictly falls as gamma_v grows.
fn elimination() -> Check {
    let mut summary = Vec::new();
    let mut non_monotone = Vec::new();
    for eta in [0.1, 0.2, 0.3, 0.4] {
        let mut last_speed = f64::INFINITY;
        for gamma_v in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let spec = ExperimentSpec {
                scenario: Scenario::HonestProposersMaliciousVoters,
                eta,
                gamma_v,
                rounds: 100,
                seeds: SEEDS.to_vec(),
                ..ExperimentSpec::default()
            };
            let mut passing = 0;
            let mut last_rounds = Vec::new();
            for out in runs(&spec)? {
                let records = survival_stats(&out.reports, &out.population);
                let mal: Vec<_> = records.iter().filter(|r| r.malicious).collect();
                ensure(!mal.is_empty(), "no malicious clients")?;
                let eliminated = mal.iter().all(|r| r.removal_round.is_some_and(|t| t <= 100));
                if eliminated {
                    last_rounds.push(mal.iter().filter_map(|r| r.removal_round).max().unwrap() as f64);
                }
                let series = token_timeseries(&out.reports, &out.population, Group::Malicious)
                    .ok_or("missing malicious series")?;
                let monotone = decreasing_at_accepts(&series.means(), &out.reports);
                if !monotone {
                    non_monotone.push(format!("{eta}/{gamma_v}/seed{}", out.seed));
                }
                passing += usize::from(eliminated && monotone);
            }
            ensure(
                passing >= 4,
                format!("eta={eta} gamma_v={gamma_v}: only {passing}/5 seeds eliminate and decrease"),
            )?;
            let speed = mean(&last_rounds);
            ensure(
                speed < last_speed,
                format!("eta={eta}: elimination at gamma_v={gamma_v} ({speed}) not faster than before ({last_speed})"),
            )?;
            last_speed = speed;
            if gamma_v == 2.0 || gamma_v == 32.0 {
                summary.push(format!("{eta}/{gamma_v}:{speed:.0}"));
            }
        }
    }
    Ok(format!(
        "mean last removal round (eta/gamma_v) {}; 100 runs, not monotone: [{}]",
        summary.join(" "),
        non_monotone.join(", ")
    ))
}

fn accuracy(scenario: Scenario, eta: f64) -> Result<f64, String> {
    let spec = ExperimentSpec {
        scenario,
        eta,
        rounds: 200,
        seeds: SEEDS.to_vec(),
        ..ExperimentSpec::default()
    };
    let finals: Vec<f64> = runs(&spec)?
        .iter()
        .map(|o| o.final_accuracy(50).ok_or("empty run".to_string()))
        .collect::<Result<_, _>>()?;
    Ok(mean(&finals))
}

fn robustness() -> Check {
    let clean = accuracy(Scenario::FedavgNoMalicious, 0.0)?;
    let mut worst_gap = f64::INFINITY;
    for eta in [0.1, 0.2, 0.3, 0.4] {
        let chain = accuracy(Scenario::Full, eta)?;
        ensure(
            chain >= clean - 0.03,
            format!("eta={eta}: blockchain {chain:.4} < clean FedAVG {clean:.4} - 0.03"),
        )?;
        worst_gap = worst_gap.min(chain - clean);
    }
    let chain = accuracy(Scenario::Full, 0.4)?;
    let poisoned = accuracy(Scenario::FedavgWithMalicious, 0.4)?;
    ensure(
        chain >= poisoned + 0.05,
        format!("eta=0.4: blockchain {chain:.4} vs poisoned FedAVG {poisoned:.4}"),
    )?;
    Ok(format!(
        "clean {clean:.4}, blockchain@0.4 {chain:.4}, poisoned@0.4 {poisoned:.4}, min(blockchain-clean) {worst_gap:+.4}"
    ))
}

fn settlement_examples() -> Check {
    let ids = |n: u32| (0..n).map(ClientId).collect::<Vec<_>>();
    // Proposers: reject with enough tokens.
    let mut m = vec![64.0];
    let mut pools = Pools::default();
    settle_proposers(Decision::Reject, &ids(1), &mut pools, 8.0, &mut m);
    ensure(close(m[0], 56.0) && close(pools.pool_p, 8.0), "reject 64 -> 56")?;
    // Proposers: partial forfeit.
    let mut m = vec![5.0];
    let mut pools = Pools::default();
    let s = settle_proposers(Decision::Reject, &ids(1), &mut pools, 8.0, &mut m);
    ensure(close(m[0], 0.0) && close(pools.pool_p, 5.0) && s.removed == ids(1), "partial forfeit")?;
    // Proposers: accept splits the pool.
    let mut m = vec![64.0; 3];
    let mut pools = Pools { pool_p: 24.0, pool_v: 0.0 };
    settle_proposers(Decision::Accept, &ids(3), &mut pools, 8.0, &mut m);
    ensure(m.iter().all(|&t| close(t, 72.0)) && pools.pool_p == 0.0, "pool split")?;
    // Voters: 3 vs 2.
    let votes = [Vote::Accept, Vote::Accept, Vote::Accept, Vote::Reject, Vote::Reject];
    let ballots: Vec<_> = ids(5).into_iter().zip(votes).collect();
    let mut m = vec![64.0; 5];
    let mut pools = Pools::default();
    settle_voters(Decision::Accept, &ballots, &mut pools, 4.0, &mut m);
    ensure(
        m[..3].iter().all(|&t| close(t, 64.0 + 8.0 / 3.0)) && m[3..].iter().all(|&t| close(t, 60.0)) && pools.pool_v == 0.0,
        format!("3-2 split gave {m:?}"),
    )?;
    // Voters: unanimous.
    let ballots: Vec<_> = ids(4).into_iter().map(|id| (id, Vote::Accept)).collect();
    let mut m = vec![64.0; 4];
    let mut pools = Pools::default();
    let s = settle_voters(Decision::Accept, &ballots, &mut pools, 4.0, &mut m);
    ensure(m.iter().all(|&t| t == 64.0) && pools.pool_v == 0.0 && s.removed.is_empty(), "unanimous")?;
    // Voters: minority with 1 token.
    let ballots = vec![(ClientId(0), Vote::Accept), (ClientId(1), Vote::Accept), (ClientId(2), Vote::Reject)];
    let mut m = vec![64.0, 64.0, 1.0];
    let mut pools = Pools::default();
    let s = settle_voters(Decision::Accept, &ballots, &mut pools, 4.0, &mut m);
    ensure(
        m[2] == 0.0 && s.removed == vec![ClientId(2)] && close(m[0], 64.5) && close(m[1], 64.5),
        "minority forfeit",
    )?;
    // Tally.
    use Vote::{Accept as A, Reject as R};
    ensure(tally_votes(&[A, A, R]).map_err(|e| e.to_string())? == Decision::Accept, "[+,+,-]")?;
    ensure(tally_votes(&[A, R]).map_err(|e| e.to_string())? == Decision::Reject, "[+,-]")?;
    ensure(tally_votes(&[R]).map_err(|e| e.to_string())? == Decision::Reject, "[-]")?;
    Ok("9/9 examples exact".into())
}

fn conservation() -> Check {
    let mut checked = 0;
    for (scenario, eta, seed) in [
        (Scenario::Full, 0.3, 11),
        (Scenario::MaliciousProposersHonestVoters, 0.4, 12),
        (Scenario::HonestProposersMaliciousVoters, 0.2, 13),
    ] {
        let spec = ExperimentSpec {
            scenario,
            eta,
            rounds: 500,
            seeds: vec![seed],
            ..ExperimentSpec::default()
        };
        let out = run_experiment(&spec, seed).map_err(|e| e.to_string())?;
        let initial = spec.initial_tokens * spec.clients as f64;
        for r in &out.reports {
            let total = r.balances.iter().sum::<f64>() + r.pools_after.pool_p + r.pools_after.pool_v;
            ensure(
                (total - initial).abs() <= 1e-9,
                format!("{scenario:?} round {}: total {total} != {initial}", r.round),
            )?;
            ensure(r.pools_after.pool_v == 0.0, format!("pool_v nonzero after round {}", r.round))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} round boundaries"))
}

fn tally_oracle() -> Check {
    let mut cases = 0;
    for n in 1..=7u32 {
        for mask in 0u32..(1 << n) {
            let votes: Vec<Vote> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { Vote::Accept } else { Vote::Reject })
                .collect();
            let ups = mask.count_ones() as i32;
            let expected = if ups > n as i32 - ups { Decision::Accept } else { Decision::Reject };
            let got = tally_votes(&votes).map_err(|e| e.to_string())?;
            ensure(got == expected, format!("n={n} mask={mask:b}: {got:?}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} vote vectors"))
}

fn survival() -> Check {
    let mean_removal = |gamma_p: f64| -> Result<Vec<f64>, String> {
        let spec = ExperimentSpec {
            scenario: Scenario::MaliciousProposersHonestVoters,
            eta: 0.3,
            gamma_p,
            seeds: SEEDS.to_vec(),
            ..ExperimentSpec::default()
        };
        runs(&spec)?
            .iter()
            .map(|o| {
                mean_removal_round(&survival_stats(&o.reports, &o.population), Group::Malicious, o.reports.len() as u64)
                    .ok_or("no malicious clients".to_string())
            })
            .collect()
    };
    let low = mean_removal(2.0)?;
    let high = mean_removal(32.0)?;
    let wins = low.iter().zip(&high).filter(|(l, h)| h < l).count();
    ensure(
        wins >= 4 && mean(&high) < mean(&low),
        format!("gamma_p=32 earlier in {wins}/5 seeds ({high:?} vs {low:?})"),
    )?;
    Ok(format!(
        "{wins}/5 seeds; mean removal {:.1} (gamma_p=32) vs {:.1} (gamma_p=2)",
        mean(&high),
        mean(&low)
    ))
}

fn slash_fraction() -> Check {
    let frac = |eta: f64| -> Result<f64, String> {
        let spec = ExperimentSpec {
            scenario: Scenario::MaliciousProposersHonestVoters,
            eta,
            seeds: SEEDS.to_vec(),
            ..ExperimentSpec::default()
        };
        let fs: Vec<f64> = runs(&spec)?
            .iter()
            .map(|o| {
                let c = award_slash_counts(&o.reports);
                assert_eq!(c.awards + c.slashes, o.reports.len() as u64);
                c.slash_fraction()
            })
            .collect();
        Ok(mean(&fs))
    };
    let (lo, hi) = (frac(0.1)?, frac(0.4)?);
    ensure(hi > lo, format!("eta=0.4 {hi:.4} <= eta=0.1 {lo:.4}"))?;
    Ok(format!("slash fraction {hi:.4} (eta=0.4) > {lo:.4} (eta=0.1)"))
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let spec = ExperimentSpec {
        eta: 0.2,
        gamma_p: 8.0,
        rounds: 200,
        seeds: vec![42],
        ..ExperimentSpec::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for attempt in ["a", "b"] {
        let out = run_experiment(&spec, 42).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(attempt);
        write_run(&spec, &out, &dir).map_err(|e| e.to_string())?;
        trees.push(tree_bytes(&dir));
    }
    ensure(trees[0].len() >= 4, "expected chain and export files")?;
    ensure(trees[0] == trees[1], "output trees differ")?;
    Ok(format!("{} files byte-identical", trees[0].len()))
}

fn verdict_of(bytes: &[u8]) -> FileVerdict {
    match parse_chain(bytes) {
        Err(v) => v,
        Ok(c) => match verify_chain(&c).first_bad_index {
            Some(index) => FileVerdict::BadBlock { index },
            None => FileVerdict::Valid { blocks: c.blocks.len() },
        },
    }
}

/// Flips every byte of `text` with each mask and checks the verifier names
/// the line's block (or the header).
fn flip_everywhere(text: &[u8], masks: &[u8]) -> Result<usize, String> {
    let header_len = text.iter().position(|&b| b == b'\n').unwrap() + 1;
    let mut flips = 0;
    let mut line = 0u64;
    for pos in 0..text.len() {
        let expected = if pos < header_len {
            FileVerdict::BadHeader
        } else {
            FileVerdict::BadBlock { index: line - 1 }
        };
        for &mask in masks {
            let mut bad = text.to_vec();
            bad[pos] ^= mask;
            let verdict = verdict_of(&bad);
            ensure(
                verdict == expected,
                format!("flip {mask:#04x} at byte {pos}: {verdict:?}, expected {expected:?}"),
            )?;
            flips += 1;
        }
        if text[pos] == b'\n' {
            line += 1;
        }
    }
    Ok(flips)
}

fn ledger_integrity() -> Check {
    // Full-size runs export, re-parse to the identical chain, and verify.
    let mut blocks = 0;
    for scenario in [Scenario::Full, Scenario::HonestProposersMaliciousVoters, Scenario::MaliciousProposersHonestVoters] {
        let spec = ExperimentSpec {
            scenario,
            eta: 0.4,
            ..ExperimentSpec::default()
        };
        let out = run_experiment(&spec, 21).map_err(|e| e.to_string())?;
        ensure(verify_chain(&out.chain).valid, format!("{scenario:?}: in-memory chain invalid"))?;
        let text = export_chain_string(&out.chain);
        let parsed = parse_chain(text.as_bytes()).map_err(|v| format!("{scenario:?}: fresh export gives {v:?}"))?;
        ensure(parsed == out.chain, format!("{scenario:?}: re-parsed chain differs"))?;
        blocks += parsed.blocks.len();
    }
    // Exhaustive corruption: three bit patterns on a small chain, one on a
    // default-size chain.
    let small = ExperimentSpec {
        clients: 10,
        rounds: 12,
        eta: 0.2,
        ..ExperimentSpec::default()
    };
    let out = run_experiment(&small, 3).map_err(|e| e.to_string())?;
    let mut flips = flip_everywhere(export_chain_string(&out.chain).as_bytes(), &[0x01, 0x20, 0x80])?;
    let default = ExperimentSpec {
        rounds: 25,
        ..ExperimentSpec::default()
    };
    let out = run_experiment(&default, 4).map_err(|e| e.to_string())?;
    flips += flip_everywhere(export_chain_string(&out.chain).as_bytes(), &[0x01])?;
    Ok(format!("{blocks} exported blocks round-trip; {flips} single-byte corruptions all located"))
}

fn gradient_check() -> Check {
    let data = make_synthetic(40, 5, 2.0, 9).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let archs = [Architecture::Logistic, Architecture::Mlp { hidden: vec![6, 3] }];
    let mut worst: f64 = 0.0;
    for probe in 0..10 {
        let arch = &archs[probe % 2];
        let mut theta = init_params(arch, data.dim(), probe as u64).map_err(|e| e.to_string())?.into_inner();
        theta.iter_mut().for_each(|t| *t = rng.random_range(-1.0..1.0));
        let anchor: Vec<f64> = theta.iter().map(|t| t + rng.random_range(-0.5..0.5)).collect();
        let anchor = ParamVector::new(anchor).map_err(|e| e.to_string())?;
        let prox = (probe % 3 == 0).then_some(Proximal {
            anchor: &anchor,
            weight: 0.3,
        });
        let params = ParamVector::new(theta.clone()).map_err(|e| e.to_string())?;
        let (_, analytic) = objective_and_gradient(&params, arch, &data, prox).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut numeric = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let eval = |delta: f64| {
                let mut t = theta.clone();
                t[i] += delta;
                objective_and_gradient(&ParamVector::new(t).unwrap(), arch, &data, prox).unwrap().0
            };
            numeric[i] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let norm_a = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm_n = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        let rel = diff / norm_a.max(norm_n).max(1e-12);
        worst = worst.max(rel);
        ensure(rel < 1e-4, format!("probe {probe} ({arch:?}): relative error {rel:e}"))?;
    }
    Ok(format!("worst relative error {worst:.2e}"))
}

fn cost() -> Check {
    // 587 KiB model stored as one byte per value, 50 clients.
    let r = cost_report(587 * 1024, 1, 50).map_err(|e| e.to_string())?;
    ensure(r.chain_storage_bytes == 587 * 1024 * 50, "storage bytes")?;
    let mib = r.chain_storage_mib();
    ensure(format!("{mib:.2}") == "28.66", format!("storage {mib} MiB"))?;
    let single = cost_report(587 * 1024, 1, 1).map_err(|e| e.to_string())?;
    ensure(single.chain_storage_bytes == single.per_client_comm_bytes, "K=1")?;
    ensure(cost_report(0, 4, 50).is_err(), "param_dim=0 accepted")?;
    Ok(format!("{mib:.2} MiB"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("expected return of a dishonest voter", theorem),
        ("malicious-voter elimination", elimination),
        ("robustness ordering", robustness),
        ("settlement worked examples", settlement_examples),
        ("token conservation", conservation),
        ("tally oracle", tally_oracle),
        ("survival ordering", survival),
        ("slash-fraction monotonicity", slash_fraction),
        ("determinism", determinism),
        ("ledger integrity", ledger_integrity),
        ("gradient check", gradient_check),
        ("cost report", cost),
    ];
    // Respect the libtest filter convention loosely: `--list` prints names.
    if std::env::args().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {:>2} {name}: test", i + 1);
        }
        return;
    }
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
