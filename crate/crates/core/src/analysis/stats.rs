use serde::{Deserialize, Serialize, Serializer};

use crate::clients::ClientId;
use crate::error::{Error, Result};
use crate::protocol::{Decision, PopulationInfo, RoundReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Honest,
    Malicious,
}

impl Group {
    pub fn contains(self, malicious: bool) -> bool {
        match self {
            Group::Honest => !malicious,
            Group::Malicious => malicious,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Honest => "honest",
            Group::Malicious => "malicious",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalRecord {
    pub client_id: ClientId,
    pub malicious: bool,
    /// Round in which the client was removed; `None` if it survived.
    #[serde(serialize_with = "survived_or_round")]
    pub removal_round: Option<u64>,
}

fn survived_or_round<S: Serializer>(v: &Option<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_u64(*r),
        None => s.serialize_str("survived"),
    }
}

/// First removal round per client.
pub fn survival_stats(reports: &[RoundReport], population: &PopulationInfo) -> Vec<SurvivalRecord> {
    let mut removal = vec![None; population.len()];
    for r in reports {
        for id in &r.removed {
            removal[id.index()].get_or_insert(r.round);
        }
    }
    population
        .malicious
        .iter()
        .zip(removal)
        .enumerate()
        .map(|(i, (&malicious, removal_round))| SurvivalRecord {
            client_id: ClientId(i as u32),
            malicious,
            removal_round,
        })
        .collect()
}

/// Mean removal round over a group; survivors count as `total_rounds + 1`.
/// `None` for an empty group.
pub fn mean_removal_round(records: &[SurvivalRecord], group: Group, total_rounds: u64) -> Option<f64> {
    let rounds: Vec<f64> = records
        .iter()
        .filter(|r| group.contains(r.malicious))
        .map(|r| r.removal_round.unwrap_or(total_rounds + 1) as f64)
        .collect();
    if rounds.is_empty() {
        None
    } else {
        Some(rounds.iter().sum::<f64>() / rounds.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub round: u64,
    pub mean: f64,
    pub std: f64,
}

/// Per-round mean and standard deviation. Round 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

impl TimeSeries {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Token balance of a client group per round (removed clients count as 0).
/// Returns `None` when the group is empty.
pub fn token_timeseries(reports: &[RoundReport], population: &PopulationInfo, group: Group) -> Option<TimeSeries> {
    let members: Vec<usize> = population
        .malicious
        .iter()
        .enumerate()
        .filter(|(_, &m)| group.contains(m))
        .map(|(i, _)| i)
        .collect();
    if members.is_empty() {
        return None;
    }
    let mut points = Vec::with_capacity(reports.len() + 1);
    points.push(SeriesPoint {
        round: 0,
        mean: population.initial_tokens,
        std: 0.0,
    });
    for r in reports {
        let values: Vec<f64> = members.iter().map(|&i| r.balances[i]).collect();
        let (mean, std) = mean_std(&values);
        points.push(SeriesPoint { round: r.round, mean, std });
    }
    Some(TimeSeries {
        label: format!("{}_tokens", group.label()),
        points,
    })
}

/// Test accuracy of the committed model per round (round 0 excluded).
pub fn accuracy_timeseries(reports: &[RoundReport]) -> TimeSeries {
    TimeSeries {
        label: "test_accuracy".into(),
        points: reports
            .iter()
            .map(|r| SeriesPoint {
                round: r.round,
                mean: r.test_accuracy.unwrap_or(f64::NAN),
                std: 0.0,
            })
            .collect(),
    }
}

/// Mean and std across runs, point by point over the shortest run.
pub fn aggregate_series(label: &str, runs: &[TimeSeries]) -> TimeSeries {
    let len = runs.iter().map(|s| s.points.len()).min().unwrap_or(0);
    let points = (0..len)
        .map(|i| {
            let values: Vec<f64> = runs.iter().map(|s| s.points[i].mean).collect();
            let (mean, std) = mean_std(&values);
            SeriesPoint {
                round: runs[0].points[i].round,
                mean,
                std,
            }
        })
        .collect();
    TimeSeries {
        label: label.to_string(),
        points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwardSlash {
    pub awards: u64,
    pub slashes: u64,
    /// `(round, awards so far, slashes so far)`.
    pub cumulative: Vec<(u64, u64, u64)>,
}

impl AwardSlash {
    pub fn slash_fraction(&self) -> f64 {
        let total = self.awards + self.slashes;
        if total == 0 {
            0.0
        } else {
            self.slashes as f64 / total as f64
        }
    }
}

/// Accepted rounds are awards; rejected rounds are slashes.
pub fn award_slash_counts(reports: &[RoundReport]) -> AwardSlash {
    let (mut awards, mut slashes) = (0, 0);
    let cumulative = reports
        .iter()
        .map(|r| {
            match r.decision {
                Decision::Accept => awards += 1,
                Decision::Reject => slashes += 1,
            }
            (r.round, awards, slashes)
        })
        .collect();
    AwardSlash {
        awards,
        slashes,
        cumulative,
    }
}

/// Mean test accuracy over the last `window` rounds.
pub fn final_accuracy(reports: &[RoundReport], window: usize) -> Option<f64> {
    let tail: Vec<f64> = reports
        .iter()
        .rev()
        .take(window)
        .filter_map(|r| r.test_accuracy)
        .collect();
    if tail.is_empty() {
        None
    } else {
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Bytes a proposer or voter moves per round: one model.
    pub per_client_comm_bytes: u64,
    /// Bytes stored on chain for `K` clients' models.
    pub chain_storage_bytes: u64,
}

const MIB: f64 = 1024.0 * 1024.0;

impl CostReport {
    pub fn per_client_kib(&self) -> f64 {
        self.per_client_comm_bytes as f64 / 1024.0
    }

    pub fn chain_storage_mib(&self) -> f64 {
        self.chain_storage_bytes as f64 / MIB
    }
}

pub fn cost_report(param_dim: u64, bytes_per_value: u64, clients: u64) -> Result<CostReport> {
    for (key, v) in [("param_dim", param_dim), ("bytes_per_value", bytes_per_value), ("clients", clients)] {
        if v == 0 {
            return Err(Error::invalid(key, "must be positive"));
        }
    }
    let per_client = param_dim
        .checked_mul(bytes_per_value)
        .ok_or_else(|| Error::invalid("param_dim", "model size overflows"))?;
    let storage = per_client
        .checked_mul(clients)
        .ok_or_else(|| Error::invalid("clients", "storage size overflows"))?;
    Ok(CostReport {
        per_client_comm_bytes: per_client,
        chain_storage_bytes: storage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Pools;

    fn reports(decisions: &[Decision], removed_at: &[(u64, u32)]) -> Vec<RoundReport> {
        decisions
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let mut r = RoundReport::empty(i as u64 + 1);
                r.decision = d;
                r.pools_after = Pools::default();
                r.balances = vec![64.0; 3];
                r.removed = removed_at
                    .iter()
                    .filter(|(round, _)| *round == r.round)
                    .map(|&(_, c)| ClientId(c))
                    .collect();
                r
            })
            .collect()
    }

    #[test]
    fn award_slash_examples() {
        let all = reports(&[Decision::Accept; 10], &[]);
        let c = award_slash_counts(&all);
        assert_eq!((c.awards, c.slashes), (10, 0));

        use Decision::*;
        let alt = reports(&[Accept, Reject, Accept, Reject, Accept, Reject], &[]);
        let c = award_slash_counts(&alt);
        assert_eq!((c.awards, c.slashes), (3, 3));
        assert_eq!(c.cumulative[3], (4, 2, 2));
    }

    #[test]
    fn survival_examples() {
        let info = PopulationInfo {
            initial_tokens: 64.0,
            malicious: vec![true, false, true],
        };
        let rs = reports(&[Decision::Accept; 20], &[(12, 0)]);
        let s = survival_stats(&rs, &info);
        assert_eq!(s[0].removal_round, Some(12));
        assert_eq!(s[1].removal_round, None);
        assert_eq!(mean_removal_round(&s, Group::Malicious, 20), Some((12.0 + 21.0) / 2.0));
        let json = serde_json::to_string(&s[1]).unwrap();
        assert!(json.contains("\"survived\""));
    }

    #[test]
    fn token_series_starts_at_initial_and_flags_empty_group() {
        let info = PopulationInfo {
            initial_tokens: 64.0,
            malicious: vec![false; 3],
        };
        let rs = reports(&[Decision::Accept; 2], &[]);
        let s = token_timeseries(&rs, &info, Group::Honest).unwrap();
        assert_eq!(s.points[0], SeriesPoint { round: 0, mean: 64.0, std: 0.0 });
        assert_eq!(s.points.len(), 3);
        assert!(token_timeseries(&rs, &info, Group::Malicious).is_none());
    }

    #[test]
    fn cost_examples() {
        // 587 KiB per model as 4-byte values.
        let c = cost_report(587 * 1024 / 4, 4, 50).unwrap();
        assert_eq!(c.per_client_kib(), 587.0);
        assert_eq!(format!("{:.2}", c.chain_storage_mib()), "28.66");
        let one = cost_report(10, 8, 1).unwrap();
        assert_eq!(one.chain_storage_bytes, one.per_client_comm_bytes);
        assert!(cost_report(0, 4, 50).is_err());
    }
}
