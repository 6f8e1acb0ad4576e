//! Splitting a dataset across clients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};

/// Fraction of each client's partition held back as its private validation set.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PartitionMode {
    #[default]
    Iid,
    /// Label-sorted shards, `shards_per_client` of them dealt to each client.
    LabelShard { shards_per_client: usize },
}

/// `n` split into `k` sizes that differ by at most one (larger sizes first).
fn balanced_sizes(n: usize, k: usize) -> Vec<usize> {
    let (q, r) = (n / k, n % k);
    (0..k).map(|i| q + usize::from(i < r)).collect()
}

/// Splits `data` into `k` disjoint partitions whose union is `data` and whose
/// sizes differ by at most one.
pub fn partition(data: &Dataset, k: usize, mode: PartitionMode, seed: u64) -> Result<Vec<Dataset>> {
    if k == 0 {
        return Err(Error::config("number of clients must be positive"));
    }
    let n = data.len();
    if n < k {
        return Err(Error::config(format!("cannot split {n} examples across {k} clients")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let sizes = balanced_sizes(n, k);

    let assignment: Vec<Vec<usize>> = match mode {
        PartitionMode::Iid => {
            let mut out = Vec::with_capacity(k);
            let mut start = 0;
            for s in sizes {
                out.push(order[start..start + s].to_vec());
                start += s;
            }
            out
        }
        PartitionMode::LabelShard { shards_per_client } => {
            if shards_per_client == 0 {
                return Err(Error::invalid("shards_per_client", "must be positive"));
            }
            // Stable sort keeps the shuffled order within each label.
            order.sort_by_key(|&i| data.label(i));
            // Each client's share is cut into `shards_per_client` pieces; the
            // pieces are laid along the label-sorted order in random slot order.
            let mut pieces: Vec<Vec<usize>> = sizes
                .iter()
                .map(|&s| {
                    let mut p = balanced_sizes(s, shards_per_client);
                    p.reverse();
                    p
                })
                .collect();
            let mut slots: Vec<usize> = (0..k)
                .flat_map(|c| std::iter::repeat_n(c, shards_per_client))
                .collect();
            slots.shuffle(&mut rng);
            let mut out = vec![Vec::new(); k];
            let mut start = 0;
            for client in slots {
                let len = pieces[client].pop().unwrap_or(0);
                out[client].extend_from_slice(&order[start..start + len]);
                start += len;
            }
            debug_assert_eq!(start, n);
            out
        }
    };
    Ok(assignment.iter().map(|idx| data.subset(idx)).collect())
}

/// A client's local data: training rows and private validation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSplit {
    pub train: Dataset,
    pub validation: Dataset,
}

/// 80/20 train/validation split of one client's partition.
pub fn local_split(part: &Dataset, seed: u64) -> Result<LocalSplit> {
    let (train, validation) = part.split(VALIDATION_FRACTION, seed)?;
    Ok(LocalSplit { train, validation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::data::make_synthetic;

    fn tagged(n: usize) -> Dataset {
        // Feature 0 is the row id so partitions can be traced back.
        let features = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
        Dataset::new(features, labels, 1).unwrap()
    }

    fn ids(parts: &[Dataset]) -> Vec<usize> {
        let mut all: Vec<usize> = parts
            .iter()
            .flat_map(|p| (0..p.len()).map(move |i| p.row(i)[0] as usize))
            .collect();
        all.sort_unstable();
        all
    }

    #[test]
    fn iid_fifty_pairs() {
        let d = tagged(100);
        let parts = partition(&d, 50, PartitionMode::Iid, 1).unwrap();
        assert_eq!(parts.len(), 50);
        assert!(parts.iter().all(|p| p.len() == 2));
        assert_eq!(ids(&parts), (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn single_client_gets_everything() {
        let d = tagged(17);
        let parts = partition(&d, 1, PartitionMode::Iid, 1).unwrap();
        assert_eq!(ids(&parts), (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_clients() {
        assert!(partition(&tagged(3), 4, PartitionMode::Iid, 0).is_err());
    }

    #[test]
    fn one_shard_each_is_single_label() {
        let d = make_synthetic(200, 3, 1.0, 5).unwrap();
        let mode = PartitionMode::LabelShard { shards_per_client: 1 };
        let parts = partition(&d, 2, mode, 3).unwrap();
        for p in &parts {
            let (zeros, ones) = p.label_counts();
            assert!(zeros == 0 || ones == 0, "histogram {zeros}/{ones}");
        }
    }

    #[test]
    fn label_shard_sizes_balanced() {
        let d = tagged(103);
        let mode = PartitionMode::LabelShard { shards_per_client: 3 };
        let parts = partition(&d, 7, mode, 11).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Dataset::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(ids(&parts), (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn local_split_is_eighty_twenty() {
        let s = local_split(&tagged(100), 0).unwrap();
        assert_eq!((s.train.len(), s.validation.len()), (80, 20));
    }
}
