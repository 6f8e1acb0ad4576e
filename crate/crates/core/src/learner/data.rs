//! Binary-labelled datasets: synthetic generation and CSV ingestion.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Labels that the loan-outcome CSV layout uses for its two kept classes.
pub const POSITIVE_LOAN_LABEL: &str = "Charged Off";
pub const NEGATIVE_LOAN_LABEL: &str = "Fully Paid";

/// Dense row-major feature matrix with `{0,1}` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Dataset("dataset must contain at least one example".into()));
        }
        if dim == 0 {
            return Err(Error::Dataset("feature dimension must be positive".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dataset(format!(
                "expected {} feature values for {} rows of width {dim}, got {}",
                labels.len() * dim,
                labels.len(),
                features.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Dataset("labels must be 0 or 1".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("features must be finite".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `(count of label 0, count of label 1)`.
    pub fn label_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - ones, ones)
    }

    /// Copies the given rows, in order. Panics on an out-of-range index.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
        }
    }

    /// Same features with every label replaced by `f(index, label)`.
    pub fn map_labels(&self, mut f: impl FnMut(usize, u8) -> u8) -> Dataset {
        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, &l)| f(i, l) & 1)
            .collect();
        Dataset {
            features: self.features.clone(),
            labels,
            dim: self.dim,
        }
    }

    /// Concatenates datasets of equal width.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Dataset> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for part in parts {
            match dim {
                None => dim = Some(part.dim),
                Some(d) if d != part.dim => {
                    return Err(Error::Dataset("cannot concatenate datasets of different width".into()))
                }
                _ => {}
            }
            features.extend_from_slice(&part.features);
            labels.extend_from_slice(&part.labels);
        }
        Dataset::new(features, labels, dim.unwrap_or(0))
    }

    /// Random split into `(train, holdout)` with `round(holdout_fraction * n)`
    /// holdout rows, clamped so both sides keep at least one row.
    pub fn split(&self, holdout_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if self.len() < 2 {
            return Err(Error::Dataset("need at least 2 rows to split".into()));
        }
        if !(0.0..1.0).contains(&holdout_fraction) {
            return Err(Error::config("holdout fraction must lie in [0, 1)"));
        }
        let n = self.len();
        let holdout = ((holdout_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (hold, train) = idx.split_at(holdout);
        Ok((self.subset(train), self.subset(hold)))
    }
}

/// Two isotropic unit-variance Gaussian clusters whose means sit at
/// `±separation/2` along a random unit direction. Labels are exactly balanced
/// (`n/2` zeros, the rest ones) and rows are shuffled.
pub fn make_synthetic(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("synthetic dataset needs n >= 2"));
    }
    if d == 0 {
        return Err(Error::config("synthetic dataset needs d >= 1"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::config("class separation must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|v| *v /= norm);
    } else {
        direction[0] = 1.0;
    }

    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * d);
    for &label in &labels {
        let sign = if label == 1 { 0.5 } else { -0.5 };
        for u in &direction {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(sign * separation * u + noise);
        }
    }
    Dataset::new(features, labels, d)
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("null")
}

type LabelMap = Box<dyn Fn(&str) -> Option<u8>>;

/// Maps raw label strings onto `{0,1}`.
///
/// Loan outcomes keep only "Fully Paid" (0) and "Charged Off" (1) and drop
/// other statuses; numeric `0`/`1` labels pass through; otherwise exactly two
/// distinct values are required and map in lexicographic order.
fn label_mapping(values: &[&str]) -> Result<LabelMap> {
    let distinct: BTreeSet<&str> = values.iter().map(|v| v.trim()).collect();
    if distinct.contains(NEGATIVE_LOAN_LABEL) || distinct.contains(POSITIVE_LOAN_LABEL) {
        return Ok(Box::new(|v: &str| match v.trim() {
            NEGATIVE_LOAN_LABEL => Some(0),
            POSITIVE_LOAN_LABEL => Some(1),
            _ => None,
        }));
    }
    let numeric: Option<BTreeSet<i64>> = distinct
        .iter()
        .map(|v| v.parse::<f64>().ok().filter(|x| x.fract() == 0.0).map(|x| x as i64))
        .collect();
    if let Some(nums) = numeric {
        if nums.iter().all(|&x| x == 0 || x == 1) {
            return Ok(Box::new(|v: &str| {
                v.trim().parse::<f64>().ok().map(|x| u8::from(x == 1.0))
            }));
        }
    }
    if distinct.len() == 2 {
        let mut it = distinct.into_iter();
        let zero = it.next().unwrap_or_default().to_string();
        let one = it.next().unwrap_or_default().to_string();
        return Ok(Box::new(move |v: &str| {
            let v = v.trim();
            if v == zero {
                Some(0)
            } else if v == one {
                Some(1)
            } else {
                None
            }
        }));
    }
    Err(Error::Dataset(format!(
        "label column must be binary, found {} distinct values",
        distinct.len()
    )))
}

/// Loads a headered CSV. Rows with any missing field are dropped, the label
/// column is mapped to `{0,1}`, and each feature column is z-score normalized
/// (constant columns become all zeros).
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Dataset(format!("unknown label column `{label_column}`")))?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() || record.iter().any(is_missing) {
            continue;
        }
        rows.push(record);
    }
    let raw_labels: Vec<&str> = rows.iter().map(|r| &r[label_idx]).collect();
    if raw_labels.is_empty() {
        return Err(Error::Dataset("fewer than 2 rows after filtering".into()));
    }
    let map = label_mapping(&raw_labels)?;

    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Dataset("no feature columns".into()));
    }
    let mut features = Vec::with_capacity(rows.len() * dim);
    let mut labels = Vec::with_capacity(rows.len());
    for (line, row) in rows.iter().enumerate() {
        let Some(label) = map(&row[label_idx]) else {
            continue;
        };
        for (col, field) in row.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "non-numeric value `{field}` in column `{}` (data row {})",
                    &headers[col],
                    line + 1
                ))
            })?;
            features.push(value);
        }
        labels.push(label);
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::Dataset("fewer than 2 rows after filtering".into()));
    }

    for col in 0..dim {
        let mean = (0..n).map(|r| features[r * dim + col]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|r| (features[r * dim + col] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        for r in 0..n {
            let v = &mut features[r * dim + col];
            *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
        }
    }
    Dataset::new(features, labels, dim)
}
