//! Mini-batch SGD on binary cross-entropy, scoring, and FedAVG.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{Architecture, Network, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    /// Heavy-ball momentum coefficient; `0.0` is plain SGD.
    pub momentum: f64,
    pub architecture: Architecture,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 16,
            local_epochs: 2,
            momentum: 0.0,
            architecture: Architecture::Logistic,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        self.architecture.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Quadratic pull `weight * ||θ - anchor||²` added to the training loss.
#[derive(Debug, Clone, Copy)]
pub struct Proximal<'a> {
    pub anchor: &'a ParamVector,
    pub weight: f64,
}

fn check_dim(params: &ParamVector, arch: &Architecture, data: &Dataset) -> Result<Vec<usize>> {
    let expected = arch.param_count(data.dim());
    if params.dim() != expected {
        return Err(Error::config(format!(
            "parameter dimension {} does not match architecture ({expected} for input width {})",
            params.dim(),
            data.dim()
        )));
    }
    Ok(arch.layer_sizes(data.dim()))
}

/// Mean binary cross-entropy over `data` plus the optional proximal term,
/// together with its analytic gradient.
pub fn objective_and_gradient(
    params: &ParamVector,
    arch: &Architecture,
    data: &Dataset,
    proximal: Option<Proximal<'_>>,
) -> Result<(f64, Vec<f64>)> {
    let sizes = check_dim(params, arch, data)?;
    let net = Network::new(&sizes, params.values());
    let mut grad = vec![0.0; params.dim()];
    let mut loss = 0.0;
    for i in 0..data.len() {
        loss += net.accumulate_gradient(data.row(i), f64::from(data.label(i)), &mut grad);
    }
    let n = data.len() as f64;
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    if let Some(p) = proximal {
        for ((g, t), a) in grad.iter_mut().zip(params.values()).zip(p.anchor.values()) {
            loss += p.weight * (t - a) * (t - a);
            *g += 2.0 * p.weight * (t - a);
        }
    }
    Ok((loss, grad))
}

/// Trains on clean labels for `cfg.local_epochs` passes.
pub fn local_train(start: &ParamVector, data: &Dataset, cfg: &TrainConfig) -> Result<ParamVector> {
    local_train_with(start, data, cfg, None)
}

/// Mini-batch SGD. The proximal term, when present, is applied after every
/// gradient step as its exact proximal map, which stays stable for any
/// weight: `θ ← (θ + c·anchor) / (1 + c)` with `c = 2·lr·weight`.
pub fn local_train_with(
    start: &ParamVector,
    data: &Dataset,
    cfg: &TrainConfig,
    proximal: Option<Proximal<'_>>,
) -> Result<ParamVector> {
    cfg.validate()?;
    let sizes = check_dim(start, &cfg.architecture, data)?;
    if let Some(p) = proximal {
        if p.anchor.dim() != start.dim() {
            return Err(Error::config("proximal anchor dimension mismatch"));
        }
        if !(p.weight.is_finite() && p.weight >= 0.0) {
            return Err(Error::invalid("proximal_weight", "must be finite and non-negative"));
        }
    }
    let mut theta = start.values().to_vec();
    if cfg.local_epochs == 0 {
        return Ok(start.clone());
    }
    let mut velocity = vec![0.0; theta.len()];
    let mut grad = vec![0.0; theta.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate;

    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            {
                let net = Network::new(&sizes, &theta);
                for &i in batch {
                    net.accumulate_gradient(data.row(i), f64::from(data.label(i)), &mut grad);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g * scale;
                *t -= lr * *v;
            }
            if let Some(p) = proximal {
                let c = 2.0 * lr * p.weight;
                for (t, a) in theta.iter_mut().zip(p.anchor.values()) {
                    *t = (*t + c * a) / (1.0 + c);
                }
            }
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("training diverged (non-finite parameters)"));
    }
    Ok(ParamVector::from_vec_unchecked(theta))
}

/// Classification accuracy in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EvalScore(f64);

impl EvalScore {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::config(format!("score {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Predicted label of one row: `1` when σ(logit) ≥ 0.5.
pub fn predict(params: &ParamVector, arch: &Architecture, x: &[f64]) -> u8 {
    let sizes = arch.layer_sizes(x.len());
    u8::from(Network::new(&sizes, params.values()).logit(x) >= 0.0)
}

/// Fraction of rows whose thresholded prediction equals the label.
pub fn evaluate(params: &ParamVector, arch: &Architecture, data: &Dataset) -> Result<EvalScore> {
    let sizes = check_dim(params, arch, data)?;
    let net = Network::new(&sizes, params.values());
    let correct = (0..data.len())
        .filter(|&i| u8::from(net.logit(data.row(i)) >= 0.0) == data.label(i))
        .count();
    Ok(EvalScore(correct as f64 / data.len() as f64))
}

/// Weighted mean of the updates with weights `n_k / Σ n_k`, the sum taken
/// over the supplied updates only.
pub fn fedavg(updates: &[(ParamVector, usize)]) -> Result<ParamVector> {
    let Some((first, _)) = updates.first() else {
        return Err(Error::config("fedavg needs at least one update"));
    };
    let dim = first.dim();
    if updates.iter().any(|(p, _)| p.dim() != dim) {
        return Err(Error::config("fedavg updates differ in dimension"));
    }
    if updates.iter().any(|&(_, n)| n == 0) {
        return Err(Error::config("fedavg weights must be at least 1"));
    }
    let total: usize = updates.iter().map(|&(_, n)| n).sum();
    let total = total as f64;
    let mut out = vec![0.0; dim];
    for (params, n) in updates {
        let w = *n as f64 / total;
        for (o, v) in out.iter_mut().zip(params.values()) {
            *o += w * v;
        }
    }
    // Identical inputs must come back bit-for-bit.
    if updates.iter().all(|(p, _)| p == first) {
        return Ok(first.clone());
    }
    // Clamp rounding drift back into the convex hull of each coordinate.
    for (j, o) in out.iter_mut().enumerate() {
        let (lo, hi) = updates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| {
            (lo.min(p.values()[j]), hi.max(p.values()[j]))
        });
        *o = o.clamp(lo, hi);
    }
    Ok(ParamVector::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::data::make_synthetic;
    use crate::learner::model::init_params;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fedavg_examples() {
        let theta = pv(&[0.5, -1.0, 2.0]);
        assert_eq!(fedavg(&[(theta.clone(), 5)]).unwrap(), theta);
        assert_eq!(fedavg(&[(pv(&[0.0]), 1), (pv(&[2.0]), 1)]).unwrap(), pv(&[1.0]));
        assert_eq!(fedavg(&[(pv(&[0.0]), 1), (pv(&[4.0]), 3)]).unwrap(), pv(&[3.0]));
    }

    #[test]
    fn fedavg_errors() {
        assert!(fedavg(&[]).is_err());
        assert!(fedavg(&[(pv(&[0.0]), 1), (pv(&[1.0, 2.0]), 1)]).is_err());
        assert!(fedavg(&[(pv(&[0.0]), 0)]).is_err());
    }

    #[test]
    fn zero_epochs_is_identity() {
        let data = make_synthetic(20, 3, 2.0, 0).unwrap();
        let start = init_params(&Architecture::Logistic, 3, 1).unwrap();
        let cfg = TrainConfig {
            local_epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(local_train(&start, &data, &cfg).unwrap(), start);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let data = make_synthetic(20, 3, 2.0, 0).unwrap();
        let start = init_params(&Architecture::Logistic, 4, 1).unwrap();
        let err = local_train(&start, &data, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn constant_predictions_score_extremes() {
        // Zero weights and a large positive bias always predict class 1.
        let params = pv(&[0.0, 0.0, 10.0]);
        let ones = Dataset::new(vec![0.3; 8], vec![1; 4], 2).unwrap();
        let zeros = Dataset::new(vec![0.3; 8], vec![0; 4], 2).unwrap();
        assert_eq!(evaluate(&params, &Architecture::Logistic, &ones).unwrap().value(), 1.0);
        assert_eq!(evaluate(&params, &Architecture::Logistic, &zeros).unwrap().value(), 0.0);
    }

    #[test]
    fn training_is_reproducible() {
        let data = make_synthetic(64, 4, 2.0, 3).unwrap();
        let arch = Architecture::Mlp { hidden: vec![6] };
        let start = init_params(&arch, 4, 2).unwrap();
        let cfg = TrainConfig {
            architecture: arch,
            momentum: 0.5,
            ..TrainConfig::default()
        };
        let a = local_train(&start, &data, &cfg).unwrap();
        let b = local_train(&start, &data, &cfg).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
    }

    #[test]
    fn huge_proximal_weight_stays_near_anchor() {
        let data = make_synthetic(64, 4, 2.0, 3).unwrap();
        let start = init_params(&Architecture::Logistic, 4, 2).unwrap();
        let prox = Proximal {
            anchor: &start,
            weight: 1e6,
        };
        let out = local_train_with(&start, &data, &TrainConfig::default(), Some(prox)).unwrap();
        assert!(out.distance(&start) < 1e-4);
    }
}
