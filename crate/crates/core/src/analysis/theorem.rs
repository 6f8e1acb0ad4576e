//! Monte-Carlo check of the expected return of a dishonest voter.
//!
//! With the malicious share `r` of a committee uniform on `(0, 1)`, a
//! dishonest voter loses its stake `γ` when `r <= 0.5` and gains
//! `γ·(1 - r)/r` otherwise, for an expected return of `-(ln 0.5 + 1)·γ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub gamma_v: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnEstimate {
    pub estimate: f64,
    pub closed_form: f64,
    /// Sample standard error of `estimate` (NaN with a single sample).
    pub std_error: f64,
}

impl ReturnEstimate {
    /// Whether the estimate lies within `k` standard errors of the closed form.
    pub fn within(&self, k: f64) -> bool {
        (self.estimate - self.closed_form).abs() <= k * self.std_error
    }
}

/// `-(ln 0.5 + 1)·γ`.
pub fn closed_form_return(gamma_v: f64) -> f64 {
    -(0.5_f64.ln() + 1.0) * gamma_v
}

/// Payoff of one dishonest vote for malicious share `r`; `r = 0.5` loses.
pub fn dishonest_payoff(r: f64, gamma_v: f64) -> f64 {
    if r <= 0.5 {
        -gamma_v
    } else {
        gamma_v * ((1.0 - r) / r)
    }
}

pub fn mc_expected_return(p: &TheoremParams) -> Result<ReturnEstimate> {
    if !(p.gamma_v.is_finite() && p.gamma_v > 0.0) {
        return Err(Error::invalid("gamma_v", "must be positive"));
    }
    if p.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..p.n_samples {
        let x = dishonest_payoff(rng.random::<f64>(), p.gamma_v);
        sum += x;
        sum_sq += x * x;
    }
    let n = p.n_samples as f64;
    let mean = sum / n;
    let std_error = if p.n_samples > 1 {
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(ReturnEstimate {
        estimate: mean,
        closed_form: closed_form_return(p.gamma_v),
        std_error,
    })
}
