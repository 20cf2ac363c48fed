use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dist::Distribution;
use crate::error::{Error, Result};

pub const SIGNIFICANCE: f64 = 0.001;
pub const MIN_SAMPLES: u64 = 1000;
/// Buckets with smaller expected probability are pooled.
pub const MIN_BUCKET_PROB: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    /// Upper `1 − SIGNIFICANCE` quantile of χ²(dof).
    pub critical: f64,
    pub samples: u64,
    pub pass: bool,
}

/// Pearson χ² goodness-of-fit of observed `counts` against `expected`.
///
/// Buckets with expected probability below [`MIN_BUCKET_PROB`] are pooled
/// into one. Observations in a pool of zero expected mass fail outright.
pub fn chi_square_gof(counts: &[u64], expected: &Distribution) -> Result<GofResult> {
    if counts.len() != expected.len() {
        return Err(Error::LengthMismatch { left: counts.len(), right: expected.len() });
    }
    let n: u64 = counts.iter().sum();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples(n, MIN_SAMPLES));
    }

    let mut buckets: Vec<(u64, f64)> = Vec::with_capacity(counts.len());
    let (mut pooled_obs, mut pooled_prob) = (0u64, 0.0);
    for (&obs, &prob) in counts.iter().zip(expected.probs()) {
        if prob < MIN_BUCKET_PROB {
            pooled_obs += obs;
            pooled_prob += prob;
        } else {
            buckets.push((obs, prob));
        }
    }
    if pooled_prob >= MIN_BUCKET_PROB {
        buckets.push((pooled_obs, pooled_prob));
    } else if pooled_obs > 0 {
        // Mass observed where essentially none is expected.
        let dof = buckets.len().max(1);
        return Ok(GofResult { statistic: f64::INFINITY, dof, critical: critical_value(dof), samples: n, pass: false });
    }

    let total = n as f64;
    let statistic: f64 = buckets
        .iter()
        .map(|&(obs, prob)| {
            let e = prob * total;
            (obs as f64 - e).powi(2) / e
        })
        .sum();
    let dof = buckets.len().saturating_sub(1);
    if dof == 0 {
        return Ok(GofResult { statistic: 0.0, dof, critical: 0.0, samples: n, pass: true });
    }
    let critical = critical_value(dof);
    Ok(GofResult { statistic, dof, critical, samples: n, pass: statistic < critical })
}

pub fn critical_value(dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(1.0 - SIGNIFICANCE)
}
